//! Binary and ordered logit maximum likelihood with Wald inference.

mod binary;
mod design;
mod linalg;
mod ordered;
mod report;

pub use binary::{fit_binary_logit, predict_prob, LogitFit, SEPARATION_LIMIT};
pub use design::DesignMatrix;
pub use ordered::{fit_ordered_logit, logistic_cdf, ordered_probabilities, OrderedFit};
pub use report::{inference_report, stars, InferenceReport, ModelFit, ReportRow};
