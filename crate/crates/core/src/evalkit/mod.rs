//! Classification metrics, distribution diagnostics and collinearity screening.

mod histogram;
mod metrics;
mod vif;

pub use histogram::{
    dense_regions, divergence, joint_density, marginal_histogram, tv_distance, Divergence, GridAxis, HistogramGrid,
    DEFAULT_BINS,
};
pub use metrics::{
    g_mean, score, score_multiclass, BinaryConfusion, ConfusionMatrix, MetricsReport, MulticlassReport,
};
pub use vif::{vif, VifEntry};
