//! Conditional tabular GAN: conditional vectors, training-by-sampling,
//! the pac discriminator, adversarial training and sampling.

mod bundle;
mod cond;
mod config;
mod model;

pub use bundle::BUNDLE_VERSION;
pub use cond::{build_cond_vector, sample_training_condition, CategoryWeighting, CondLayout, CondSampler, CondVector};
pub use config::CtganConfig;
pub use model::{
    assemble_pacs, discriminator_network, generate, generator_network, output_spans, train, CtganModel,
    TrainingHistory,
};
