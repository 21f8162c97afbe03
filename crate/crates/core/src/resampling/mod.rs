//! Rebalancing strategies with exact per-class target counts.

mod ctgan_rs;
mod plan;
mod smote;
mod under;

pub use ctgan_rs::{ctgan_oversample, ctgan_ru, oversample_with_model};
pub use plan::{Method, ResamplePlan};
pub use smote::{smote_nc, SmoteNeighbors};
pub use under::{random_undersample, undersample_indices};
