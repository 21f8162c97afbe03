//! Rebalancing imbalanced tabular data with a conditional tabular GAN,
//! baseline resamplers, binary/ordered logit severity models, and a Monte
//! Carlo parameter-recovery harness.
//!
//! The crate is organised bottom-up:
//!
//! * [`tabular`] – schemas, datasets, CSV I/O and the row encoder.
//! * [`mode_norm`] – per-column Gaussian mixtures and mode-specific normalization.
//! * [`neural`] – a small feed-forward engine with reverse-mode gradients and Adam.
//! * [`ctgan`] – the conditional generator / pac discriminator pair.
//! * [`resampling`] – RU, SMOTE-NC, CTGAN and CTGAN-RU.
//! * [`glm`] – binary and ordered logit maximum likelihood.
//! * [`evalkit`] – classification metrics, histograms, divergences, VIF.
//! * [`montecarlo`] – data-generating processes and the replication harness.
//! * [`pipeline`] – split → resample → fit → score, used by multi-seed sweeps.

pub mod ctgan;
pub mod error;
pub mod evalkit;
pub mod glm;
pub mod mode_norm;
pub mod montecarlo;
pub mod neural;
pub mod pipeline;
pub mod resampling;
pub mod rng;
pub mod tabular;

pub use error::{Error, Result};
