//! Small feed-forward network engine: dense layers, batch normalization,
//! dropout, activations (including per-span tanh / softmax / Gumbel-softmax
//! output heads), reverse-mode gradients and Adam.
//!
//! A [`Network`] is a chain of [`Stage`]s. A stage applies its layers in
//! order and either replaces its input with the result or, with
//! `concat_input`, appends the result to its input (`h ⊕ f(h)`).

mod activation;
mod adam;
mod network;
mod spec;

pub use activation::{gumbel_softmax, sigmoid, softmax_in_place};
pub use adam::{adam_step, AdamConfig, AdamState};
pub use network::{ForwardPass, Gradients, Mode, Network, ParamSet};
pub use spec::{Activation, LayerSpec, OutputSpan, SpanActivation, Stage};

/// Batch-norm numerical epsilon.
pub const BN_EPS: f64 = 1e-5;
