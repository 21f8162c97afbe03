use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpanActivation {
    Tanh,
    Softmax,
    /// Softmax of `(logits + Gumbel noise) / temperature`. Noise is drawn in
    /// train and sample modes; eval mode uses the noiseless tempered softmax.
    Gumbel { temperature: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputSpan {
    pub width: usize,
    pub activation: SpanActivation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
    Tanh,
    Sigmoid,
    /// Mixed output head: consecutive column blocks, each with its own activation.
    Spans(Vec<OutputSpan>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Dense { in_dim: usize, out_dim: usize },
    BatchNorm { dim: usize },
    Dropout { dim: usize, rate: f64 },
    Activation { dim: usize, activation: Activation },
}

impl LayerSpec {
    pub fn in_dim(&self) -> usize {
        match *self {
            LayerSpec::Dense { in_dim, .. } => in_dim,
            LayerSpec::BatchNorm { dim } | LayerSpec::Dropout { dim, .. } | LayerSpec::Activation { dim, .. } => dim,
        }
    }

    pub fn out_dim(&self) -> usize {
        match *self {
            LayerSpec::Dense { out_dim, .. } => out_dim,
            _ => self.in_dim(),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            LayerSpec::Dense { in_dim, out_dim } if *in_dim == 0 || *out_dim == 0 => {
                bad("dense layer with a zero dimension".into())
            }
            LayerSpec::Dropout { rate, .. } if !(0.0..1.0).contains(rate) => {
                bad(format!("dropout rate {rate} outside [0, 1)"))
            }
            LayerSpec::Activation { activation: Activation::LeakyRelu { slope }, .. }
                if !(*slope > 0.0 && *slope < 1.0) =>
            {
                bad(format!("leaky ratio {slope} outside (0, 1)"))
            }
            LayerSpec::Activation { dim, activation: Activation::Spans(spans) } => {
                let total: usize = spans.iter().map(|s| s.width).sum();
                if total != *dim {
                    return bad(format!("output spans cover {total} columns, layer has {dim}"));
                }
                for s in spans {
                    if s.width == 0 {
                        return bad("empty output span".into());
                    }
                    if let SpanActivation::Gumbel { temperature } = s.activation {
                        if !(temperature > 0.0) {
                            return bad(format!("Gumbel temperature {temperature} must be positive"));
                        }
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// A run of layers whose output optionally gets concatenated onto its input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub concat_input: bool,
    pub layers: Vec<LayerSpec>,
}

impl Stage {
    pub fn plain(layers: Vec<LayerSpec>) -> Self {
        Stage {
            concat_input: false,
            layers,
        }
    }

    pub fn concat(layers: Vec<LayerSpec>) -> Self {
        Stage {
            concat_input: true,
            layers,
        }
    }
}
