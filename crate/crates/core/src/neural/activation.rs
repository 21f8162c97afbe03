use ndarray::{Array2, Zip};
use rand::Rng;
use rand_distr::{Distribution, Gumbel};

use super::spec::{Activation, SpanActivation};

/// Gumbel-softmax relaxation: `softmax((logits + g) / temperature)` with
/// `g` i.i.d. standard Gumbel.
///
/// # Panics
/// If `temperature` is not positive.
pub fn gumbel_softmax<R: Rng + ?Sized>(logits: &[f64], temperature: f64, rng: &mut R) -> Vec<f64> {
    assert!(temperature > 0.0, "Gumbel temperature must be positive");
    let gumbel = Gumbel::new(0.0, 1.0).expect("valid Gumbel");
    let mut out: Vec<f64> = logits
        .iter()
        .map(|&l| (l + gumbel.sample(rng)) / temperature)
        .collect();
    softmax_in_place(&mut out);
    out
}

/// Numerically stable softmax over a slice.
pub fn softmax_in_place(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

pub(crate) fn forward<R: Rng + ?Sized>(act: &Activation, mut x: Array2<f64>, noise: bool, rng: &mut R) -> Array2<f64> {
    match act {
        Activation::Relu => x.mapv_inplace(|v| v.max(0.0)),
        Activation::LeakyRelu { slope } => x.mapv_inplace(|v| if v > 0.0 { v } else { slope * v }),
        Activation::Tanh => x.mapv_inplace(f64::tanh),
        Activation::Sigmoid => x.mapv_inplace(sigmoid),
        Activation::Spans(spans) => {
            let gumbel = Gumbel::new(0.0, 1.0).expect("valid Gumbel");
            for mut row in x.rows_mut() {
                let row = row.as_slice_mut().expect("row-major activations");
                let mut start = 0;
                for span in spans {
                    let block = &mut row[start..start + span.width];
                    match span.activation {
                        SpanActivation::Tanh => block.iter_mut().for_each(|v| *v = v.tanh()),
                        SpanActivation::Softmax => softmax_in_place(block),
                        SpanActivation::Gumbel { temperature } => {
                            for v in block.iter_mut() {
                                let g = if noise { gumbel.sample(rng) } else { 0.0 };
                                *v = (*v + g) / temperature;
                            }
                            softmax_in_place(block);
                        }
                    }
                    start += span.width;
                }
            }
        }
    }
    x
}

/// Gradient with respect to the activation input, given its output `y` and
/// the gradient `g` with respect to that output.
pub(crate) fn backward(act: &Activation, y: &Array2<f64>, g: &Array2<f64>) -> Array2<f64> {
    match act {
        Activation::Relu => Zip::from(y).and(g).map_collect(|&y, &g| if y > 0.0 { g } else { 0.0 }),
        Activation::LeakyRelu { slope } => {
            Zip::from(y).and(g).map_collect(|&y, &g| if y > 0.0 { g } else { slope * g })
        }
        Activation::Tanh => Zip::from(y).and(g).map_collect(|&y, &g| g * (1.0 - y * y)),
        Activation::Sigmoid => Zip::from(y).and(g).map_collect(|&y, &g| g * y * (1.0 - y)),
        Activation::Spans(spans) => {
            let mut out = Array2::zeros(y.raw_dim());
            for ((yr, gr), mut or) in y.rows().into_iter().zip(g.rows()).zip(out.rows_mut()) {
                let mut start = 0;
                for span in spans {
                    let r = start..start + span.width;
                    match span.activation {
                        SpanActivation::Tanh => {
                            for i in r {
                                or[i] = gr[i] * (1.0 - yr[i] * yr[i]);
                            }
                        }
                        SpanActivation::Softmax | SpanActivation::Gumbel { .. } => {
                            let scale = match span.activation {
                                SpanActivation::Gumbel { temperature } => 1.0 / temperature,
                                _ => 1.0,
                            };
                            let dot: f64 = r.clone().map(|i| gr[i] * yr[i]).sum();
                            for i in r {
                                or[i] = scale * yr[i] * (gr[i] - dot);
                            }
                        }
                    }
                    start += span.width;
                }
            }
            out
        }
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}
