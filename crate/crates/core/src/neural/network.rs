use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::activation;
use super::spec::{LayerSpec, Stage};
use super::BN_EPS;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, dropout and Gumbel noise active.
    Train,
    /// Running statistics, no dropout, noiseless output heads. Deterministic.
    Eval,
    /// Running statistics, no dropout, Gumbel noise active (generation).
    Sample,
}

/// Trainable tensors and batch-norm running statistics of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub names: Vec<String>,
    pub tensors: Vec<Array2<f64>>,
    pub buffer_names: Vec<String>,
    pub buffers: Vec<Array1<f64>>,
}

impl ParamSet {
    pub fn n_parameters(&self) -> usize {
        self.tensors.iter().map(Array2::len).sum()
    }

    /// Fold the batch statistics of a train-mode pass into the running
    /// averages: `running ← momentum·running + (1 − momentum)·batch`.
    pub fn absorb_batch_stats(&mut self, pass: &ForwardPass, momentum: f64) {
        for (slot, (mean, var)) in &pass.batch_stats {
            let (m, v) = (2 * slot, 2 * slot + 1);
            self.buffers[m] = &self.buffers[m] * momentum + mean * (1.0 - momentum);
            self.buffers[v] = &self.buffers[v] * momentum + var * (1.0 - momentum);
        }
    }
}

/// Gradients aligned with [`ParamSet::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Array2<f64>>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Gradients {
            tensors: params.tensors.iter().map(|t| Array2::zeros(t.raw_dim())).collect(),
        }
    }
}

#[derive(Debug, Clone)]
enum LayerCache {
    Dense { input: Array2<f64> },
    BatchNorm { x_hat: Array2<f64>, inv_std: Array1<f64>, batch: bool },
    Dropout { mask: Option<Array2<f64>> },
    Activation { output: Array2<f64> },
}

/// Output of a forward pass plus everything backward needs.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub output: Array2<f64>,
    mode: Mode,
    caches: Vec<Vec<LayerCache>>,
    stage_inputs: Vec<usize>,
    /// (batch-norm slot, batch mean, batch variance) for train-mode passes.
    batch_stats: Vec<(usize, (Array1<f64>, Array1<f64>))>,
    network_id: usize,
}

impl ForwardPass {
    pub fn mode(&self) -> Mode {
        self.mode
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    None,
    Dense(usize),
    BatchNorm { tensor: usize, buffer: usize },
}

/// A validated stage chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr", into = "NetworkRepr")]
pub struct Network {
    input_dim: usize,
    stages: Vec<Stage>,
    #[serde(skip)]
    slots: Vec<Vec<SlotRepr>>,
    output_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SlotRepr(Option<(bool, usize, usize)>);

impl From<Slot> for SlotRepr {
    fn from(s: Slot) -> Self {
        match s {
            Slot::None => SlotRepr(None),
            Slot::Dense(t) => SlotRepr(Some((false, t, 0))),
            Slot::BatchNorm { tensor, buffer } => SlotRepr(Some((true, tensor, buffer))),
        }
    }
}

impl SlotRepr {
    fn slot(self) -> Slot {
        match self.0 {
            None => Slot::None,
            Some((false, t, _)) => Slot::Dense(t),
            Some((true, tensor, buffer)) => Slot::BatchNorm { tensor, buffer },
        }
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkRepr {
    input_dim: usize,
    stages: Vec<Stage>,
}

impl TryFrom<NetworkRepr> for Network {
    type Error = String;

    fn try_from(r: NetworkRepr) -> std::result::Result<Self, String> {
        Network::new(r.input_dim, r.stages).map_err(|e| e.to_string())
    }
}

impl From<Network> for NetworkRepr {
    fn from(n: Network) -> Self {
        NetworkRepr {
            input_dim: n.input_dim,
            stages: n.stages,
        }
    }
}

impl Network {
    pub fn new(input_dim: usize, stages: Vec<Stage>) -> Result<Self> {
        let mut width = input_dim;
        let mut n_tensors = 0;
        let mut n_bn = 0;
        let mut slots = Vec::with_capacity(stages.len());
        for (s, stage) in stages.iter().enumerate() {
            if stage.layers.is_empty() {
                return Err(Error::InvalidArgument(format!("stage {s} has no layers")));
            }
            let stage_in = width;
            let mut stage_slots = Vec::with_capacity(stage.layers.len());
            for (l, layer) in stage.layers.iter().enumerate() {
                layer.validate()?;
                if layer.in_dim() != width {
                    return Err(Error::Shape(format!(
                        "stage {s} layer {l} expects width {}, receives {width}",
                        layer.in_dim()
                    )));
                }
                width = layer.out_dim();
                let slot = match layer {
                    LayerSpec::Dense { .. } => {
                        n_tensors += 2;
                        Slot::Dense(n_tensors - 2)
                    }
                    LayerSpec::BatchNorm { .. } => {
                        n_tensors += 2;
                        n_bn += 1;
                        Slot::BatchNorm {
                            tensor: n_tensors - 2,
                            buffer: n_bn - 1,
                        }
                    }
                    _ => Slot::None,
                };
                stage_slots.push(slot.into());
            }
            if stage.concat_input {
                width += stage_in;
            }
            slots.push(stage_slots);
        }
        Ok(Network {
            input_dim,
            stages,
            slots,
            output_dim: width,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    fn id(&self) -> usize {
        // Cheap structural fingerprint used to reject caches from other networks.
        self.stages
            .iter()
            .flat_map(|s| s.layers.iter())
            .fold(self.input_dim, |acc, l| acc.wrapping_mul(31).wrapping_add(l.out_dim()))
    }

    /// Glorot-uniform weights, zero biases, unit batch-norm scales.
    pub fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamSet {
        let mut p = ParamSet {
            names: Vec::new(),
            tensors: Vec::new(),
            buffer_names: Vec::new(),
            buffers: Vec::new(),
        };
        for (s, stage) in self.stages.iter().enumerate() {
            for (l, layer) in stage.layers.iter().enumerate() {
                match *layer {
                    LayerSpec::Dense { in_dim, out_dim } => {
                        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
                        let dist = Uniform::new_inclusive(-bound, bound).expect("valid bound");
                        let w = Array2::from_shape_simple_fn((in_dim, out_dim), || dist.sample(rng));
                        p.names.push(format!("stage{s}.layer{l}.dense.weight"));
                        p.tensors.push(w);
                        p.names.push(format!("stage{s}.layer{l}.dense.bias"));
                        p.tensors.push(Array2::zeros((1, out_dim)));
                    }
                    LayerSpec::BatchNorm { dim } => {
                        p.names.push(format!("stage{s}.layer{l}.bn.scale"));
                        p.tensors.push(Array2::ones((1, dim)));
                        p.names.push(format!("stage{s}.layer{l}.bn.shift"));
                        p.tensors.push(Array2::zeros((1, dim)));
                        p.buffer_names.push(format!("stage{s}.layer{l}.bn.running_mean"));
                        p.buffers.push(Array1::zeros(dim));
                        p.buffer_names.push(format!("stage{s}.layer{l}.bn.running_var"));
                        p.buffers.push(Array1::ones(dim));
                    }
                    _ => {}
                }
            }
        }
        p
    }

    pub fn check_params(&self, params: &ParamSet) -> Result<()> {
        for (stage, slots) in self.stages.iter().zip(&self.slots) {
            for (layer, slot) in stage.layers.iter().zip(slots) {
                let expect = match (layer, slot.slot()) {
                    (LayerSpec::Dense { in_dim, out_dim }, Slot::Dense(t)) => vec![(t, (*in_dim, *out_dim)), (t + 1, (1, *out_dim))],
                    (LayerSpec::BatchNorm { dim }, Slot::BatchNorm { tensor, .. }) => {
                        vec![(tensor, (1, *dim)), (tensor + 1, (1, *dim))]
                    }
                    _ => Vec::new(),
                };
                for (t, shape) in expect {
                    match params.tensors.get(t) {
                        Some(a) if a.dim() == shape => {}
                        Some(a) => {
                            return Err(Error::Shape(format!(
                                "parameter {} has shape {:?}, expected {shape:?}",
                                params.names.get(t).map_or("?", String::as_str),
                                a.dim()
                            )))
                        }
                        None => return Err(Error::Shape(format!("missing parameter tensor {t}"))),
                    }
                }
                if let Slot::BatchNorm { buffer, .. } = slot.slot() {
                    let dim = layer.out_dim();
                    for b in [2 * buffer, 2 * buffer + 1] {
                        if params.buffers.get(b).map(|a| a.len()) != Some(dim) {
                            return Err(Error::Shape(format!("running statistic {b} missing or mis-sized")));
                        }
                    }
                }
            }
        }
        let n_tensors = self.slots.iter().flatten().filter(|s| !matches!(s.slot(), Slot::None)).count() * 2;
        let n_buffers = self.slots.iter().flatten().filter(|s| matches!(s.slot(), Slot::BatchNorm { .. })).count() * 2;
        if params.tensors.len() != n_tensors || params.buffers.len() != n_buffers {
            return Err(Error::Shape(format!(
                "{} tensors / {} buffers, network needs {n_tensors} / {n_buffers}",
                params.tensors.len(),
                params.buffers.len()
            )));
        }
        if params.names.len() != params.tensors.len() || params.buffer_names.len() != params.buffers.len() {
            return Err(Error::Shape("parameter names do not match tensors".into()));
        }
        Ok(())
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        params: &ParamSet,
        input: ArrayView2<f64>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<ForwardPass> {
        if input.ncols() != self.input_dim {
            return Err(Error::Shape(format!(
                "input width {} != network input {}",
                input.ncols(),
                self.input_dim
            )));
        }
        let train = mode == Mode::Train;
        let mut h = input.to_owned();
        let mut caches = Vec::with_capacity(self.stages.len());
        let mut stage_inputs = Vec::with_capacity(self.stages.len());
        let mut batch_stats = Vec::new();
        for (stage, slots) in self.stages.iter().zip(&self.slots) {
            let stage_input = if stage.concat_input { Some(h.clone()) } else { None };
            stage_inputs.push(h.ncols());
            let mut layer_caches = Vec::with_capacity(stage.layers.len());
            for (layer, slot) in stage.layers.iter().zip(slots) {
                match (layer, slot.slot()) {
                    (LayerSpec::Dense { .. }, Slot::Dense(t)) => {
                        let out = h.dot(&params.tensors[t]) + &params.tensors[t + 1];
                        layer_caches.push(LayerCache::Dense { input: h });
                        h = out;
                    }
                    (LayerSpec::BatchNorm { .. }, Slot::BatchNorm { tensor, buffer }) => {
                        let use_batch = train;
                        let (mean, var) = if use_batch {
                            let mean = h.mean_axis(Axis(0)).expect("non-empty batch");
                            let var = h.var_axis(Axis(0), 0.0);
                            batch_stats.push((buffer, (mean.clone(), var.clone())));
                            (mean, var)
                        } else {
                            (params.buffers[2 * buffer].clone(), params.buffers[2 * buffer + 1].clone())
                        };
                        let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
                        let x_hat = (h - &mean) * &inv_std;
                        let scale = params.tensors[tensor].row(0);
                        let shift = params.tensors[tensor + 1].row(0);
                        h = &x_hat * &scale + &shift;
                        layer_caches.push(LayerCache::BatchNorm {
                            x_hat,
                            inv_std,
                            batch: use_batch,
                        });
                    }
                    (LayerSpec::Dropout { rate, .. }, _) => {
                        if train && *rate > 0.0 {
                            let keep = 1.0 - rate;
                            let mask = Array2::from_shape_simple_fn(h.raw_dim(), || {
                                if rng.random::<f64>() < keep {
                                    1.0 / keep
                                } else {
                                    0.0
                                }
                            });
                            h *= &mask;
                            layer_caches.push(LayerCache::Dropout { mask: Some(mask) });
                        } else {
                            layer_caches.push(LayerCache::Dropout { mask: None });
                        }
                    }
                    (LayerSpec::Activation { activation, .. }, _) => {
                        h = activation::forward(activation, h, mode != Mode::Eval, rng);
                        layer_caches.push(LayerCache::Activation { output: h.clone() });
                    }
                    _ => unreachable!("slots mirror layers"),
                }
            }
            if let Some(inp) = stage_input {
                h = ndarray::concatenate(Axis(1), &[inp.view(), h.view()]).expect("same row count");
            }
            caches.push(layer_caches);
        }
        Ok(ForwardPass {
            output: h,
            mode,
            caches,
            stage_inputs,
            batch_stats,
            network_id: self.id(),
        })
    }

    /// Back-propagate `grad_output` (∂loss/∂output) through a cached pass.
    /// Returns parameter gradients and ∂loss/∂input.
    pub fn backward(
        &self,
        params: &ParamSet,
        pass: &ForwardPass,
        grad_output: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        if pass.network_id != self.id() || pass.caches.len() != self.stages.len() {
            return Err(Error::InvalidArgument("stale cache: forward pass came from another network".into()));
        }
        if grad_output.dim() != pass.output.dim() {
            return Err(Error::Shape(format!(
                "output gradient {:?} != output {:?}",
                grad_output.dim(),
                pass.output.dim()
            )));
        }
        let mut grads = Gradients::zeros_like(params);
        let mut g = grad_output.to_owned();
        for s in (0..self.stages.len()).rev() {
            let stage = &self.stages[s];
            let in_width = pass.stage_inputs[s];
            let (mut skip, mut gl) = if stage.concat_input {
                let skip = g.slice(ndarray::s![.., ..in_width]).to_owned();
                let rest = g.slice(ndarray::s![.., in_width..]).to_owned();
                (Some(skip), rest)
            } else {
                (None, g)
            };
            for l in (0..stage.layers.len()).rev() {
                let cache = &pass.caches[s][l];
                gl = match (&stage.layers[l], self.slots[s][l].slot(), cache) {
                    (LayerSpec::Dense { .. }, Slot::Dense(t), LayerCache::Dense { input }) => {
                        grads.tensors[t] = input.t().dot(&gl);
                        grads.tensors[t + 1] = gl.sum_axis(Axis(0)).insert_axis(Axis(0));
                        gl.dot(&params.tensors[t].t())
                    }
                    (LayerSpec::BatchNorm { .. }, Slot::BatchNorm { tensor, .. }, LayerCache::BatchNorm { x_hat, inv_std, batch }) => {
                        let scale = params.tensors[tensor].row(0);
                        grads.tensors[tensor] = (&gl * x_hat).sum_axis(Axis(0)).insert_axis(Axis(0));
                        grads.tensors[tensor + 1] = gl.sum_axis(Axis(0)).insert_axis(Axis(0));
                        let dx_hat = &gl * &scale;
                        if *batch {
                            let n = gl.nrows() as f64;
                            let sum_dx = dx_hat.sum_axis(Axis(0));
                            let sum_dx_x = (&dx_hat * x_hat).sum_axis(Axis(0));
                            ((dx_hat * n - &sum_dx) - x_hat * &sum_dx_x) * &(inv_std / n)
                        } else {
                            dx_hat * inv_std
                        }
                    }
                    (LayerSpec::Dropout { .. }, _, LayerCache::Dropout { mask }) => match mask {
                        Some(m) => gl * m,
                        None => gl,
                    },
                    (LayerSpec::Activation { activation, .. }, _, LayerCache::Activation { output }) => {
                        activation::backward(activation, output, &gl)
                    }
                    _ => return Err(Error::InvalidArgument("stale cache: layer mismatch".into())),
                };
            }
            g = match skip.take() {
                Some(sk) => sk + gl,
                None => gl,
            };
        }
        Ok((grads, g))
    }
}
