use std::sync::Arc;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use super::cond::{CategoryWeighting, CondLayout, CondSampler};
use super::config::CtganConfig;
use crate::error::{Error, Result};
use crate::neural::{
    adam_step, sigmoid, Activation, AdamConfig, AdamState, LayerSpec, Mode, Network, OutputSpan, ParamSet,
    SpanActivation, Stage,
};
use crate::rng;
use crate::tabular::{DataSchema, Dataset, Encoder, SpanKind};

/// Per-epoch mean losses.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainingHistory {
    pub generator_loss: Vec<f64>,
    pub discriminator_loss: Vec<f64>,
}

/// A trained (or freshly initialized) generator/discriminator pair with
/// everything needed to sample schema rows.
#[derive(Debug, Clone)]
pub struct CtganModel {
    pub(crate) encoder: Encoder,
    pub(crate) layout: CondLayout,
    pub(crate) config: CtganConfig,
    pub(crate) generator: Network,
    pub(crate) generator_params: ParamSet,
    pub(crate) discriminator: Network,
    pub(crate) discriminator_params: ParamSet,
    /// Observed category counts per discrete block of the training data.
    pub(crate) category_counts: Vec<Vec<usize>>,
    pub(crate) history: TrainingHistory,
}

/// Output heads matching the encoded row layout.
pub fn output_spans(encoder: &Encoder, temperature: f64) -> Vec<OutputSpan> {
    encoder
        .spans()
        .iter()
        .map(|s| OutputSpan {
            width: s.width,
            activation: match s.kind {
                SpanKind::Alpha => SpanActivation::Tanh,
                SpanKind::Mode | SpanKind::Category => SpanActivation::Gumbel { temperature },
            },
        })
        .collect()
}

/// `h_{i+1} = h_i ⊕ ReLU(BN(FC(h_i)))` for each residual width, then a
/// batch-normalized leaky layer, plain leaky layers, and the mixed head.
pub fn generator_network(config: &CtganConfig, cond_width: usize, encoder: &Encoder) -> Result<Network> {
    let mut stages = Vec::new();
    let mut width = config.z_dim + cond_width;
    for &d in &config.generator_residual {
        stages.push(Stage::concat(vec![
            LayerSpec::Dense { in_dim: width, out_dim: d },
            LayerSpec::BatchNorm { dim: d },
            LayerSpec::Activation { dim: d, activation: Activation::Relu },
        ]));
        width += d;
    }
    let leaky = Activation::LeakyRelu { slope: config.leaky_ratio };
    let mut tail = Vec::new();
    for (i, &d) in config.generator_tail.iter().enumerate() {
        tail.push(LayerSpec::Dense { in_dim: width, out_dim: d });
        if i == 0 {
            tail.push(LayerSpec::BatchNorm { dim: d });
        }
        tail.push(LayerSpec::Activation { dim: d, activation: leaky.clone() });
        width = d;
    }
    let out = encoder.width();
    tail.push(LayerSpec::Dense { in_dim: width, out_dim: out });
    tail.push(LayerSpec::Activation {
        dim: out,
        activation: Activation::Spans(output_spans(encoder, config.gumbel_temperature)),
    });
    stages.push(Stage::plain(tail));
    Network::new(config.z_dim + cond_width, stages)
}

/// Pac discriminator producing one logit per pac.
pub fn discriminator_network(config: &CtganConfig, row_width: usize, cond_width: usize) -> Result<Network> {
    let mut width = config.pac * (row_width + cond_width);
    let input = width;
    let mut layers = Vec::new();
    for &d in &config.discriminator_dims {
        layers.push(LayerSpec::Dense { in_dim: width, out_dim: d });
        layers.push(LayerSpec::Activation {
            dim: d,
            activation: Activation::LeakyRelu { slope: config.leaky_ratio },
        });
        layers.push(LayerSpec::Dropout { dim: d, rate: config.dropout_rate });
        width = d;
    }
    layers.push(LayerSpec::Dense { in_dim: width, out_dim: 1 });
    Network::new(input, vec![Stage::plain(layers)])
}

/// Group `rows` (n × w) and `conds` (n × c) into pacs:
/// `r_1 ⊕ … ⊕ r_pac ⊕ cond_1 ⊕ … ⊕ cond_pac` per output row.
pub fn assemble_pacs(rows: ArrayView2<f64>, conds: ArrayView2<f64>, pac: usize) -> Result<Array2<f64>> {
    let n = rows.nrows();
    if n != conds.nrows() || pac == 0 || n % pac != 0 {
        return Err(Error::Shape(format!(
            "{n} rows and {} conds cannot form pacs of {pac}",
            conds.nrows()
        )));
    }
    let (w, c) = (rows.ncols(), conds.ncols());
    let groups = n / pac;
    let mut out = Array2::zeros((groups, pac * (w + c)));
    for g in 0..groups {
        let mut row = out.row_mut(g);
        for j in 0..pac {
            row.slice_mut(s![j * w..(j + 1) * w]).assign(&rows.row(g * pac + j));
            let off = pac * w + j * c;
            row.slice_mut(s![off..off + c]).assign(&conds.row(g * pac + j));
        }
    }
    Ok(out)
}

/// Gradient with respect to the row part of each pac, back in `n × w` form.
fn unpack_row_gradient(grad: &Array2<f64>, pac: usize, w: usize) -> Array2<f64> {
    let groups = grad.nrows();
    let mut out = Array2::zeros((groups * pac, w));
    for g in 0..groups {
        for j in 0..pac {
            out.row_mut(g * pac + j).assign(&grad.slice(s![g, j * w..(j + 1) * w]));
        }
    }
    out
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Rows of the training set grouped by (discrete block, category).
struct RowIndex {
    rows: Vec<Vec<Vec<usize>>>,
}

impl RowIndex {
    fn new(data: &Dataset, layout: &CondLayout) -> Self {
        let rows = layout
            .columns
            .iter()
            .zip(&layout.sizes)
            .map(|(&c, &k)| {
                let mut by_cat = vec![Vec::new(); k];
                for (r, &v) in data.category_column(c).iter().enumerate() {
                    by_cat[v].push(r);
                }
                by_cat
            })
            .collect();
        RowIndex { rows }
    }
}

struct Batch {
    conds: Array2<f64>,
    /// Selected (block, category) per row.
    picks: Vec<(usize, usize)>,
}

fn cond_batch<R: Rng + ?Sized>(layout: &CondLayout, sampler: &CondSampler, n: usize, rng: &mut R) -> Batch {
    let mut conds = Array2::zeros((n, layout.width));
    let mut picks = Vec::with_capacity(n);
    for i in 0..n {
        let (col, cat) = sampler.sample(rng);
        let b = layout.block_of(col).expect("sampler columns are discrete");
        conds[(i, layout.offsets[b] + cat)] = 1.0;
        picks.push((b, cat));
    }
    Batch { conds, picks }
}

fn noise<R: Rng + ?Sized>(n: usize, z_dim: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, z_dim), || rng.sample::<f64, _>(StandardNormal))
}

fn generator_input(z: Array2<f64>, conds: &Array2<f64>) -> Array2<f64> {
    ndarray::concatenate(Axis(1), &[z.view(), conds.view()]).expect("matching rows")
}

/// Probability floor inside the conditional cross-entropy.
const CE_FLOOR: f64 = 1e-12;

impl CtganModel {
    /// Fit mode models, build both networks and run adversarial training.
    pub fn train(data: &Dataset, config: &CtganConfig) -> Result<CtganModel> {
        config.validate()?;
        if data.n_rows() < config.pac {
            return Err(Error::InsufficientData(format!(
                "{} rows cannot fill a pac of {}",
                data.n_rows(),
                config.pac
            )));
        }
        let schema = data.schema_arc();
        let layout = CondLayout::new(&schema);
        if layout.columns.is_empty() {
            return Err(Error::Schema("training needs at least one discrete column".into()));
        }
        let encoder = Encoder::fit(
            data,
            config.max_modes,
            config.mode_weight_threshold,
            rng::derive_seed(config.seed, "ctgan.modes"),
        )?;
        let category_counts: Vec<Vec<usize>> = layout.columns.iter().map(|&c| data.category_counts(c)).collect();
        let mut model = Self::initialize(encoder, layout, config.clone(), category_counts)?;
        model.fit(data)?;
        Ok(model)
    }

    fn initialize(
        encoder: Encoder,
        layout: CondLayout,
        config: CtganConfig,
        category_counts: Vec<Vec<usize>>,
    ) -> Result<CtganModel> {
        let generator = generator_network(&config, layout.width, &encoder)?;
        let discriminator = discriminator_network(&config, encoder.width(), layout.width)?;
        let mut init = rng::substream(config.seed, "ctgan.init");
        let generator_params = generator.init_params(&mut init);
        let discriminator_params = discriminator.init_params(&mut init);
        Ok(CtganModel {
            encoder,
            layout,
            config,
            generator,
            generator_params,
            discriminator,
            discriminator_params,
            category_counts,
            history: TrainingHistory::default(),
        })
    }

    fn fit(&mut self, data: &Dataset) -> Result<()> {
        let cfg = self.config.clone();
        let mut r = rng::substream(cfg.seed, "ctgan.train");
        let width = self.encoder.width();
        let real_all = Array2::from_shape_vec((data.n_rows(), width), self.encoder.encode_dataset(data, &mut r)?)
            .expect("encoded buffer has n × width entries");
        let index = RowIndex::new(data, &self.layout);
        let sampler = CondSampler::new(&self.layout, &self.category_counts, CategoryWeighting::LogFrequency)?;
        let adam = |lr| AdamConfig {
            lr,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: 1e-8,
        };
        let mut g_opt = AdamState::new(adam(cfg.lr_generator), &self.generator_params);
        let mut d_opt = AdamState::new(adam(cfg.lr_discriminator), &self.discriminator_params);
        let b = cfg.batch_size;
        let pacs = (b / cfg.pac) as f64;
        let steps = data.n_rows().div_ceil(b);
        let block_starts: Vec<usize> = self
            .layout
            .columns
            .iter()
            .map(|&c| self.encoder.category_span(c).expect("discrete span").start)
            .collect();

        for epoch in 0..cfg.epochs {
            let (mut g_sum, mut d_sum) = (0.0, 0.0);
            for step in 0..steps {
                // discriminator update
                let batch = cond_batch(&self.layout, &sampler, b, &mut r);
                let mut real = Array2::zeros((b, width));
                for (i, &(blk, cat)) in batch.picks.iter().enumerate() {
                    let pool = &index.rows[blk][cat];
                    let row = pool[r.random_range(0..pool.len())];
                    real.row_mut(i).assign(&real_all.row(row));
                }
                let z = noise(b, cfg.z_dim, &mut r);
                let g_pass = self.generator.forward(
                    &self.generator_params,
                    generator_input(z, &batch.conds).view(),
                    Mode::Train,
                    &mut r,
                )?;
                self.generator_params.absorb_batch_stats(&g_pass, cfg.bn_momentum);
                let real_in = assemble_pacs(real.view(), batch.conds.view(), cfg.pac)?;
                let fake_in = assemble_pacs(g_pass.output.view(), batch.conds.view(), cfg.pac)?;
                let d_real = self
                    .discriminator
                    .forward(&self.discriminator_params, real_in.view(), Mode::Train, &mut r)?;
                let d_fake = self
                    .discriminator
                    .forward(&self.discriminator_params, fake_in.view(), Mode::Train, &mut r)?;
                let mut d_loss = 0.0;
                let grad_real = d_real.output.mapv(|s| {
                    d_loss += softplus(-s);
                    (sigmoid(s) - 1.0) / pacs
                });
                let grad_fake = d_fake.output.mapv(|s| {
                    d_loss += softplus(s);
                    sigmoid(s) / pacs
                });
                d_loss /= pacs;
                if !d_loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        step,
                        detail: format!("discriminator loss {d_loss}"),
                    });
                }
                let (mut gd, _) = self
                    .discriminator
                    .backward(&self.discriminator_params, &d_real, grad_real.view())?;
                let (gd_fake, _) = self
                    .discriminator
                    .backward(&self.discriminator_params, &d_fake, grad_fake.view())?;
                for (a, f) in gd.tensors.iter_mut().zip(gd_fake.tensors) {
                    *a += &f;
                }
                adam_step(&mut d_opt, &mut self.discriminator_params, &gd)?;

                // generator update
                let batch = cond_batch(&self.layout, &sampler, b, &mut r);
                let z = noise(b, cfg.z_dim, &mut r);
                let g_pass = self.generator.forward(
                    &self.generator_params,
                    generator_input(z, &batch.conds).view(),
                    Mode::Train,
                    &mut r,
                )?;
                self.generator_params.absorb_batch_stats(&g_pass, cfg.bn_momentum);
                let fake_in = assemble_pacs(g_pass.output.view(), batch.conds.view(), cfg.pac)?;
                let d_fake = self
                    .discriminator
                    .forward(&self.discriminator_params, fake_in.view(), Mode::Train, &mut r)?;
                let mut adv = 0.0;
                let grad_logit = d_fake.output.mapv(|s| {
                    adv += softplus(-s);
                    (sigmoid(s) - 1.0) / pacs
                });
                adv /= pacs;
                let (_, grad_in) = self
                    .discriminator
                    .backward(&self.discriminator_params, &d_fake, grad_logit.view())?;
                let mut grad_out = unpack_row_gradient(&grad_in, cfg.pac, width);
                let mut ce = 0.0;
                for (i, &(blk, cat)) in batch.picks.iter().enumerate() {
                    let j = block_starts[blk] + cat;
                    let y = g_pass.output[(i, j)].max(CE_FLOOR);
                    ce -= y.ln();
                    grad_out[(i, j)] -= 1.0 / (y * b as f64);
                }
                ce /= b as f64;
                let g_loss = adv + ce;
                if !g_loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        step,
                        detail: format!("generator loss {g_loss} (adversarial {adv}, conditional {ce})"),
                    });
                }
                let (gg, _) = self.generator.backward(&self.generator_params, &g_pass, grad_out.view())?;
                adam_step(&mut g_opt, &mut self.generator_params, &gg)?;
                g_sum += g_loss;
                d_sum += d_loss;
            }
            self.history.generator_loss.push(g_sum / steps as f64);
            self.history.discriminator_loss.push(d_sum / steps as f64);
            log::debug!(
                "epoch {epoch}: generator {:.4} discriminator {:.4}",
                g_sum / steps as f64,
                d_sum / steps as f64
            );
        }
        Ok(())
    }

    pub fn schema(&self) -> &DataSchema {
        self.encoder.schema()
    }

    pub fn schema_arc(&self) -> Arc<DataSchema> {
        self.encoder.schema_arc()
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn config(&self) -> &CtganConfig {
        &self.config
    }

    pub fn cond_layout(&self) -> &CondLayout {
        &self.layout
    }

    pub fn history(&self) -> &TrainingHistory {
        &self.history
    }

    pub fn generator(&self) -> (&Network, &ParamSet) {
        (&self.generator, &self.generator_params)
    }

    pub fn discriminator(&self) -> (&Network, &ParamSet) {
        (&self.discriminator, &self.discriminator_params)
    }

    pub fn category_counts(&self) -> &[Vec<usize>] {
        &self.category_counts
    }

    /// Raw generator outputs (before decoding) for the given conditions,
    /// each `(schema column, category)`.
    pub fn generate_raw<R: Rng + ?Sized>(&self, conditions: &[(usize, usize)], rng: &mut R) -> Result<Array2<f64>> {
        let mut conds = Array2::zeros((conditions.len(), self.layout.width));
        for (i, &(c, k)) in conditions.iter().enumerate() {
            conds[(i, self.layout.position(c, k)?)] = 1.0;
        }
        let z = noise(conditions.len(), self.config.z_dim, rng);
        Ok(self
            .generator
            .forward(&self.generator_params, generator_input(z, &conds).view(), Mode::Sample, rng)?
            .output)
    }

    /// Discriminator probabilities (eval mode) for encoded rows grouped into pacs.
    pub fn discriminator_scores(&self, rows: ArrayView2<f64>, conds: ArrayView2<f64>) -> Result<Vec<f64>> {
        let input = assemble_pacs(rows, conds, self.config.pac)?;
        let mut unused = rng::seeded(0);
        let out = self
            .discriminator
            .forward(&self.discriminator_params, input.view(), Mode::Eval, &mut unused)?;
        Ok(out.output.iter().map(|&s| sigmoid(s)).collect())
    }

    /// Sample `n` rows. With `condition` every row is generated under that
    /// `(column name, category)`; otherwise conditions follow the observed
    /// training frequencies.
    pub fn generate(&self, n: usize, condition: Option<(&str, usize)>, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        let fixed = match condition {
            Some((name, cat)) => {
                let c = self.schema().require_index(name)?;
                self.layout.position(c, cat)?;
                Some((c, cat))
            }
            None => None,
        };
        let sampler = CondSampler::new(&self.layout, &self.category_counts, CategoryWeighting::Frequency)?;
        let mut r = rng::substream(seed, "ctgan.generate");
        let mut out = Dataset::empty(self.schema_arc());
        let mut done = 0;
        while done < n {
            let m = (n - done).min(self.config.batch_size);
            let conds: Vec<(usize, usize)> = (0..m).map(|_| fixed.unwrap_or_else(|| sampler.sample(&mut r))).collect();
            let raw = self.generate_raw(&conds, &mut r)?;
            for row in raw.rows() {
                let values = self.encoder.decode(row.as_slice().expect("standard layout"))?;
                out.push_row(&values)?;
            }
            done += m;
        }
        Ok(out)
    }
}

/// Train a model on `data`.
pub fn train(data: &Dataset, config: &CtganConfig) -> Result<CtganModel> {
    CtganModel::train(data, config)
}

/// Sample from a trained model.
pub fn generate(model: &CtganModel, n: usize, condition: Option<(&str, usize)>, seed: u64) -> Result<Dataset> {
    model.generate(n, condition, seed)
}
