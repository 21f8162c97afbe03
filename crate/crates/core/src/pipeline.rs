//! Split → rebalance → fit → score, and the multi-seed sweep built on it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ctgan::CtganConfig;
use crate::error::{Error, Result};
use crate::evalkit::{score, score_multiclass, BinaryConfusion, MetricsReport, MulticlassReport};
use crate::glm::{fit_binary_logit, fit_ordered_logit, DesignMatrix, ModelFit};
use crate::montecarlo::counts_for_ratio;
use crate::resampling::{Method, ResamplePlan};
use crate::rng;
use crate::tabular::{split, Dataset, LabelKind};

/// A resampling plan stated as class ratios, resolved against the class
/// counts of whatever training split it meets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioPlan {
    pub method: Method,
    /// Final class ratio, lowest class first.
    pub ratio: Vec<f64>,
    /// Intermediate ratio for `ctgan_ru`.
    #[serde(default)]
    pub ru_ratio: Option<Vec<f64>>,
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
    #[serde(default)]
    pub ctgan: CtganConfig,
}

fn default_k() -> usize {
    5
}

fn grow_to_ratio(counts: &[usize], ratio: &[f64]) -> Result<Vec<usize>> {
    if ratio.len() != counts.len() || ratio.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidArgument(format!("ratio {ratio:?} does not match {} classes", counts.len())));
    }
    let unit = counts
        .iter()
        .zip(ratio)
        .map(|(&c, &r)| c as f64 / r)
        .fold(0.0, f64::max);
    Ok(counts
        .iter()
        .zip(ratio)
        .map(|(&c, &r)| ((r * unit).round() as usize).max(c))
        .collect())
}

impl RatioPlan {
    pub fn resolve(&self, counts: &[usize], seed: u64) -> Result<ResamplePlan> {
        let mut plan = ResamplePlan::new(self.method, Vec::new(), seed);
        plan.k_neighbors = self.k_neighbors;
        plan.ctgan = self.ctgan.clone();
        plan.targets = match self.method {
            Method::Ru => counts_for_ratio(counts, &self.ratio)?,
            Method::SmoteNc | Method::Ctgan => grow_to_ratio(counts, &self.ratio)?,
            Method::CtganRu => {
                let ru_ratio = self
                    .ru_ratio
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("ctgan_ru needs ru_ratio".into()))?;
                let ru = counts_for_ratio(counts, ru_ratio)?;
                let targets = grow_to_ratio(&ru, &self.ratio)?;
                plan.ru_targets = Some(ru);
                targets
            }
        };
        Ok(plan)
    }
}

fn default_fraction() -> f64 {
    0.7
}

fn default_threshold() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub rebalance: Option<RatioPlan>,
    /// Binary decision threshold on the predicted probability.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            train_fraction: default_fraction(),
            rebalance: None,
            threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evaluation {
    Binary {
        confusion: BinaryConfusion,
        metrics: MetricsReport,
    },
    Multiclass(MulticlassReport),
}

impl Evaluation {
    /// Named scalar metrics in a stable order.
    pub fn metrics(&self) -> Vec<(String, f64)> {
        match self {
            Evaluation::Binary { metrics, .. } => vec![
                ("sensitivity".into(), metrics.sensitivity),
                ("specificity".into(), metrics.specificity),
                ("g_mean".into(), metrics.g_mean),
            ],
            Evaluation::Multiclass(r) => {
                let mut out = Vec::new();
                for (k, m) in r.per_class.iter().enumerate() {
                    out.push((format!("sensitivity[{k}]"), m.sensitivity));
                    out.push((format!("specificity[{k}]"), m.specificity));
                }
                out.push(("g_mean".into(), r.overall_g_mean));
                out
            }
        }
    }

    pub fn g_mean(&self) -> f64 {
        match self {
            Evaluation::Binary { metrics, .. } => metrics.g_mean,
            Evaluation::Multiclass(r) => r.overall_g_mean,
        }
    }
}

/// Fit a logit model of the kind the label calls for.
pub fn fit_model(train: &Dataset) -> Result<ModelFit> {
    Ok(match train.schema().label_kind() {
        LabelKind::Binary => fit_binary_logit(&DesignMatrix::from_dataset(train, true)?)?.into(),
        LabelKind::Ordered { levels } => fit_ordered_logit(&DesignMatrix::from_dataset(train, false)?, levels)?.into(),
    })
}

/// Predicted classes: threshold on `P(y = 1)` for binary fits, most
/// probable class for ordered fits.
pub fn predict_classes(fit: &ModelFit, data: &Dataset, threshold: f64) -> Result<Vec<usize>> {
    Ok(match fit {
        ModelFit::Binary(f) => f
            .predict_design(&DesignMatrix::from_dataset(data, f.intercept)?)?
            .into_iter()
            .map(|p| usize::from(p >= threshold))
            .collect(),
        ModelFit::Ordered(f) => f
            .predict_design(&DesignMatrix::from_dataset(data, false)?)?
            .into_iter()
            .map(|p| (0..p.len()).fold(0, |best, k| if p[k] > p[best] { k } else { best }))
            .collect(),
    })
}

pub fn evaluate(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<Evaluation> {
    if n_classes == 2 {
        let (confusion, metrics) = score(y_true, y_pred, 1)?;
        Ok(Evaluation::Binary { confusion, metrics })
    } else {
        Ok(Evaluation::Multiclass(score_multiclass(y_true, y_pred, n_classes)?))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineOutcome {
    pub seed: u64,
    pub train_counts: Vec<usize>,
    pub fitted_counts: Vec<usize>,
    pub test_counts: Vec<usize>,
    pub evaluation: Evaluation,
    #[serde(skip)]
    pub fit: ModelFit,
}

/// One seeded run. Sub-seeds for the split and the resampler are derived
/// from `seed`.
pub fn run_pipeline(data: &Dataset, cfg: &PipelineConfig, seed: u64) -> Result<PipelineOutcome> {
    if !(cfg.threshold > 0.0 && cfg.threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {} outside (0, 1)", cfg.threshold)));
    }
    let (train, test) = split(data, cfg.train_fraction, rng::derive_seed(seed, "split"))?;
    let fitted = match &cfg.rebalance {
        Some(plan) => plan
            .resolve(&train.class_counts(), rng::derive_seed(seed, "resample"))?
            .apply(&train)?,
        None => train.clone(),
    };
    let fit = fit_model(&fitted)?;
    let pred = predict_classes(&fit, &test, cfg.threshold)?;
    let evaluation = evaluate(test.labels(), &pred, data.schema().n_classes())?;
    Ok(PipelineOutcome {
        seed,
        train_counts: train.class_counts(),
        fitted_counts: fitted.class_counts(),
        test_counts: test.class_counts(),
        evaluation,
        fit,
    })
}

/// Per-seed metric rows plus their mean and sample standard deviation.
#[derive(Debug, Clone, Serialize)]
pub struct SeedSweep {
    pub metrics: Vec<String>,
    pub seeds: Vec<u64>,
    pub values: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub std_dev: Vec<f64>,
}

pub fn seeds_sweep(data: &Dataset, cfg: &PipelineConfig, seeds: &[u64]) -> Result<SeedSweep> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("empty seed list".into()));
    }
    let mut metrics = Vec::new();
    let mut values = Vec::new();
    for &s in seeds {
        let m = run_pipeline(data, cfg, s)?.evaluation.metrics();
        metrics = m.iter().map(|(n, _)| n.clone()).collect();
        values.push(m.into_iter().map(|(_, v)| v).collect::<Vec<f64>>());
    }
    let n = seeds.len() as f64;
    let mean: Vec<f64> = (0..metrics.len()).map(|j| values.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let std_dev = (0..metrics.len())
        .map(|j| {
            if seeds.len() < 2 {
                0.0
            } else {
                (values.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            }
        })
        .collect();
    Ok(SeedSweep {
        metrics,
        seeds: seeds.to_vec(),
        values,
        mean,
        std_dev,
    })
}

impl SeedSweep {
    pub fn to_csv(&self) -> String {
        let mut out = format!("seed,{}\n", self.metrics.join(","));
        for (s, row) in self.seeds.iter().zip(&self.values) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            out.push_str(&format!("{s},{}\n", cells.join(",")));
        }
        let cells: Vec<String> = self.mean.iter().zip(&self.std_dev).map(|(m, s)| format!("{m:.3}±{s:.3}")).collect();
        out.push_str(&format!("Mean±Std.dev,{}\n", cells.join(",")));
        out
    }
}

impl fmt::Display for SeedSweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<14}", "Seed")?;
        for m in &self.metrics {
            write!(f, "{m:>18}")?;
        }
        writeln!(f)?;
        for (s, row) in self.seeds.iter().zip(&self.values) {
            write!(f, "{s:<14}")?;
            for v in row {
                write!(f, "{v:>18.3}")?;
            }
            writeln!(f)?;
        }
        write!(f, "{:<14}", "Mean±Std.dev")?;
        for (m, s) in self.mean.iter().zip(&self.std_dev) {
            write!(f, "{:>18}", format!("{m:.3}±{s:.3}"))?;
        }
        writeln!(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::{simulate_binary, simulate_ordered, DgpConfig};

    fn binary_data() -> Dataset {
        simulate_binary(&DgpConfig::new(1000, vec![2.0; 3], 1).with_proportions(vec![0.8, 0.2]))
            .unwrap()
            .data
    }

    #[test]
    fn ratio_resolution() {
        let mut p = RatioPlan {
            method: Method::CtganRu,
            ratio: vec![1.0, 1.0],
            ru_ratio: Some(vec![2.0, 1.0]),
            k_neighbors: 5,
            ctgan: CtganConfig::default(),
        };
        let plan = p.resolve(&[109_899, 57], 0).unwrap();
        assert_eq!(plan.ru_targets, Some(vec![114, 57]));
        assert_eq!(plan.targets, vec![114, 114]);
        p.method = Method::Ru;
        assert_eq!(p.resolve(&[109_899, 57], 0).unwrap().targets, vec![57, 57]);
        p.method = Method::SmoteNc;
        assert_eq!(p.resolve(&[109_899, 57], 0).unwrap().targets, vec![109_899, 109_899]);
        p.method = Method::CtganRu;
        p.ratio = vec![1.0, 1.0, 1.0];
        p.ru_ratio = Some(vec![2.0, 1.0, 1.0]);
        let plan = p.resolve(&[317, 63, 63], 0).unwrap();
        assert_eq!(plan.targets, vec![126, 126, 126]);
    }

    #[test]
    fn binary_pipeline() {
        let d = binary_data();
        let out = run_pipeline(&d, &PipelineConfig::default(), 3).unwrap();
        assert_eq!(out.train_counts.iter().sum::<usize>(), 700);
        assert_eq!(out.test_counts.iter().sum::<usize>(), 300);
        assert!(out.evaluation.g_mean() > 0.5);
        let cfg = PipelineConfig {
            rebalance: Some(RatioPlan {
                method: Method::Ru,
                ratio: vec![1.0, 1.0],
                ru_ratio: None,
                k_neighbors: 5,
                ctgan: CtganConfig::default(),
            }),
            ..PipelineConfig::default()
        };
        let out = run_pipeline(&d, &cfg, 3).unwrap();
        assert_eq!(out.fitted_counts[0], out.fitted_counts[1]);
    }

    #[test]
    fn ordered_pipeline() {
        let d = simulate_ordered(&DgpConfig::new(900, vec![1.0; 3], 2).with_proportions(vec![0.5, 0.3, 0.2]), 3)
            .unwrap()
            .data;
        let out = run_pipeline(&d, &PipelineConfig::default(), 1).unwrap();
        assert_eq!(out.evaluation.metrics().len(), 7);
    }

    #[test]
    fn sweep_table() {
        let s = seeds_sweep(&binary_data(), &PipelineConfig::default(), &[1, 2, 3, 4]).unwrap();
        assert_eq!(s.values.len(), 4);
        let csv = s.to_csv();
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.lines().last().unwrap().starts_with("Mean±Std.dev,"));
        assert!(s.to_string().contains('±'));
        let again = seeds_sweep(&binary_data(), &PipelineConfig::default(), &[1, 2, 3, 4]).unwrap();
        assert_eq!(s.values, again.values);
    }
}
