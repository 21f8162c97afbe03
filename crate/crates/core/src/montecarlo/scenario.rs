use log::info;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctgan::{CtganConfig, CtganModel};
use crate::error::{Error, Result};
use crate::glm::{fit_binary_logit, fit_ordered_logit, DesignMatrix};
use crate::resampling::{oversample_with_model, random_undersample};
use crate::rng;
use crate::tabular::Dataset;

use super::dgp::{simulate_binary, simulate_ordered, DgpConfig, Simulated};
use super::summary::{ProbabilityRecord, ReplicationFailure, ReplicationRecord, ReplicationSummary};

/// Share of failed replications above which a run is rejected.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Binary,
    Ordered,
}

/// How the observed sample is rebalanced before fitting. Each entry of
/// `Scenario::arms` gives a target class ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Rebalance {
    /// Fit the observed sample as is (a single arm).
    None,
    /// Under-sample the observed sample to each arm's ratio.
    Ru,
    /// Under-sample to `ru_ratio`, train one CTGAN on that set, then build
    /// each arm from real rows topped up with generated ones.
    CtganRu {
        ru_ratio: Vec<f64>,
        #[serde(default = "CtganConfig::desk")]
        ctgan: CtganConfig,
    },
}

fn default_classes() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub model: ModelKind,
    #[serde(default = "default_classes")]
    pub classes: usize,
    pub dgp: DgpConfig,
    /// Case-control sampling of the simulated population to this class ratio.
    #[serde(default)]
    pub observed_ratio: Option<Vec<f64>>,
    #[serde(default = "default_rebalance")]
    pub rebalance: Rebalance,
    #[serde(default)]
    pub arms: Vec<Vec<f64>>,
    /// Keep per-row probabilities in memory (not written to disk).
    #[serde(default)]
    pub keep_probabilities: bool,
}

fn default_rebalance() -> Rebalance {
    Rebalance::None
}

/// True parameters used for every replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub beta: Vec<f64>,
    pub intercept: Option<f64>,
    pub thresholds: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub scenario: String,
    pub replications: usize,
    pub base_seed: u64,
    pub calibration: Calibration,
    pub arms: Vec<ReplicationSummary>,
}

/// Largest class counts in proportion `ratio` that fit inside `available`.
pub fn counts_for_ratio(available: &[usize], ratio: &[f64]) -> Result<Vec<usize>> {
    if ratio.len() != available.len() || ratio.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "ratio {ratio:?} does not give a positive weight to each of {} classes",
            available.len()
        )));
    }
    let unit = available
        .iter()
        .zip(ratio)
        .map(|(&a, &r)| a as f64 / r)
        .fold(f64::INFINITY, f64::min);
    let counts: Vec<usize> = ratio.iter().map(|&r| (r * unit + 1e-9).floor() as usize).collect();
    if counts.contains(&0) {
        return Err(Error::InsufficientData(format!(
            "ratio {ratio:?} leaves a class empty given counts {available:?}"
        )));
    }
    Ok(counts)
}

pub fn ratio_label(ratio: &[f64]) -> String {
    ratio.iter().map(|r| format!("{r}")).collect::<Vec<_>>().join(":")
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        match self.model {
            ModelKind::Binary if self.classes != 2 => {
                return Err(Error::InvalidArgument("binary scenarios have 2 classes".into()))
            }
            ModelKind::Ordered if self.classes < 3 => {
                return Err(Error::InvalidArgument("ordered scenarios need at least 3 classes".into()))
            }
            _ => {}
        }
        let check = |r: &[f64], what: &str| {
            if r.len() != self.classes || r.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                Err(Error::InvalidArgument(format!("{what} needs {} positive entries", self.classes)))
            } else {
                Ok(())
            }
        };
        if let Some(r) = &self.observed_ratio {
            check(r, "observed_ratio")?;
        }
        match &self.rebalance {
            Rebalance::None => {
                if !self.arms.is_empty() {
                    return Err(Error::InvalidArgument("arms need a rebalance method".into()));
                }
            }
            Rebalance::Ru | Rebalance::CtganRu { .. } => {
                if self.arms.is_empty() {
                    return Err(Error::InvalidArgument("rebalancing scenarios need at least one arm".into()));
                }
                for a in &self.arms {
                    check(a, "arm")?;
                }
            }
        }
        if let Rebalance::CtganRu { ru_ratio, ctgan } = &self.rebalance {
            check(ru_ratio, "ru_ratio")?;
            ctgan.validate()?;
        }
        Ok(())
    }

    pub fn arm_labels(&self) -> Vec<String> {
        if self.arms.is_empty() {
            vec!["raw".to_string()]
        } else {
            self.arms.iter().map(|a| ratio_label(a)).collect()
        }
    }

    pub fn calibrate(&self, seed: u64) -> Result<Calibration> {
        let mut dgp = self.dgp.clone();
        dgp.seed = seed;
        Ok(match self.model {
            ModelKind::Binary => Calibration {
                beta: dgp.beta.clone(),
                intercept: Some(dgp.calibrate_binary()?),
                thresholds: None,
            },
            ModelKind::Ordered => Calibration {
                beta: dgp.beta.clone(),
                intercept: None,
                thresholds: Some(dgp.calibrate_ordered(self.classes)?),
            },
        })
    }
}

struct Fitted {
    names: Vec<String>,
    estimates: Vec<f64>,
    std_errors: Vec<f64>,
    probabilities: Array2<f64>,
}

fn fit_and_predict(model: ModelKind, classes: usize, train: &Dataset, population: &Dataset) -> Result<Fitted> {
    match model {
        ModelKind::Binary => {
            let fit = fit_binary_logit(&DesignMatrix::from_dataset(train, true)?)?;
            let p = fit.predict_design(&DesignMatrix::from_dataset(population, true)?)?;
            let mut probs = Array2::zeros((p.len(), 2));
            for (i, v) in p.iter().enumerate() {
                probs[(i, 0)] = 1.0 - v;
                probs[(i, 1)] = *v;
            }
            Ok(Fitted {
                std_errors: fit.std_errors(),
                names: fit.names,
                estimates: fit.coefficients,
                probabilities: probs,
            })
        }
        ModelKind::Ordered => {
            let fit = fit_ordered_logit(&DesignMatrix::from_dataset(train, false)?, classes)?;
            let p = fit.predict_design(&DesignMatrix::from_dataset(population, false)?)?;
            let mut probs = Array2::zeros((p.len(), classes));
            for (i, row) in p.iter().enumerate() {
                for (k, v) in row.iter().enumerate() {
                    probs[(i, k)] = *v;
                }
            }
            let mut names = fit.names.clone();
            names.extend((0..fit.thresholds.len()).map(|k| format!("threshold {}|{}", k, k + 1)));
            let mut estimates = fit.slopes.clone();
            estimates.extend(&fit.thresholds);
            Ok(Fitted {
                std_errors: fit.std_errors(),
                names,
                estimates,
                probabilities: probs,
            })
        }
    }
}

type ArmOutcome = Result<(Vec<String>, ReplicationRecord, ProbabilityRecord)>;

fn replicate(s: &Scenario, cal: &Calibration, r: usize, seed: u64) -> Vec<ArmOutcome> {
    let n_arms = s.arm_labels().len();
    let outcome = (|| -> Result<Vec<ArmOutcome>> {
        let mut dgp = s.dgp.clone();
        dgp.seed = seed;
        dgp.intercept = cal.intercept;
        dgp.thresholds = cal.thresholds.clone();
        let Simulated { data: population, true_probabilities } = match s.model {
            ModelKind::Binary => simulate_binary(&dgp)?,
            ModelKind::Ordered => simulate_ordered(&dgp, s.classes)?,
        };
        let observed = match &s.observed_ratio {
            Some(ratio) => {
                let counts = counts_for_ratio(&population.class_counts(), ratio)?;
                random_undersample(&population, &counts, rng::derive_seed(seed, "mc.observe"))?
            }
            None => population.clone(),
        };
        let finish = |train: Result<Dataset>| -> ArmOutcome {
            let train = train?;
            let f = fit_and_predict(s.model, s.classes, &train, &population)?;
            let probs = ProbabilityRecord {
                truth: true_probabilities.clone(),
                estimate: f.probabilities,
            };
            let record = ReplicationRecord {
                replication: r,
                seed,
                train_counts: train.class_counts(),
                estimates: f.estimates,
                std_errors: f.std_errors,
                mse: probs.mse()?,
            };
            Ok((f.names, record, probs))
        };
        let resample_seed = rng::derive_seed(seed, "resample");
        Ok(match &s.rebalance {
            Rebalance::None => vec![finish(Ok(observed))],
            Rebalance::Ru => s
                .arms
                .iter()
                .map(|a| {
                    finish(
                        counts_for_ratio(&observed.class_counts(), a)
                            .and_then(|t| random_undersample(&observed, &t, resample_seed)),
                    )
                })
                .collect(),
            Rebalance::CtganRu { ru_ratio, ctgan } => {
                let obs_counts = observed.class_counts();
                let ru = counts_for_ratio(&obs_counts, ru_ratio)?;
                let mut shuffle = rng::substream(resample_seed, "mc.order");
                let orders: Vec<Vec<usize>> = (0..s.classes)
                    .map(|c| {
                        let mut rows = observed.rows_of_class(c);
                        rows.shuffle(&mut shuffle);
                        rows
                    })
                    .collect();
                let take = |counts: &[usize]| {
                    let mut idx: Vec<usize> =
                        orders.iter().zip(counts).flat_map(|(o, &k)| o[..k.min(o.len())].iter().copied()).collect();
                    idx.sort_unstable();
                    observed.select(&idx)
                };
                let reduced = take(&ru);
                let model = CtganModel::train(&reduced, &ctgan.clone().with_seed(rng::derive_seed(seed, "train")))?;
                let top = *ru.iter().max().expect("classes");
                s.arms
                    .iter()
                    .map(|a| {
                        let low = a.iter().copied().fold(f64::INFINITY, f64::min);
                        let target: Vec<usize> = a.iter().map(|v| (v / low * top as f64).round() as usize).collect();
                        let base = take(&target);
                        finish(oversample_with_model(&base, &model, &target, rng::derive_seed(seed, "generate")))
                    })
                    .collect()
            }
        })
    })();
    match outcome {
        Ok(v) => v,
        Err(e) => {
            let msg = e.to_string();
            (0..n_arms).map(|_| Err(Error::InvalidArgument(msg.clone()))).collect()
        }
    }
}

/// Run `replications` independent replications of every arm. Replication
/// `r` simulates with seed `base_seed + r`.
pub fn run_sweep(s: &Scenario, replications: usize, base_seed: u64) -> Result<SweepResult> {
    s.validate()?;
    if replications == 0 {
        return Err(Error::InvalidArgument("need at least one replication".into()));
    }
    let cal = s.calibrate(base_seed)?;
    info!("{}: calibrated {:?}", s.name, cal);
    let outcomes: Vec<Vec<ArmOutcome>> = (0..replications)
        .into_par_iter()
        .map(|r| replicate(s, &cal, r, base_seed.wrapping_add(r as u64)))
        .collect();
    let labels = s.arm_labels();
    let mut arms = Vec::with_capacity(labels.len());
    for (a, label) in labels.iter().enumerate() {
        let mut names = None;
        let mut records = Vec::new();
        let mut probs = Vec::new();
        let mut failures = Vec::new();
        for (r, per_arm) in outcomes.iter().enumerate() {
            match &per_arm[a] {
                Ok((n, rec, p)) => {
                    names.get_or_insert_with(|| n.clone());
                    records.push(rec.clone());
                    if s.keep_probabilities {
                        probs.push(p.clone());
                    }
                }
                Err(e) => failures.push(ReplicationFailure {
                    replication: r,
                    seed: base_seed.wrapping_add(r as u64),
                    message: e.to_string(),
                }),
            }
        }
        if failures.len() as f64 > MAX_FAILURE_RATE * replications as f64 || records.is_empty() {
            return Err(Error::TooManyFailures {
                failed: failures.len(),
                total: replications,
                first: format!("{} arm {label}: {}", s.name, failures[0].message),
            });
        }
        let names = names.expect("at least one record");
        let truth = match s.model {
            ModelKind::Binary => std::iter::once(cal.intercept.expect("binary")).chain(cal.beta.iter().copied()).collect(),
            ModelKind::Ordered => cal.beta.iter().chain(cal.thresholds.as_ref().expect("ordered")).copied().collect(),
        };
        arms.push(ReplicationSummary::assemble(&s.name, label, names, truth, records, failures, probs)?);
    }
    Ok(SweepResult {
        scenario: s.name.clone(),
        replications,
        base_seed,
        calibration: cal,
        arms,
    })
}

/// Single-arm form of [`run_sweep`].
pub fn run_replications(s: &Scenario, replications: usize, base_seed: u64) -> Result<ReplicationSummary> {
    let mut out = run_sweep(s, replications, base_seed)?;
    if out.arms.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "scenario {} has {} arms; use run_sweep",
            s.name,
            out.arms.len()
        )));
    }
    Ok(out.arms.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::amse;

    fn oracle(n: usize) -> Scenario {
        Scenario {
            name: "oracle".into(),
            model: ModelKind::Binary,
            classes: 2,
            dgp: DgpConfig::new(n, vec![2.0; 3], 0).with_proportions(vec![0.5, 0.5]),
            observed_ratio: None,
            rebalance: Rebalance::None,
            arms: vec![],
            keep_probabilities: true,
        }
    }

    #[test]
    fn counts_for_ratio_cases() {
        assert_eq!(counts_for_ratio(&[2000, 2000], &[20.0, 1.0]).unwrap(), vec![2000, 100]);
        assert_eq!(counts_for_ratio(&[2000, 100], &[2.0, 1.0]).unwrap(), vec![200, 100]);
        assert_eq!(counts_for_ratio(&[317, 63, 63], &[1.0, 1.0, 1.0]).unwrap(), vec![63, 63, 63]);
        assert!(counts_for_ratio(&[10, 1], &[100.0, 1.0]).is_err());
        assert!(counts_for_ratio(&[10, 1], &[1.0]).is_err());
    }

    #[test]
    fn single_replication_amse() {
        let s = run_replications(&oracle(400), 1, 3).unwrap();
        assert_eq!(s.records.len(), 1);
        assert!((s.amse - s.records[0].mse).abs() < 1e-15);
        assert!((s.amse - amse(&s.probabilities).unwrap()).abs() < 1e-15);
        assert_eq!(s.names, vec!["(Intercept)", "x1", "x2", "x3[1]"]);
    }

    #[test]
    fn deterministic_in_seed() {
        let a = run_replications(&oracle(300), 4, 11).unwrap();
        let b = run_replications(&oracle(300), 4, 11).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.boxes, b.boxes);
        let c = run_replications(&oracle(300), 4, 12).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn ru_arms_and_ordered() {
        let mut s = oracle(600);
        s.keep_probabilities = false;
        s.rebalance = Rebalance::Ru;
        s.arms = vec![vec![1.0, 1.0], vec![2.0, 1.0]];
        let out = run_sweep(&s, 2, 5).unwrap();
        assert_eq!(out.arms.len(), 2);
        assert_eq!(out.arms[1].arm, "2:1");
        let c = &out.arms[1].records[0].train_counts;
        assert_eq!(c[0], 2 * c[1]);

        let ordered = Scenario {
            name: "ordered".into(),
            model: ModelKind::Ordered,
            classes: 3,
            dgp: DgpConfig::new(900, vec![1.0; 3], 0).with_proportions(vec![0.5, 0.3, 0.2]),
            observed_ratio: None,
            rebalance: Rebalance::None,
            arms: vec![],
            keep_probabilities: false,
        };
        let out = run_replications(&ordered, 2, 1).unwrap();
        assert_eq!(out.names.len(), 5);
        assert_eq!(out.truth.len(), 5);
    }

    #[test]
    fn ctgan_ru_arms() {
        let s = Scenario {
            name: "mixed".into(),
            model: ModelKind::Binary,
            classes: 2,
            dgp: DgpConfig::new(400, vec![2.0; 3], 0).with_proportions(vec![0.5, 0.5]),
            observed_ratio: Some(vec![4.0, 1.0]),
            rebalance: Rebalance::CtganRu {
                ru_ratio: vec![2.0, 1.0],
                ctgan: CtganConfig {
                    epochs: 1,
                    batch_size: 20,
                    pac: 2,
                    z_dim: 4,
                    generator_residual: vec![8],
                    generator_tail: vec![8, 8],
                    discriminator_dims: vec![8],
                    max_modes: 2,
                    ..CtganConfig::default()
                },
            },
            arms: vec![vec![1.0, 1.0], vec![2.0, 1.0]],
            keep_probabilities: false,
        };
        let out = run_sweep(&s, 2, 9).unwrap();
        let m0 = out.arms[1].records[0].train_counts[1] / 2;
        assert_eq!(out.arms[0].records[0].train_counts, vec![2 * m0, 2 * m0]);
        assert_eq!(out.arms[1].records[0].train_counts, vec![4 * m0, 2 * m0]);
    }

    #[test]
    fn scenario_validation_and_toml() {
        let text = r#"
name = "sweep"
model = "binary"
arms = [[1, 1], [10, 1]]
observed_ratio = [20, 1]

[dgp]
n = 4000
proportions = [0.5, 0.5]

[rebalance]
method = "ctgan_ru"
ru_ratio = [2, 1]
"#;
        let s: Scenario = toml::from_str(text).unwrap();
        s.validate().unwrap();
        assert_eq!(s.dgp.beta, vec![2.0; 3]);
        assert!(matches!(&s.rebalance, Rebalance::CtganRu { ctgan, .. } if *ctgan == CtganConfig::desk()));
        let mut bad = s.clone();
        bad.arms = vec![vec![1.0]];
        assert!(bad.validate().is_err());
        let mut bad = s.clone();
        bad.rebalance = Rebalance::None;
        assert!(bad.validate().is_err());
    }
}
