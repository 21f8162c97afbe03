use std::sync::Arc;

use log::warn;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::logistic_cdf;
use crate::neural::sigmoid;
use crate::rng::{self, StreamRng};
use crate::tabular::{ColumnSpec, DataSchema, Dataset, Value};

/// Probability of the dummy regressor `x3`.
pub const X3_PROBABILITY: f64 = 0.2;
pub const PILOT_ROWS: usize = 100_000;
const MAX_REDRAWS: usize = 20;

/// Data-generating process with regressors `x1, x2 ~ N(0,1)` and
/// `x3 ~ Bernoulli(0.2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpConfig {
    pub n: usize,
    #[serde(default = "default_beta")]
    pub beta: Vec<f64>,
    /// Binary intercept; calibrated from `proportions` when absent.
    #[serde(default)]
    pub intercept: Option<f64>,
    /// Ordered cut points; calibrated from `proportions` when absent.
    #[serde(default)]
    pub thresholds: Option<Vec<f64>>,
    /// Target class shares, lowest class first.
    #[serde(default)]
    pub proportions: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
}

fn default_beta() -> Vec<f64> {
    vec![2.0, 2.0, 2.0]
}

/// Simulated rows plus the true class probabilities (one column per class).
#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: Dataset,
    pub true_probabilities: Array2<f64>,
}

impl DgpConfig {
    pub fn new(n: usize, beta: Vec<f64>, seed: u64) -> Self {
        Self {
            n,
            beta,
            intercept: None,
            thresholds: None,
            proportions: None,
            seed,
        }
    }

    pub fn with_proportions(mut self, p: Vec<f64>) -> Self {
        self.proportions = Some(p);
        self
    }

    fn validate(&self, classes: usize) -> Result<()> {
        if self.n < 100 {
            return Err(Error::InvalidArgument(format!("n = {} is below 100", self.n)));
        }
        if self.beta.len() != 3 || self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument("beta needs three finite slopes (x1, x2, x3)".into()));
        }
        if let Some(p) = &self.proportions {
            if p.len() != classes || p.iter().any(|&v| !(v > 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "proportions must be {classes} positive shares summing to 1"
                )));
            }
        }
        Ok(())
    }

    fn pilot_eta(&self) -> Vec<f64> {
        let mut r = rng::substream(self.seed, "mc.pilot");
        (0..PILOT_ROWS).map(|_| eta(&self.beta, &draw_x(&mut r))).collect()
    }

    /// Intercept whose mean model probability over a pilot sample equals the
    /// target share of class 1.
    pub fn calibrate_binary(&self) -> Result<f64> {
        self.validate(2)?;
        if let Some(b0) = self.intercept {
            return Ok(b0);
        }
        let p = self
            .proportions
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("binary DGP needs an intercept or proportions".into()))?;
        let etas = self.pilot_eta();
        Ok(bisect(|b0| etas.iter().map(|e| sigmoid(b0 + e)).sum::<f64>() / etas.len() as f64 - p[1]))
    }

    /// Cut points whose pilot-average cumulative probabilities match the
    /// target shares.
    pub fn calibrate_ordered(&self, m: usize) -> Result<Vec<f64>> {
        if m < 3 {
            return Err(Error::InvalidArgument("ordered DGP needs at least 3 classes".into()));
        }
        self.validate(m)?;
        if let Some(t) = &self.thresholds {
            if t.len() != m - 1 || t.windows(2).any(|w| !(w[0] < w[1])) || t.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("need {} strictly increasing thresholds", m - 1)));
            }
            return Ok(t.clone());
        }
        let p = self
            .proportions
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("ordered DGP needs thresholds or proportions".into()))?;
        let etas = self.pilot_eta();
        let mut cum = 0.0;
        let cuts: Vec<f64> = p[..m - 1]
            .iter()
            .map(|share| {
                cum += share;
                let target = cum;
                bisect(|g| etas.iter().map(|e| logistic_cdf(g - e)).sum::<f64>() / etas.len() as f64 - target)
            })
            .collect();
        if cuts.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::NonFinite("calibrated thresholds are not increasing".into()));
        }
        Ok(cuts)
    }
}

fn bisect(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn draw_x(r: &mut StreamRng) -> [f64; 3] {
    let x1: f64 = r.sample(StandardNormal);
    let x2: f64 = r.sample(StandardNormal);
    let x3 = if r.random::<f64>() < X3_PROBABILITY { 1.0 } else { 0.0 };
    [x1, x2, x3]
}

fn eta(beta: &[f64], x: &[f64; 3]) -> f64 {
    beta.iter().zip(x).map(|(b, v)| b * v).sum()
}

/// Schema shared by all simulated data: `x1, x2, x3, y`.
pub fn simulation_schema(classes: usize) -> Arc<DataSchema> {
    let labels: Vec<String> = (0..classes).map(|c| c.to_string()).collect();
    Arc::new(
        DataSchema::new(
            vec![
                ColumnSpec::continuous("x1"),
                ColumnSpec::continuous("x2"),
                ColumnSpec::discrete("x3", ["0", "1"]),
                ColumnSpec::discrete("y", labels),
            ],
            "y",
        )
        .expect("fixed schema is valid"),
    )
}

fn simulate(cfg: &DgpConfig, classes: usize, probs: impl Fn(f64) -> Vec<f64>) -> Result<Simulated> {
    let schema = simulation_schema(classes);
    for attempt in 0..MAX_REDRAWS {
        let mut r = rng::substream(cfg.seed, &format!("mc.simulate.{attempt}"));
        let mut rows = Vec::with_capacity(cfg.n);
        let mut truth = Array2::zeros((cfg.n, classes));
        let mut seen = vec![0usize; classes];
        for i in 0..cfg.n {
            let x = draw_x(&mut r);
            let p = probs(eta(&cfg.beta, &x));
            let u: f64 = r.random();
            let mut acc = 0.0;
            let mut y = classes - 1;
            for (k, &pk) in p.iter().enumerate() {
                acc += pk;
                if u < acc {
                    y = k;
                    break;
                }
            }
            seen[y] += 1;
            for (k, &pk) in p.iter().enumerate() {
                truth[(i, k)] = pk;
            }
            rows.push(vec![Value::Real(x[0]), Value::Real(x[1]), Value::Category(x[2] as usize), Value::Category(y)]);
        }
        if seen.iter().all(|&c| c > 0) {
            return Ok(Simulated {
                data: Dataset::from_rows(Arc::clone(&schema), &rows)?,
                true_probabilities: truth,
            });
        }
        warn!("seed {}: draw {attempt} missed a class ({seen:?}); redrawing", cfg.seed);
    }
    Err(Error::InsufficientData(format!(
        "seed {}: every draw left a class empty",
        cfg.seed
    )))
}

/// Binary logit rows: `P(y = 1 | x) = σ(β₀ + x′β)`.
pub fn simulate_binary(cfg: &DgpConfig) -> Result<Simulated> {
    let b0 = cfg.calibrate_binary()?;
    simulate(cfg, 2, |e| {
        let p = sigmoid(b0 + e);
        vec![1.0 - p, p]
    })
}

/// Ordered logit rows with `m` classes: `y* = x′β + ε`, ε standard logistic.
pub fn simulate_ordered(cfg: &DgpConfig, m: usize) -> Result<Simulated> {
    let cuts = cfg.calibrate_ordered(m)?;
    simulate(cfg, m, |e| {
        let mut prev = 0.0;
        (0..m)
            .map(|k| {
                let upper = if k + 1 < m { logistic_cdf(cuts[k] - e) } else { 1.0 };
                let p = upper - prev;
                prev = upper;
                p
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn share(d: &Dataset, class: usize) -> f64 {
        d.class_counts()[class] as f64 / d.n_rows() as f64
    }

    #[test]
    fn symmetric_binary() {
        let mut cfg = DgpConfig::new(10_000, vec![0.0; 3], 1);
        cfg.intercept = Some(0.0);
        let s = simulate_binary(&cfg).unwrap();
        assert!((share(&s.data, 1) - 0.5).abs() < 0.02);
        let x3 = s.data.category_column(2);
        let mean = x3.iter().sum::<usize>() as f64 / x3.len() as f64;
        assert!((mean - 0.2).abs() < 0.02);
    }

    #[test]
    fn calibrated_prevalence() {
        let cfg = DgpConfig::new(4000, vec![2.0; 3], 2).with_proportions(vec![5.0 / 6.0, 1.0 / 6.0]);
        let s = simulate_binary(&cfg).unwrap();
        assert!((share(&s.data, 1) - 1.0 / 6.0).abs() < 0.02, "{}", share(&s.data, 1));
        for row in s.true_probabilities.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ordered_quantile_thresholds() {
        let mut cfg = DgpConfig::new(10_000, vec![0.0; 3], 3);
        // logistic quantiles of 1/3 and 2/3
        cfg.thresholds = Some(vec![-(2f64.ln()), 2f64.ln()]);
        let s = simulate_ordered(&cfg, 3).unwrap();
        for c in 0..3 {
            assert!((share(&s.data, c) - 1.0 / 3.0).abs() < 0.02);
        }
        for row in s.true_probabilities.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ordered_calibration_to_three_class_design() {
        let total = 317.0 + 63.0 + 63.0;
        let cfg = DgpConfig::new(6000, vec![2.0; 3], 4).with_proportions(vec![317.0 / total, 63.0 / total, 63.0 / total]);
        let cuts = cfg.calibrate_ordered(3).unwrap();
        assert!(cuts[0] < cuts[1]);
        let s = simulate_ordered(&cfg, 3).unwrap();
        for (c, want) in [317.0, 63.0, 63.0].iter().enumerate() {
            assert!((share(&s.data, c) - want / total).abs() < 0.03);
        }
    }

    #[test]
    fn deterministic_and_validated() {
        let cfg = DgpConfig::new(500, vec![1.0; 3], 5).with_proportions(vec![0.5, 0.5]);
        let a = simulate_binary(&cfg).unwrap();
        let b = simulate_binary(&cfg).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.true_probabilities, b.true_probabilities);
        assert!(simulate_binary(&DgpConfig::new(50, vec![1.0; 3], 5).with_proportions(vec![0.5, 0.5])).is_err());
        assert!(simulate_binary(&DgpConfig::new(500, vec![1.0; 2], 5).with_proportions(vec![0.5, 0.5])).is_err());
        assert!(simulate_binary(&DgpConfig::new(500, vec![1.0; 3], 5)).is_err());
        assert!(simulate_ordered(&cfg, 3).is_err());
    }
}
