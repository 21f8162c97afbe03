use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};

/// True and estimated class probabilities of one replication (`N × M`).
#[derive(Debug, Clone)]
pub struct ProbabilityRecord {
    pub truth: Array2<f64>,
    pub estimate: Array2<f64>,
}

impl ProbabilityRecord {
    pub fn mse(&self) -> Result<f64> {
        if self.truth.dim() != self.estimate.dim() || self.truth.is_empty() {
            return Err(Error::Shape(format!(
                "true {:?} vs estimated {:?}",
                self.truth.dim(),
                self.estimate.dim()
            )));
        }
        Ok((&self.truth - &self.estimate).mapv(|d| d * d).mean().expect("non-empty"))
    }
}

/// `(1/R) Σ_r (1/N) Σ_i (1/M) Σ_m (P − P̂)²`.
pub fn amse(records: &[ProbabilityRecord]) -> Result<f64> {
    let first = records
        .first()
        .ok_or_else(|| Error::InsufficientData("no replications".into()))?;
    let mut total = 0.0;
    for r in records {
        if r.truth.dim() != first.truth.dim() {
            return Err(Error::Shape(format!("{:?} vs {:?}", r.truth.dim(), first.truth.dim())));
        }
        total += r.mse()?;
    }
    Ok(total / records.len() as f64)
}

/// Box-plot statistics; whiskers reach the most extreme values within
/// 1.5 IQR of the quartiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxStats {
    pub name: String,
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub lower_whisker: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub upper_whisker: f64,
    pub max: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BoxStats {
    pub fn from_values(name: &str, values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData(format!("no values for {name}")));
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let mean = s.iter().sum::<f64>() / n as f64;
        let std_dev = if n > 1 {
            (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let (q1, median, q3) = (quantile(&s, 0.25), quantile(&s, 0.5), quantile(&s, 0.75));
        let fence = 1.5 * (q3 - q1);
        let lower_whisker = s.iter().find(|&&v| v >= q1 - fence).expect("q1 is inside").min(q1);
        let upper_whisker = s.iter().rev().find(|&&v| v <= q3 + fence).expect("q3 is inside").max(q3);
        Ok(Self {
            name: name.to_string(),
            n,
            mean,
            std_dev,
            min: s[0],
            lower_whisker,
            q1,
            median,
            q3,
            upper_whisker,
            max: s[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub seed: u64,
    /// Class counts of the data the model was fitted on.
    pub train_counts: Vec<usize>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationFailure {
    pub replication: usize,
    pub seed: u64,
    pub message: String,
}

/// Outcome of one arm of a scenario across all replications.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicationSummary {
    pub scenario: String,
    pub arm: String,
    pub names: Vec<String>,
    pub truth: Vec<f64>,
    pub records: Vec<ReplicationRecord>,
    pub failures: Vec<ReplicationFailure>,
    pub boxes: Vec<BoxStats>,
    /// Mean of the per-replication MSEs over successful replications.
    pub amse: f64,
    #[serde(skip)]
    pub probabilities: Vec<ProbabilityRecord>,
}

impl ReplicationSummary {
    pub(crate) fn assemble(
        scenario: &str,
        arm: &str,
        names: Vec<String>,
        truth: Vec<f64>,
        records: Vec<ReplicationRecord>,
        failures: Vec<ReplicationFailure>,
        probabilities: Vec<ProbabilityRecord>,
    ) -> Result<Self> {
        let boxes = names
            .iter()
            .enumerate()
            .map(|(j, name)| BoxStats::from_values(name, &records.iter().map(|r| r.estimates[j]).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?;
        let amse = records.iter().map(|r| r.mse).sum::<f64>() / records.len() as f64;
        Ok(Self {
            scenario: scenario.to_string(),
            arm: arm.to_string(),
            names,
            truth,
            records,
            failures,
            boxes,
            amse,
            probabilities,
        })
    }

    pub fn replications(&self) -> usize {
        self.records.len() + self.failures.len()
    }

    pub fn mean_estimate(&self, name: &str) -> Option<f64> {
        self.boxes.iter().find(|b| b.name == name).map(|b| b.mean)
    }

    /// Replications whose estimate of coefficient `j` lies within `k` standard
    /// errors of the truth.
    pub fn coverage(&self, j: usize, k: f64) -> usize {
        self.records
            .iter()
            .filter(|r| (r.estimates[j] - self.truth[j]).abs() <= k * r.std_errors[j])
            .count()
    }

    pub fn records_csv(&self) -> String {
        let mut out = String::from("scenario,arm,replication,seed,mse,train_counts");
        for n in &self.names {
            out.push_str(&format!(",{n},se_{n}"));
        }
        out.push('\n');
        for r in &self.records {
            let counts: Vec<String> = r.train_counts.iter().map(usize::to_string).collect();
            out.push_str(&format!(
                "{},{},{},{},{:e},{}",
                self.scenario,
                self.arm,
                r.replication,
                r.seed,
                r.mse,
                counts.join(":")
            ));
            for (e, s) in r.estimates.iter().zip(&r.std_errors) {
                out.push_str(&format!(",{e:e},{s:e}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn boxes_csv(&self, header: bool) -> String {
        let mut out = String::new();
        if header {
            out.push_str("scenario,arm,coefficient,truth,n,mean,std_dev,min,lower_whisker,q1,median,q3,upper_whisker,max\n");
        }
        for (b, t) in self.boxes.iter().zip(&self.truth) {
            out.push_str(&format!(
                "{},{},{},{:e},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                self.scenario, self.arm, b.name, t, b.n, b.mean, b.std_dev, b.min, b.lower_whisker, b.q1, b.median, b.q3,
                b.upper_whisker, b.max
            ));
        }
        out
    }
}
