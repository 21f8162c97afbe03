use std::fmt;

use statrs::function::erf::erfc;

use super::binary::LogitFit;
use super::ordered::OrderedFit;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelFit {
    Binary(LogitFit),
    Ordered(OrderedFit),
}

impl From<LogitFit> for ModelFit {
    fn from(f: LogitFit) -> Self {
        ModelFit::Binary(f)
    }
}

impl From<OrderedFit> for ModelFit {
    fn from(f: OrderedFit) -> Self {
        ModelFit::Ordered(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
    pub stars: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceReport {
    pub rows: Vec<ReportRow>,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
    /// McFadden `1 − ℓ/ℓ₀`; reported for binary fits.
    pub pseudo_r2: Option<f64>,
    pub n_obs: usize,
}

/// Significance marks: `***` below 0.01, `**` below 0.05, `*` below 0.1.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

fn row(name: &str, coefficient: f64, std_error: f64) -> ReportRow {
    let z = coefficient / std_error;
    // two-sided normal tail
    let p_value = erfc(z.abs() / std::f64::consts::SQRT_2);
    ReportRow {
        name: name.to_string(),
        coefficient,
        std_error,
        z,
        p_value,
        stars: stars(p_value),
    }
}

pub fn inference_report(fit: &ModelFit) -> Result<InferenceReport> {
    match fit {
        ModelFit::Binary(f) => {
            if !f.converged {
                return Err(Error::NotConverged { iterations: f.iterations });
            }
            let se = f.std_errors();
            Ok(InferenceReport {
                rows: f
                    .names
                    .iter()
                    .zip(&f.coefficients)
                    .zip(&se)
                    .map(|((n, &b), &s)| row(n, b, s))
                    .collect(),
                log_likelihood: f.log_likelihood,
                null_log_likelihood: f.null_log_likelihood,
                pseudo_r2: Some(f.pseudo_r2()),
                n_obs: f.n_obs,
            })
        }
        ModelFit::Ordered(f) => {
            if !f.converged {
                return Err(Error::NotConverged { iterations: f.iterations });
            }
            let se = f.std_errors();
            let p = f.slopes.len();
            let mut rows: Vec<ReportRow> = f
                .names
                .iter()
                .zip(&f.slopes)
                .zip(&se)
                .map(|((n, &b), &s)| row(n, b, s))
                .collect();
            for (k, &g) in f.thresholds.iter().enumerate() {
                rows.push(row(&format!("threshold {}|{}", k, k + 1), g, se[p + k]));
            }
            Ok(InferenceReport {
                rows,
                log_likelihood: f.log_likelihood,
                null_log_likelihood: f.null_log_likelihood,
                pseudo_r2: None,
                n_obs: f.n_obs,
            })
        }
    }
}

impl InferenceReport {
    /// `name,coefficient,std_error,z,p_value,stars` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,coefficient,std_error,z,p_value,stars\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                quote(&r.name),
                r.coefficient,
                r.std_error,
                r.z,
                r.p_value,
                r.stars
            ));
        }
        out
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl fmt::Display for InferenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(8).max(8);
        writeln!(f, "{:<w$} {:>11} {:>10} {:>8} {:>9}", "Variable", "Coef.", "Std.Err.", "z", "P>|z|")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<w$} {:>11.4} {:>10.4} {:>8.3} {:>9.4} {}",
                r.name, r.coefficient, r.std_error, r.z, r.p_value, r.stars
            )?;
        }
        writeln!(f, "Observations: {}", self.n_obs)?;
        writeln!(f, "Log-likelihood: {:.4}  (null {:.4})", self.log_likelihood, self.null_log_likelihood)?;
        if let Some(r2) = self.pseudo_r2 {
            writeln!(f, "Pseudo R-squ. (McFadden): {r2:.4}")?;
        }
        write!(f, "Significance: *** p < 0.01, ** p < 0.05, * p < 0.1")
    }
}
