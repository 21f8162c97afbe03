use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, Axis};

use super::design::DesignMatrix;
use super::linalg::{first_dependent_column, spd_inverse, spd_solve, to_na};
use crate::error::{Error, Result};
use crate::neural::sigmoid;

/// Coefficient magnitude treated as divergence toward separation.
pub const SEPARATION_LIMIT: f64 = 25.0;
const MAX_ITER: usize = 100;
const SCORE_TOL: f64 = 1e-8;
const STEP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LogitFit {
    pub names: Vec<String>,
    /// Aligned with `names`; the intercept, when present, comes first.
    pub coefficients: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
    /// Log-likelihood after each accepted Newton step, starting point first.
    pub log_likelihood_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub intercept: bool,
    pub n_obs: usize,
}

impl LogitFit {
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.coefficients.len()).map(|i| self.covariance[(i, i)].max(0.0).sqrt()).collect()
    }

    /// McFadden pseudo-R², `1 − ℓ/ℓ₀`.
    pub fn pseudo_r2(&self) -> f64 {
        if self.null_log_likelihood == 0.0 {
            0.0
        } else {
            1.0 - self.log_likelihood / self.null_log_likelihood
        }
    }

    pub fn intercept_value(&self) -> Option<f64> {
        self.intercept.then(|| self.coefficients[0])
    }

    pub fn slopes(&self) -> &[f64] {
        &self.coefficients[usize::from(self.intercept)..]
    }

    /// Linear predictor for a full design row (intercept column included).
    pub fn linear_predictor(&self, design_row: &[f64]) -> f64 {
        self.coefficients.iter().zip(design_row).map(|(b, x)| b * x).sum()
    }

    /// Probabilities of class 1 for every row of a design matrix.
    pub fn predict_design(&self, design: &DesignMatrix) -> Result<Vec<f64>> {
        if design.n_features() != self.coefficients.len() || design.has_intercept() != self.intercept {
            return Err(Error::Shape(format!(
                "design has {} columns, fit has {}",
                design.n_features(),
                self.coefficients.len()
            )));
        }
        let beta = Array1::from(self.coefficients.clone());
        Ok(design.x().dot(&beta).mapv(sigmoid).to_vec())
    }
}

/// `P(y = 1 | x)` for a predictor vector `x` (without the intercept entry).
pub fn predict_prob(fit: &LogitFit, x: &[f64]) -> Result<f64> {
    let slopes = fit.slopes();
    if x.len() != slopes.len() {
        return Err(Error::Shape(format!("{} predictors, fit expects {}", x.len(), slopes.len())));
    }
    let eta = fit.intercept_value().unwrap_or(0.0) + slopes.iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
    Ok(sigmoid(eta))
}

fn log_likelihood(x: &Array2<f64>, y: &[f64], beta: &Array1<f64>) -> f64 {
    x.dot(beta)
        .iter()
        .zip(y)
        .map(|(&eta, &yi)| {
            // y·η − log(1 + e^η)
            let sp = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
            yi * eta - sp
        })
        .sum()
}

fn information(x: &Array2<f64>, p: &Array1<f64>) -> DMatrix<f64> {
    let w = p.mapv(|v| v * (1.0 - v));
    let xw = x * &w.insert_axis(Axis(1));
    to_na(&xw.t().dot(x))
}

/// Newton–Raphson with step halving.
pub fn fit_binary_logit(design: &DesignMatrix) -> Result<LogitFit> {
    if design.n_classes() != 2 {
        return Err(Error::InvalidArgument(format!(
            "binary logit needs 2 classes, response has {}",
            design.n_classes()
        )));
    }
    let counts = design.class_counts();
    if counts.contains(&0) {
        return Err(Error::InsufficientData("both classes must be present".into()));
    }
    let x = design.x();
    let n = x.nrows();
    let y: Vec<f64> = design.y().iter().map(|&v| v as f64).collect();
    let ybar = counts[1] as f64 / n as f64;
    let null_ll = n as f64 * (ybar * ybar.ln() + (1.0 - ybar) * (1.0 - ybar).ln());

    let p = x.ncols();
    let mut beta = Array1::<f64>::zeros(p);
    if design.has_intercept() {
        beta[0] = (ybar / (1.0 - ybar)).ln();
    }
    let y_arr = Array1::from(y.clone());
    let mut ll = log_likelihood(x, &y, &beta);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        let prob = x.dot(&beta).mapv(sigmoid);
        let score = x.t().dot(&(&y_arr - &prob));
        if score.iter().all(|g| g.abs() < SCORE_TOL) {
            converged = true;
            break;
        }
        iterations += 1;
        let info = information(x, &prob);
        let g = DVector::from_vec(score.to_vec());
        let Some(delta) = spd_solve(&info, &g) else {
            let j = first_dependent_column(&info);
            return Err(Error::Singular {
                column: design.names()[j].clone(),
            });
        };
        let delta = Array1::from(delta.as_slice().to_vec());
        let mut t = 1.0;
        let (mut next, mut next_ll);
        loop {
            next = &beta + &(&delta * t);
            next_ll = log_likelihood(x, &y, &next);
            if next_ll >= ll - 1e-12 * ll.abs() || t < 1e-10 {
                break;
            }
            t *= 0.5;
        }
        if let Some((j, &b)) = next.iter().enumerate().find(|(_, b)| b.abs() > SEPARATION_LIMIT) {
            return Err(Error::Separation {
                column: design.names()[j].clone(),
                value: b,
                limit: SEPARATION_LIMIT,
            });
        }
        let step = (&next - &beta).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = beta.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        beta = next;
        ll = next_ll;
        trace.push(ll);
        if ll > -1e-9 * n as f64 {
            // every observation fitted with probability ≈ 1
            let (j, &b) = beta
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .expect("at least one coefficient");
            return Err(Error::Separation {
                column: design.names()[j].clone(),
                value: b,
                limit: SEPARATION_LIMIT,
            });
        }
        if step / scale < STEP_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged { iterations });
    }
    let prob = x.dot(&beta).mapv(sigmoid);
    let info = information(x, &prob);
    let covariance = spd_inverse(&info).ok_or_else(|| Error::Singular {
        column: design.names()[first_dependent_column(&info)].clone(),
    })?;
    Ok(LogitFit {
        names: design.names().to_vec(),
        coefficients: beta.to_vec(),
        covariance,
        log_likelihood: ll,
        null_log_likelihood: null_ll,
        log_likelihood_trace: trace,
        converged,
        iterations,
        intercept: design.has_intercept(),
        n_obs: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn design(x: Array2<f64>, y: Vec<usize>) -> DesignMatrix {
        let names = (0..x.ncols()).map(|j| if j == 0 { "(Intercept)".into() } else { format!("x{j}") }).collect();
        DesignMatrix::new(x, names, y, 2, true).unwrap()
    }

    fn simulate(n: usize, beta: &[f64], seed: u64) -> DesignMatrix {
        let mut r = rng::seeded(seed);
        let p = beta.len();
        let mut x = Array2::zeros((n, p));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            x[(i, 0)] = 1.0;
            for j in 1..p {
                x[(i, j)] = r.sample(StandardNormal);
            }
            let eta: f64 = (0..p).map(|j| x[(i, j)] * beta[j]).sum();
            y.push(usize::from(r.random::<f64>() < sigmoid(eta)));
        }
        design(x, y)
    }

    #[test]
    fn prediction_formula() {
        let fit = LogitFit {
            names: vec!["(Intercept)".into(), "x".into()],
            coefficients: vec![1.0, 1.0],
            covariance: DMatrix::identity(2, 2),
            log_likelihood: -1.0,
            null_log_likelihood: -1.0,
            log_likelihood_trace: vec![],
            converged: true,
            iterations: 1,
            intercept: true,
            n_obs: 10,
        };
        let expect = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((predict_prob(&fit, &[1.0]).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.8808).abs() < 1e-4);
        let zero = LogitFit { coefficients: vec![0.0, 0.0], ..fit.clone() };
        assert_eq!(predict_prob(&zero, &[3.0]).unwrap(), 0.5);
        let low = LogitFit { coefficients: vec![-50.0, 0.0], ..fit.clone() };
        assert!(predict_prob(&low, &[0.0]).unwrap() < 1e-20);
        assert!(predict_prob(&fit, &[1.0, 2.0]).is_err());
        assert_eq!(zero.pseudo_r2(), 0.0);
    }

    #[test]
    fn score_vanishes_at_optimum() {
        let d = simulate(3000, &[-0.5, 1.0, -2.0], 11);
        let fit = fit_binary_logit(&d).unwrap();
        assert!(fit.converged);
        let p = fit.predict_design(&d).unwrap();
        for j in 0..d.n_features() {
            let s: f64 = (0..d.n_rows()).map(|i| (d.y()[i] as f64 - p[i]) * d.x()[(i, j)]).sum();
            assert!(s.abs() < 1e-6, "score {j} = {s}");
        }
        for (b, t) in fit.coefficients.iter().zip([-0.5, 1.0, -2.0]) {
            assert!((b - t).abs() < 0.25);
        }
        assert!(fit.log_likelihood_trace.windows(2).all(|w| w[1] >= w[0]));
        let r2 = fit.pseudo_r2();
        assert!(r2 > 0.0 && r2 < 1.0);
        let c = &fit.covariance;
        assert!((c - c.transpose()).abs().max() < 1e-12);
        assert!(c.clone().cholesky().is_some());
    }

    #[test]
    fn matches_independent_gradient_ascent() {
        // plain gradient ascent on the mean log-likelihood, run to stationarity
        let d = simulate(400, &[0.3, 0.8], 5);
        let fit = fit_binary_logit(&d).unwrap();
        let mut b = [0.0f64; 2];
        for _ in 0..20000 {
            let mut g = [0.0; 2];
            for i in 0..d.n_rows() {
                let xi = [1.0, d.x()[(i, 1)]];
                let p = 1.0 / (1.0 + (-(b[0] * xi[0] + b[1] * xi[1])).exp());
                for j in 0..2 {
                    g[j] += (d.y()[i] as f64 - p) * xi[j] / d.n_rows() as f64;
                }
            }
            b[0] += 0.5 * g[0];
            b[1] += 0.5 * g[1];
        }
        assert!((fit.coefficients[0] - b[0]).abs() < 1e-6);
        assert!((fit.coefficients[1] - b[1]).abs() < 1e-6);
    }

    #[test]
    fn separation_is_reported() {
        let n = 40;
        let x = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { 1.0 } else { (i % 2) as f64 });
        let y = (0..n).map(|i| i % 2).collect();
        let err = fit_binary_logit(&design(x, y)).unwrap_err();
        assert!(matches!(err, Error::Separation { .. }), "{err}");
    }

    #[test]
    fn collinear_column_is_named() {
        let mut r = rng::seeded(1);
        let n = 50;
        let mut x = Array2::zeros((n, 3));
        for i in 0..n {
            x[(i, 0)] = 1.0;
            x[(i, 1)] = r.sample(StandardNormal);
            x[(i, 2)] = 2.0 * x[(i, 1)];
        }
        let y = (0..n).map(|i| i % 2).collect();
        match fit_binary_logit(&design(x, y)).unwrap_err() {
            Error::Singular { column } => assert_eq!(column, "x2"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = Array2::from_shape_fn((5, 1), |_| 1.0);
        assert!(fit_binary_logit(&design(x, vec![0; 5])).is_err());
    }
}
