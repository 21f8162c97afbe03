use nalgebra::{DMatrix, DVector};
use ndarray::Array1;

use super::binary::SEPARATION_LIMIT;
use super::design::DesignMatrix;
use super::linalg::{first_dependent_column, spd_inverse, spd_solve};
use crate::error::{Error, Result};
use crate::neural::sigmoid;

const MAX_ITER: usize = 200;
const SCORE_TOL: f64 = 1e-8;
const STEP_TOL: f64 = 1e-10;

/// Logistic CDF.
pub fn logistic_cdf(v: f64) -> f64 {
    sigmoid(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderedFit {
    pub names: Vec<String>,
    pub slopes: Vec<f64>,
    /// Strictly increasing cut points `γ₁ < … < γ_{M−1}`.
    pub thresholds: Vec<f64>,
    /// Covariance of `(slopes, thresholds)` in that order.
    pub covariance: DMatrix<f64>,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
    pub log_likelihood_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub n_obs: usize,
}

impl OrderedFit {
    pub fn n_classes(&self) -> usize {
        self.thresholds.len() + 1
    }

    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.covariance.nrows()).map(|i| self.covariance[(i, i)].max(0.0).sqrt()).collect()
    }

    pub fn pseudo_r2(&self) -> f64 {
        if self.null_log_likelihood == 0.0 {
            0.0
        } else {
            1.0 - self.log_likelihood / self.null_log_likelihood
        }
    }

    /// Class probabilities for every row of a design matrix.
    pub fn predict_design(&self, design: &DesignMatrix) -> Result<Vec<Vec<f64>>> {
        if design.has_intercept() || design.n_features() != self.slopes.len() {
            return Err(Error::Shape(format!(
                "design has {} columns (intercept {}), fit expects {} without intercept",
                design.n_features(),
                design.has_intercept(),
                self.slopes.len()
            )));
        }
        let eta = design.x().dot(&Array1::from(self.slopes.clone()));
        Ok(eta.iter().map(|&e| class_probs(&self.thresholds, e)).collect())
    }
}

fn class_probs(thresholds: &[f64], eta: f64) -> Vec<f64> {
    let m = thresholds.len() + 1;
    let mut out = Vec::with_capacity(m);
    let mut prev = 0.0;
    for k in 0..m {
        let upper = if k + 1 < m { logistic_cdf(thresholds[k] - eta) } else { 1.0 };
        out.push(upper - prev);
        prev = upper;
    }
    out
}

/// `P(Y = m | x) = F(γ_m − x′β) − F(γ_{m−1} − x′β)`.
pub fn ordered_probabilities(fit: &OrderedFit, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != fit.slopes.len() {
        return Err(Error::Shape(format!("{} predictors, fit expects {}", x.len(), fit.slopes.len())));
    }
    let eta: f64 = fit.slopes.iter().zip(x).map(|(b, v)| b * v).sum();
    Ok(class_probs(&fit.thresholds, eta))
}

/// Row contributions in `(β, γ)` coordinates.
struct Derivatives {
    ll: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

fn thresholds_of(theta: &[f64], p: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(theta.len() - p);
    let mut acc = theta[p];
    g.push(acc);
    for &t in &theta[p + 1..] {
        acc += t.exp();
        g.push(acc);
    }
    g
}

/// Log-likelihood, and optionally its gradient and Hessian with respect to `(β, γ)`.
fn evaluate(design: &DesignMatrix, beta: &[f64], gamma: &[f64], derivs: bool) -> Option<Derivatives> {
    let x = design.x();
    let p = beta.len();
    let q = gamma.len();
    let m = q + 1;
    let dim = p + q;
    let eta = x.dot(&Array1::from(beta.to_vec()));
    let mut ll = 0.0;
    let mut grad = DVector::zeros(if derivs { dim } else { 0 });
    let mut hess = DMatrix::zeros(if derivs { dim } else { 0 }, if derivs { dim } else { 0 });
    // accumulate η-blocks as XᵀW X after the loop
    let mut w_eta = vec![0.0; if derivs { x.nrows() } else { 0 }];
    for (i, (&e, &y)) in eta.iter().zip(design.y()).enumerate() {
        // upper cut a = γ_y − η, lower b = γ_{y−1} − η
        let (fa, pa, da) = if y + 1 < m {
            let f = logistic_cdf(gamma[y] - e);
            let d = f * (1.0 - f);
            (f, d, d * (1.0 - 2.0 * f))
        } else {
            (1.0, 0.0, 0.0)
        };
        let (fb, pb, db) = if y > 0 {
            let f = logistic_cdf(gamma[y - 1] - e);
            let d = f * (1.0 - f);
            (f, d, d * (1.0 - 2.0 * f))
        } else {
            (0.0, 0.0, 0.0)
        };
        let dd = fa - fb;
        if !(dd > 0.0) {
            return None;
        }
        ll += dd.ln();
        if !derivs {
            continue;
        }
        // first derivatives of log D
        let l_eta = -(pa - pb) / dd;
        let l_a = pa / dd;
        let l_b = -pb / dd;
        // second derivatives
        let l_eta_eta = (da - db) / dd - l_eta * l_eta;
        let l_aa = da / dd - l_a * l_a;
        let l_bb = -db / dd - l_b * l_b;
        let l_ab = -l_a * l_b;
        let l_eta_a = -da / dd - l_eta * l_a;
        let l_eta_b = db / dd - l_eta * l_b;
        let xi = x.row(i);
        w_eta[i] = l_eta_eta;
        for j in 0..p {
            grad[j] += l_eta * xi[j];
        }
        if y + 1 < m {
            let ka = p + y;
            grad[ka] += l_a;
            hess[(ka, ka)] += l_aa;
            for j in 0..p {
                hess[(j, ka)] += l_eta_a * xi[j];
            }
        }
        if y > 0 {
            let kb = p + y - 1;
            grad[kb] += l_b;
            hess[(kb, kb)] += l_bb;
            for j in 0..p {
                hess[(j, kb)] += l_eta_b * xi[j];
            }
            if y + 1 < m {
                hess[(p + y, kb)] += l_ab;
                hess[(kb, p + y)] += l_ab;
            }
        }
    }
    if derivs {
        let w = Array1::from(w_eta);
        let xw = x * &w.insert_axis(ndarray::Axis(1));
        let xtx = xw.t().dot(x);
        for a in 0..p {
            for b in 0..p {
                hess[(a, b)] = xtx[(a, b)];
            }
            for k in p..dim {
                hess[(k, a)] = hess[(a, k)];
            }
        }
    }
    Some(Derivatives { ll, grad, hess })
}

/// Jacobian `∂(β, γ)/∂θ`.
fn jacobian(theta: &[f64], p: usize) -> DMatrix<f64> {
    let dim = theta.len();
    let mut j = DMatrix::zeros(dim, dim);
    for i in 0..p {
        j[(i, i)] = 1.0;
    }
    for g in p..dim {
        j[(g, p)] = 1.0;
        for m in p + 1..=g {
            j[(g, m)] = theta[m].exp();
        }
    }
    j
}

/// Newton on the reparameterized likelihood with step halving.
pub fn fit_ordered_logit(design: &DesignMatrix, n_classes: usize) -> Result<OrderedFit> {
    if n_classes < 3 {
        return Err(Error::InvalidArgument(format!("ordered logit needs at least 3 classes, got {n_classes}")));
    }
    if design.n_classes() != n_classes {
        return Err(Error::InvalidArgument(format!(
            "design response has {} classes, {n_classes} requested",
            design.n_classes()
        )));
    }
    if design.has_intercept() {
        return Err(Error::InvalidArgument("ordered logit designs carry no intercept column".into()));
    }
    let counts = design.class_counts();
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InsufficientData(format!("class {k} is empty")));
    }
    let n = design.n_rows();
    let p = design.n_features();
    let q = n_classes - 1;
    let null_ll: f64 = counts.iter().map(|&c| c as f64 * (c as f64 / n as f64).ln()).sum();

    // θ = (β, γ₁, log(γ₂ − γ₁), …) started at the marginal cut points
    let mut theta = vec![0.0; p + q];
    let mut cum = 0.0;
    let mut prev = 0.0;
    for k in 0..q {
        cum += counts[k] as f64 / n as f64;
        let g = (cum / (1.0 - cum)).ln();
        theta[p + k] = if k == 0 { g } else { (g - prev).ln() };
        prev = g;
    }
    let names = design.names().to_vec();
    let at = |theta: &[f64], derivs: bool| evaluate(design, &theta[..p], &thresholds_of(theta, p), derivs);
    let mut cur = at(&theta, true).ok_or_else(|| Error::NonFinite("ordered logit start".into()))?;
    let mut trace = vec![cur.ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        let jac = jacobian(&theta, p);
        let g_theta = jac.transpose() * &cur.grad;
        if g_theta.iter().all(|g| g.abs() < SCORE_TOL) {
            converged = true;
            break;
        }
        iterations += 1;
        let mut h_theta = jac.transpose() * &cur.hess * &jac;
        for m in p + 1..p + q {
            let tail: f64 = (m..p + q).map(|k| cur.grad[k]).sum();
            h_theta[(m, m)] += theta[m].exp() * tail;
        }
        let neg = -h_theta;
        let delta = spd_solve(&neg, &g_theta)
            .or_else(|| spd_solve(&(-(jac.transpose() * &cur.hess * &jac)), &g_theta))
            .ok_or_else(|| {
                let full = -&cur.hess;
                let j = first_dependent_column(&full);
                Error::Singular {
                    column: if j < p { names[j].clone() } else { format!("threshold {}", j - p + 1) },
                }
            })?;
        let mut t = 1.0;
        let next = loop {
            let cand: Vec<f64> = theta.iter().zip(delta.iter()).map(|(a, d)| a + t * d).collect();
            if let Some(e) = at(&cand, false) {
                if e.ll >= cur.ll - 1e-12 * cur.ll.abs() {
                    break Some(cand);
                }
            }
            t *= 0.5;
            if t < 1e-10 {
                break None;
            }
        };
        let Some(next) = next else {
            // no ascent direction left at machine precision
            converged = g_theta.iter().all(|g| g.abs() < 1e-5 * n as f64);
            break;
        };
        if let Some((j, &b)) = next[..p].iter().enumerate().find(|(_, b)| b.abs() > SEPARATION_LIMIT) {
            return Err(Error::Separation {
                column: names[j].clone(),
                value: b,
                limit: SEPARATION_LIMIT,
            });
        }
        let step = next.iter().zip(&theta).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = theta.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        theta = next;
        cur = at(&theta, true).ok_or_else(|| Error::NonFinite("ordered logit likelihood".into()))?;
        trace.push(cur.ll);
        if step / scale < STEP_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged { iterations });
    }
    let gamma = thresholds_of(&theta, p);
    if let Some(&g) = gamma.iter().find(|g| g.abs() > 2.0 * SEPARATION_LIMIT) {
        return Err(Error::Separation {
            column: "threshold".into(),
            value: g,
            limit: 2.0 * SEPARATION_LIMIT,
        });
    }
    let info = -&cur.hess;
    let covariance = spd_inverse(&info).ok_or_else(|| {
        let j = first_dependent_column(&info);
        Error::Singular {
            column: if j < p { names[j].clone() } else { format!("threshold {}", j - p + 1) },
        }
    })?;
    Ok(OrderedFit {
        names,
        slopes: theta[..p].to_vec(),
        thresholds: gamma,
        covariance,
        log_likelihood: cur.ll,
        null_log_likelihood: null_ll,
        log_likelihood_trace: trace,
        converged,
        iterations,
        n_obs: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::Array2;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn simulate(n: usize, beta: &[f64], cuts: &[f64], seed: u64) -> DesignMatrix {
        let mut r = rng::seeded(seed);
        let p = beta.len();
        let x = Array2::from_shape_simple_fn((n, p), || r.sample::<f64, _>(StandardNormal));
        let y = (0..n)
            .map(|i| {
                let eta: f64 = (0..p).map(|j| x[(i, j)] * beta[j]).sum();
                let u: f64 = r.random();
                // latent Y* = η + logistic noise
                let ystar = eta + (u / (1.0 - u)).ln();
                cuts.iter().filter(|&&c| ystar > c).count()
            })
            .collect();
        let names = (0..p).map(|j| format!("x{}", j + 1)).collect();
        DesignMatrix::new(x, names, y, cuts.len() + 1, false).unwrap()
    }

    #[test]
    fn probabilities_at_zero() {
        let fit = OrderedFit {
            names: vec!["x".into()],
            slopes: vec![0.0],
            thresholds: vec![0.0, 1.0],
            covariance: DMatrix::identity(3, 3),
            log_likelihood: 0.0,
            null_log_likelihood: 0.0,
            log_likelihood_trace: vec![],
            converged: true,
            iterations: 0,
            n_obs: 1,
        };
        let p = ordered_probabilities(&fit, &[0.0]).unwrap();
        let f1 = 1.0 / (1.0 + (-1.0f64).exp());
        assert_eq!(p[0], 0.5);
        assert!((p[1] - (f1 - 0.5)).abs() < 1e-15 && (p[1] - 0.2311).abs() < 1e-4);
        assert!((p[2] - (1.0 - f1)).abs() < 1e-15 && (p[2] - 0.2689).abs() < 1e-4);
        assert!(ordered_probabilities(&fit, &[]).is_err());
    }

    #[test]
    fn recovers_parameters_and_increasing_cuts() {
        let d = simulate(6000, &[2.0, -1.0], &[-1.0, 0.5, 2.0], 3);
        let fit = fit_ordered_logit(&d, 4).unwrap();
        assert!(fit.converged);
        let se = fit.std_errors();
        for (k, (b, t)) in fit.slopes.iter().zip([2.0, -1.0]).enumerate() {
            assert!((b - t).abs() < 4.0 * se[k], "{b} vs {t}");
        }
        assert!(fit.thresholds.windows(2).all(|w| w[0] < w[1]));
        assert!(fit.log_likelihood_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        for row in fit.predict_design(&d).unwrap().iter().take(200) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(fit.pseudo_r2() > 0.0);
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let d = simulate(300, &[0.7, -0.4], &[-0.5, 0.8], 9);
        let beta = [0.3, -0.2];
        let gamma = [-0.4, 0.9];
        let e = evaluate(&d, &beta, &gamma, true).unwrap();
        let h = 1e-5;
        let params = [beta[0], beta[1], gamma[0], gamma[1]];
        let ll = |v: &[f64]| evaluate(&d, &v[..2], &v[2..], false).unwrap().ll;
        let grad_at = |v: &[f64]| evaluate(&d, &v[..2], &v[2..], true).unwrap().grad;
        for k in 0..4 {
            let mut up = params;
            let mut dn = params;
            up[k] += h;
            dn[k] -= h;
            let num = (ll(&up) - ll(&dn)) / (2.0 * h);
            assert!((num - e.grad[k]).abs() < 1e-5 * num.abs().max(1.0), "grad {k}");
            let gn = (grad_at(&up) - grad_at(&dn)) / (2.0 * h);
            for j in 0..4 {
                assert!((gn[j] - e.hess[(j, k)]).abs() < 1e-4 * gn[j].abs().max(1.0), "hess {j},{k}");
            }
        }
    }

    #[test]
    fn rejects_empty_class_and_two_classes() {
        let d = simulate(200, &[1.0], &[-0.5, 0.5], 1);
        let y: Vec<usize> = d.y().iter().map(|&v| if v == 1 { 0 } else { v }).collect();
        let empty = DesignMatrix::new(d.x().clone(), d.names().to_vec(), y, 3, false).unwrap();
        assert!(matches!(fit_ordered_logit(&empty, 3), Err(Error::InsufficientData(_))));
        assert!(fit_ordered_logit(&d, 2).is_err());
    }
}
