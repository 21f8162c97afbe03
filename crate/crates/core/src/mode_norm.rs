//! Per-column Gaussian mixtures and mode-specific normalization.
//!
//! A continuous value `v` is represented by the index of a mixture mode
//! (sampled from the posterior responsibilities at `v`) and the scaled offset
//! `α = (v − μ) / (4σ)` clipped to `[-1, 1]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound on every mode's standard deviation.
pub const STD_FLOOR: f64 = 1e-4;
pub const DEFAULT_MAX_MODES: usize = 10;
pub const DEFAULT_WEIGHT_THRESHOLD: f64 = 0.005;
pub const EM_MAX_ITER: usize = 300;
pub const EM_TOL: f64 = 1e-6;
/// Columns longer than this are fitted on a seeded subsample.
const FIT_SAMPLE_CAP: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeModel {
    pub column: String,
    modes: Vec<Mode>,
    /// Set when the column was constant and the model is a single floor-width mode.
    pub degenerate: bool,
}

impl ModeModel {
    pub fn from_modes(column: impl Into<String>, modes: Vec<Mode>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidArgument("mode model needs at least one mode".into()));
        }
        let total: f64 = modes.iter().map(|m| m.weight).sum();
        if (total - 1.0).abs() > 1e-9 || modes.iter().any(|m| m.weight <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "mode weights must be positive and sum to 1 (sum {total})"
            )));
        }
        if modes.iter().any(|m| !m.mean.is_finite() || !(m.std >= STD_FLOOR)) {
            return Err(Error::InvalidArgument(format!(
                "mode means must be finite and stds at least {STD_FLOOR}"
            )));
        }
        Ok(ModeModel {
            column: column.into(),
            modes,
            degenerate: false,
        })
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Posterior probability of each mode given `value`.
    pub fn responsibilities(&self, value: f64) -> Vec<f64> {
        let logs: Vec<f64> = self
            .modes
            .iter()
            .map(|m| m.weight.ln() + log_normal_pdf(value, m.mean, m.std))
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / total).collect()
    }

    pub fn log_density(&self, value: f64) -> f64 {
        let logs: Vec<f64> = self
            .modes
            .iter()
            .map(|m| m.weight.ln() + log_normal_pdf(value, m.mean, m.std))
            .collect();
        log_sum_exp(&logs)
    }
}

/// Per-iteration record of an EM run.
#[derive(Debug, Clone, PartialEq)]
pub struct EmTrace {
    /// Mean per-sample log-likelihood after each E-step.
    pub log_likelihoods: Vec<f64>,
    pub converged: bool,
}

/// Full result of [`fit_vgm_detailed`].
#[derive(Debug, Clone)]
pub struct VgmFit {
    pub model: ModeModel,
    /// EM trace of the selected component count.
    pub trace: EmTrace,
    /// `(components, BIC)` for every candidate that was fitted.
    pub candidates: Vec<(usize, f64)>,
}

/// Fit a mixture to one column and prune low-weight modes.
///
/// EM is run for 1..=`max_modes` components (stopping once BIC has failed to
/// improve twice in a row); the BIC-best fit is kept, modes with weight below
/// `weight_threshold` are dropped and the rest renormalized. A constant column
/// yields a single floor-width mode flagged `degenerate`.
pub fn fit_vgm(values: &[f64], max_modes: usize, weight_threshold: f64, seed: u64) -> Result<ModeModel> {
    fit_vgm_detailed(values, max_modes, weight_threshold, seed).map(|f| f.model)
}

pub fn fit_vgm_detailed(values: &[f64], max_modes: usize, weight_threshold: f64, seed: u64) -> Result<VgmFit> {
    if values.is_empty() {
        return Err(Error::InsufficientData("cannot fit a mixture to an empty column".into()));
    }
    if max_modes == 0 {
        return Err(Error::InvalidArgument("max_modes must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&weight_threshold) {
        return Err(Error::InvalidArgument(format!("weight threshold {weight_threshold} outside [0, 1)")));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("mixture input value {bad}")));
    }
    let mut sorted: Vec<f64> = if values.len() > FIT_SAMPLE_CAP {
        let mut rng = crate::rng::seeded(seed);
        rand::seq::index::sample(&mut rng, values.len(), FIT_SAMPLE_CAP)
            .into_iter()
            .map(|i| values[i])
            .collect()
    } else {
        values.to_vec()
    };
    sorted.sort_by(f64::total_cmp);
    let distinct = 1 + sorted.windows(2).filter(|w| w[0] != w[1]).count();
    if distinct == 1 {
        log::warn!("constant column ({}); using a single degenerate mode", sorted[0]);
        let mut model = ModeModel::from_modes(
            "",
            vec![Mode {
                weight: 1.0,
                mean: sorted[0],
                std: STD_FLOOR,
            }],
        )?;
        model.degenerate = true;
        return Ok(VgmFit {
            model,
            trace: EmTrace {
                log_likelihoods: Vec::new(),
                converged: true,
            },
            candidates: vec![(1, f64::NAN)],
        });
    }

    let n = sorted.len() as f64;
    let mut best: Option<(f64, Vec<Mode>, EmTrace)> = None;
    let mut candidates = Vec::new();
    let mut misses = 0;
    for k in 1..=max_modes.min(distinct) {
        let (modes, trace) = em(&sorted, quantile_init(&sorted, k), EM_MAX_ITER, EM_TOL);
        let ll = trace.log_likelihoods.last().copied().unwrap_or(f64::NEG_INFINITY) * n;
        let bic = -2.0 * ll + (3 * k - 1) as f64 * n.ln();
        candidates.push((k, bic));
        match &best {
            Some((b, _, _)) if bic >= *b => {
                misses += 1;
                if misses >= 2 {
                    break;
                }
            }
            _ => {
                misses = 0;
                best = Some((bic, modes, trace));
            }
        }
    }
    let (_, modes, trace) = best.expect("at least one candidate");
    let model = ModeModel::from_modes("", prune(modes, weight_threshold))?;
    Ok(VgmFit {
        model,
        trace,
        candidates,
    })
}

fn prune(modes: Vec<Mode>, threshold: f64) -> Vec<Mode> {
    let mut kept: Vec<Mode> = modes.iter().copied().filter(|m| m.weight >= threshold).collect();
    if kept.is_empty() {
        let heaviest = modes
            .iter()
            .copied()
            .max_by(|a, b| a.weight.total_cmp(&b.weight))
            .expect("non-empty");
        kept.push(heaviest);
    }
    let total: f64 = kept.iter().map(|m| m.weight).sum();
    for m in &mut kept {
        m.weight /= total;
    }
    kept
}

fn quantile_init(sorted: &[f64], k: usize) -> Vec<Mode> {
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let std = (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64)
        .sqrt()
        .max(STD_FLOOR);
    (0..k)
        .map(|j| {
            let q = (j as f64 + 0.5) / k as f64;
            let idx = ((q * n as f64) as usize).min(n - 1);
            Mode {
                weight: 1.0 / k as f64,
                mean: sorted[idx],
                std: (std / k as f64).max(STD_FLOOR),
            }
        })
        .collect()
}

/// Plain EM for a 1-D Gaussian mixture with stds floored at [`STD_FLOOR`].
///
/// Stops when the mean log-likelihood improves by less than `tol` or after
/// `max_iter` iterations.
pub fn em(values: &[f64], init: Vec<Mode>, max_iter: usize, tol: f64) -> (Vec<Mode>, EmTrace) {
    let n = values.len();
    let k = init.len();
    let mut modes = init;
    let mut resp = vec![0.0; n * k];
    let mut lls = Vec::new();
    let mut converged = false;
    let mut logs = vec![0.0; k];
    for _ in 0..max_iter {
        // E-step
        let mut total_ll = 0.0;
        for (i, &x) in values.iter().enumerate() {
            for (j, m) in modes.iter().enumerate() {
                logs[j] = if m.weight > 0.0 {
                    m.weight.ln() + log_normal_pdf(x, m.mean, m.std)
                } else {
                    f64::NEG_INFINITY
                };
            }
            let lse = log_sum_exp(&logs);
            total_ll += lse;
            for j in 0..k {
                resp[i * k + j] = (logs[j] - lse).exp();
            }
        }
        let ll = total_ll / n as f64;
        let done = lls.last().is_some_and(|&prev: &f64| ll - prev < tol);
        lls.push(ll);
        if done {
            converged = true;
            break;
        }
        // M-step
        for (j, m) in modes.iter_mut().enumerate() {
            let nk: f64 = (0..n).map(|i| resp[i * k + j]).sum();
            if nk <= f64::MIN_POSITIVE {
                m.weight = 0.0;
                continue;
            }
            let mean = (0..n).map(|i| resp[i * k + j] * values[i]).sum::<f64>() / nk;
            let var = (0..n)
                .map(|i| resp[i * k + j] * (values[i] - mean).powi(2))
                .sum::<f64>()
                / nk;
            m.weight = nk / n as f64;
            m.mean = mean;
            m.std = var.sqrt().max(STD_FLOOR);
        }
    }
    modes.retain(|m| m.weight > 0.0);
    (
        modes,
        EmTrace {
            log_likelihoods: lls,
            converged,
        },
    )
}

/// Sample a mode from the posterior at `value` and return `(α, mode)`.
pub fn normalize<R: Rng + ?Sized>(value: f64, model: &ModeModel, rng: &mut R) -> (f64, usize) {
    let resp = model.responsibilities(value);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut mode = resp.len() - 1;
    for (j, p) in resp.iter().enumerate() {
        acc += p;
        if u < acc {
            mode = j;
            break;
        }
    }
    let m = &model.modes[mode];
    (((value - m.mean) / (4.0 * m.std)).clamp(-1.0, 1.0), mode)
}

/// `μ + 4σα` for the given mode.
pub fn denormalize(alpha: f64, mode_index: usize, model: &ModeModel) -> Result<f64> {
    let m = model.modes.get(mode_index).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "mode index {mode_index} out of range ({} modes)",
            model.n_modes()
        ))
    })?;
    Ok(m.mean + 4.0 * m.std * alpha)
}

fn log_normal_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z - std.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, Normal};

    fn one_mode() -> ModeModel {
        ModeModel::from_modes(
            "x",
            vec![Mode {
                weight: 1.0,
                mean: 0.0,
                std: 1.0,
            }],
        )
        .unwrap()
    }

    fn two_modes() -> ModeModel {
        ModeModel::from_modes(
            "x",
            vec![
                Mode {
                    weight: 0.5,
                    mean: -5.0,
                    std: 1.0,
                },
                Mode {
                    weight: 0.5,
                    mean: 5.0,
                    std: 1.0,
                },
            ],
        )
        .unwrap()
    }

    pub(crate) fn bimodal_sample(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::seeded(seed);
        let a = Normal::new(-5.0, 1.0).unwrap();
        let b = Normal::new(5.0, 1.0).unwrap();
        (0..n)
            .map(|_| if r.random::<bool>() { a.sample(&mut r) } else { b.sample(&mut r) })
            .collect()
    }

    #[test]
    fn normalize_single_mode() {
        let m = one_mode();
        let mut r = rng::seeded(1);
        assert_eq!(normalize(2.0, &m, &mut r), (0.5, 0));
        assert_eq!(normalize(10.0, &m, &mut r), (1.0, 0));
        assert_eq!(normalize(-10.0, &m, &mut r), (-1.0, 0));
    }

    #[test]
    fn normalize_picks_posterior_mode() {
        let m = two_modes();
        // posterior of the upper mode at 5: 1 / (1 + exp(-50))
        let resp = m.responsibilities(5.0);
        assert!((resp[1] - 1.0 / (1.0 + (-50.0f64).exp())).abs() < 1e-15);
        let mut r = rng::seeded(2);
        let hits = (0..10_000).filter(|_| normalize(5.0, &m, &mut r).1 == 1).count();
        assert!(hits as f64 / 1e4 > 0.99);
        // near the midpoint both modes are drawn about equally
        let hits = (0..10_000).filter(|_| normalize(0.0, &m, &mut r).1 == 1).count();
        assert!((hits as f64 / 1e4 - 0.5).abs() < 0.03);
    }

    #[test]
    fn denormalize_inverts() {
        let m = one_mode();
        assert_eq!(denormalize(0.5, 0, &m).unwrap(), 2.0);
        assert_eq!(denormalize(0.0, 0, &m).unwrap(), 0.0);
        assert_eq!(denormalize(0.0, 1, &two_modes()).unwrap(), 5.0);
        assert!(denormalize(0.0, 2, &two_modes()).is_err());
        let mut r = rng::seeded(3);
        let tm = two_modes();
        for v in bimodal_sample(500, 4) {
            let (a, k) = normalize(v, &tm, &mut r);
            if (v - tm.modes()[k].mean).abs() <= 4.0 * tm.modes()[k].std {
                assert!((denormalize(a, k, &tm).unwrap() - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn recovers_bimodal_mixture() {
        let values = bimodal_sample(2000, 42);
        let fit = fit_vgm_detailed(&values, DEFAULT_MAX_MODES, DEFAULT_WEIGHT_THRESHOLD, 42).unwrap();
        let modes = fit.model.modes();
        assert_eq!(modes.len(), 2);
        let mut means: Vec<f64> = modes.iter().map(|m| m.mean).collect();
        means.sort_by(f64::total_cmp);
        assert!((means[0] + 5.0).abs() < 0.3 && (means[1] - 5.0).abs() < 0.3, "{means:?}");
        for w in fit.trace.log_likelihoods.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "log-likelihood decreased: {w:?}");
        }
    }

    #[test]
    fn em_is_monotone_for_every_component_count() {
        let values = bimodal_sample(600, 5);
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        for k in 1..=10 {
            let (modes, trace) = em(&values, quantile_init(&sorted, k), 300, 1e-6);
            for w in trace.log_likelihoods.windows(2) {
                assert!(w[1] >= w[0] - 1e-12, "k={k}: {w:?}");
            }
            let total: f64 = modes.iter().map(|m| m.weight).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_column_is_degenerate() {
        let m = fit_vgm(&[3.0, 3.0, 3.0], 10, 0.005, 0).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.modes(), &[Mode { weight: 1.0, mean: 3.0, std: STD_FLOOR }]);
        assert!(fit_vgm(&[], 10, 0.005, 0).is_err());
        assert!(fit_vgm(&[1.0, 2.0], 0, 0.005, 0).is_err());
    }

    #[test]
    fn standard_normal_weights_sum_to_one() {
        let mut r = rng::seeded(8);
        let n = Normal::new(0.0, 1.0).unwrap();
        let values: Vec<f64> = (0..1000).map(|_| n.sample(&mut r)).collect();
        let m = fit_vgm(&values, 10, 0.005, 8).unwrap();
        assert!(m.n_modes() >= 1);
        let total: f64 = m.modes().iter().map(|m| m.weight).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(m.modes().iter().all(|m| m.std >= STD_FLOOR && m.weight >= 0.005));
        for v in [-3.0, 0.0, 0.7, 4.0] {
            let s: f64 = m.responsibilities(v).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let values = bimodal_sample(800, 6);
        assert_eq!(fit_vgm(&values, 10, 0.005, 1).unwrap(), fit_vgm(&values, 10, 0.005, 1).unwrap());
    }
}
