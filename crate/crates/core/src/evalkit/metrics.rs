use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BinaryConfusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl BinaryConfusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub sensitivity: f64,
    pub specificity: f64,
    pub g_mean: f64,
    /// Set when a denominator was zero and the affected rate was reported as 0.
    pub degenerate: bool,
}

impl MetricsReport {
    pub fn from_rates(sensitivity: f64, specificity: f64) -> Self {
        MetricsReport {
            sensitivity,
            specificity,
            g_mean: g_mean(sensitivity, specificity),
            degenerate: false,
        }
    }

    fn from_confusion(c: &BinaryConfusion) -> Self {
        let rate = |num: usize, den: usize| if den == 0 { None } else { Some(num as f64 / den as f64) };
        let sens = rate(c.tp, c.tp + c.fn_);
        let spec = rate(c.tn, c.tn + c.fp);
        let mut r = Self::from_rates(sens.unwrap_or(0.0), spec.unwrap_or(0.0));
        r.degenerate = sens.is_none() || spec.is_none();
        r
    }
}

/// `√(sensitivity · specificity)`.
pub fn g_mean(sensitivity: f64, specificity: f64) -> f64 {
    (sensitivity * specificity).sqrt()
}

fn check_lengths(y_true: &[usize], y_pred: &[usize]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Shape(format!(
            "{} true labels, {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    Ok(())
}

/// One-vs-rest scoring with `positive` as the positive class.
pub fn score(y_true: &[usize], y_pred: &[usize], positive: usize) -> Result<(BinaryConfusion, MetricsReport)> {
    check_lengths(y_true, y_pred)?;
    let mut c = BinaryConfusion { tp: 0, fp: 0, fn_: 0, tn: 0 };
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t == positive, p == positive) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok((c, MetricsReport::from_confusion(&c)))
}

/// `counts[t][p]`: rows of true class `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// One-vs-rest collapse for class `k`.
    pub fn one_vs_rest(&self, k: usize) -> BinaryConfusion {
        let m = self.counts.len();
        let mut c = BinaryConfusion { tp: 0, fp: 0, fn_: 0, tn: 0 };
        for t in 0..m {
            for p in 0..m {
                let n = self.counts[t][p];
                match (t == k, p == k) {
                    (true, true) => c.tp += n,
                    (false, true) => c.fp += n,
                    (true, false) => c.fn_ += n,
                    (false, false) => c.tn += n,
                }
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MulticlassReport {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<MetricsReport>,
    /// Geometric mean of the per-class sensitivities.
    pub overall_g_mean: f64,
    pub degenerate: bool,
}

pub fn score_multiclass(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<MulticlassReport> {
    check_lengths(y_true, y_pred)?;
    if n_classes < 3 {
        return Err(Error::InvalidArgument(format!("multiclass scoring needs ≥ 3 classes, got {n_classes}")));
    }
    let mut counts = vec![vec![0usize; n_classes]; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::InvalidArgument(format!("label outside 0..{n_classes}")));
        }
        counts[t][p] += 1;
    }
    let confusion = ConfusionMatrix { counts };
    let per_class: Vec<MetricsReport> = (0..n_classes)
        .map(|k| MetricsReport::from_confusion(&confusion.one_vs_rest(k)))
        .collect();
    let overall_g_mean = per_class
        .iter()
        .map(|r| r.sensitivity)
        .product::<f64>()
        .powf(1.0 / n_classes as f64);
    let degenerate = per_class.iter().any(|r| r.degenerate);
    Ok(MulticlassReport {
        confusion,
        per_class,
        overall_g_mean,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn table_values() {
        assert!((g_mean(0.875, 0.827) - 0.851).abs() < 5e-4);
        assert!((g_mean(0.963, 0.868) - 0.914).abs() < 5e-4);
    }

    #[test]
    fn sensitivity_from_counts() {
        // 24 positives, 21 caught; 100 negatives, 83 correct
        let mut t = vec![1; 24];
        t.extend(vec![0; 100]);
        let mut p = vec![1; 21];
        p.extend(vec![0; 3]);
        p.extend(vec![0; 83]);
        p.extend(vec![1; 17]);
        let (c, r) = score(&t, &p, 1).unwrap();
        assert_eq!(c, BinaryConfusion { tp: 21, fp: 17, fn_: 3, tn: 83 });
        assert_eq!(r.sensitivity, 0.875);
        assert_eq!(r.specificity, 0.83);
        assert!(!r.degenerate);
        let (_, perfect) = score(&t, &t, 1).unwrap();
        assert_eq!((perfect.sensitivity, perfect.specificity, perfect.g_mean), (1.0, 1.0, 1.0));
        assert!(score(&t, &p[..5], 1).is_err());
    }

    #[test]
    fn missing_class_is_flagged() {
        let (_, r) = score(&[0, 0, 0], &[0, 1, 0], 1).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.sensitivity, 0.0);
        assert_eq!(r.g_mean, 0.0);
    }

    #[test]
    fn multiclass_perfect_and_random() {
        let y: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let r = score_multiclass(&y, &y, 3).unwrap();
        assert_eq!(r.overall_g_mean, 1.0);
        assert!(r.per_class.iter().all(|m| m.sensitivity == 1.0 && m.specificity == 1.0));

        let mut g = rng::seeded(2);
        let y: Vec<usize> = (0..3000).map(|i| i % 3).collect();
        let p: Vec<usize> = (0..3000).map(|_| g.random_range(0..3)).collect();
        let r = score_multiclass(&y, &p, 3).unwrap();
        for m in &r.per_class {
            assert!((m.sensitivity - 1.0 / 3.0).abs() < 0.03);
        }
        assert_eq!(r.confusion.total(), 3000);
        assert!(score_multiclass(&y, &p, 2).is_err());
    }

    proptest! {
        #[test]
        fn identities(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..200)) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let (c, r) = score(&t, &p, 1).unwrap();
            prop_assert_eq!(c.total(), t.len());
            prop_assert!((r.g_mean - (r.sensitivity * r.specificity).sqrt()).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&r.g_mean));
            if r.sensitivity == 0.0 || r.specificity == 0.0 {
                prop_assert_eq!(r.g_mean, 0.0);
            }
            let m = score_multiclass(&t, &p, 3).unwrap();
            prop_assert_eq!(m.confusion.total(), t.len());
            prop_assert_eq!(m.confusion.one_vs_rest(1), c);
        }
    }
}
