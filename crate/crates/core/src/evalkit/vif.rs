use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::glm::DesignMatrix;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VifEntry {
    pub name: String,
    /// `f64::INFINITY` when the feature is a linear combination of the others.
    pub value: f64,
}

impl VifEntry {
    pub fn is_collinear(&self) -> bool {
        self.value.is_infinite()
    }
}

/// `1 / (1 − R²_j)` from regressing each feature on the others plus an intercept.
pub fn vif(design: &DesignMatrix) -> Result<Vec<VifEntry>> {
    let skip = usize::from(design.has_intercept());
    let x = design.x();
    let n = x.nrows();
    let features: Vec<usize> = (skip..x.ncols()).collect();
    if features.len() < 2 {
        return Err(Error::InvalidArgument("VIF needs at least two features".into()));
    }
    let mut out = Vec::with_capacity(features.len());
    for &j in &features {
        let target = DVector::from_iterator(n, x.column(j).iter().copied());
        let mean = target.mean();
        let sst: f64 = target.iter().map(|v| (v - mean).powi(2)).sum();
        if sst <= 1e-12 * n as f64 * mean.abs().max(1.0).powi(2) {
            return Err(Error::InvalidArgument(format!("feature {} is constant", design.names()[j])));
        }
        let others: Vec<usize> = features.iter().copied().filter(|&k| k != j).collect();
        let a = DMatrix::from_fn(n, others.len() + 1, |r, c| if c == 0 { 1.0 } else { x[(r, others[c - 1])] });
        let coef = a
            .clone()
            .svd(true, true)
            .solve(&target, 1e-12)
            .map_err(|e| Error::Singular { column: e.to_string() })?;
        let resid = &target - &a * coef;
        let sse = resid.norm_squared();
        let r2 = 1.0 - sse / sst;
        let value = if sse <= 1e-10 * sst { f64::INFINITY } else { 1.0 / (1.0 - r2) };
        out.push(VifEntry {
            name: design.names()[j].clone(),
            value,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::Array2;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn design(x: Array2<f64>) -> DesignMatrix {
        let names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        let n = x.nrows();
        DesignMatrix::new(x, names, (0..n).map(|i| i % 2).collect(), 2, false).unwrap()
    }

    #[test]
    fn orthogonal_features() {
        // ±1 columns forming an orthogonal design with zero means
        let x = Array2::from_shape_fn((8, 3), |(i, j)| if (i >> j) & 1 == 1 { 1.0 } else { -1.0 });
        for e in vif(&design(x)).unwrap() {
            assert!((e.value - 1.0).abs() < 1e-12, "{e:?}");
        }
    }

    #[test]
    fn duplicated_column_is_infinite() {
        let mut r = rng::seeded(1);
        let x = Array2::from_shape_fn((50, 3), |_| r.sample::<f64, _>(StandardNormal));
        let mut x = x;
        let c0 = x.column(0).to_owned();
        x.column_mut(2).assign(&c0);
        let v = vif(&design(x)).unwrap();
        assert!(v[0].is_collinear() && v[2].is_collinear());
        assert!(v[1].value.is_finite());
    }

    #[test]
    fn correlated_pair() {
        let mut r = rng::seeded(2);
        let n = 10_000;
        let mut x = Array2::zeros((n, 2));
        for i in 0..n {
            let a: f64 = r.sample(StandardNormal);
            let e: f64 = r.sample(StandardNormal);
            x[(i, 0)] = a;
            x[(i, 1)] = 0.8 * a + 0.6 * e;
        }
        for e in vif(&design(x)).unwrap() {
            assert!((e.value - 1.0 / (1.0 - 0.64)).abs() < 0.1, "{e:?}");
        }
    }

    #[test]
    fn constant_feature_rejected() {
        let x = Array2::from_shape_fn((10, 2), |(i, j)| if j == 0 { 3.0 } else { i as f64 });
        assert!(vif(&design(x)).is_err());
    }
}
