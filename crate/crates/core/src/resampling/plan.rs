use serde::{Deserialize, Serialize};

use crate::ctgan::{CtganConfig, CtganModel};
use crate::error::{Error, Result};
use crate::rng;
use crate::tabular::Dataset;

use super::ctgan_rs::oversample_with_model;
use super::smote::smote_nc;
use super::under::random_undersample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ru,
    SmoteNc,
    Ctgan,
    CtganRu,
}

/// Target class counts and the strategy that reaches them.
///
/// ```toml
/// method = "ctgan_ru"
/// targets = [114, 114]
/// ru_targets = [114, 57]
/// seed = 1
///
/// [ctgan]
/// epochs = 200
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResamplePlan {
    pub method: Method,
    /// Final count per label class, in category order.
    pub targets: Vec<usize>,
    #[serde(default = "default_k")]
    pub k_neighbors: usize,
    /// Intermediate counts for `ctgan_ru`.
    #[serde(default)]
    pub ru_targets: Option<Vec<usize>>,
    /// Alternative to `ru_targets`: each class is cut to at most
    /// `ru_ratio` times the smallest class.
    #[serde(default)]
    pub ru_ratio: Option<f64>,
    #[serde(default)]
    pub ctgan: CtganConfig,
    #[serde(default)]
    pub seed: u64,
}

fn default_k() -> usize {
    5
}

impl ResamplePlan {
    pub fn new(method: Method, targets: Vec<usize>, seed: u64) -> Self {
        Self {
            method,
            targets,
            k_neighbors: default_k(),
            ru_targets: None,
            ru_ratio: None,
            ctgan: CtganConfig::default(),
            seed,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("resample plan: {e}")))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("plan serializes")
    }

    /// Post-RU counts for `ctgan_ru` on data with class counts `counts`.
    pub fn resolve_ru_targets(&self, counts: &[usize]) -> Result<Vec<usize>> {
        match (&self.ru_targets, self.ru_ratio) {
            (Some(_), Some(_)) => Err(Error::InvalidArgument("give ru_targets or ru_ratio, not both".into())),
            (Some(t), None) => Ok(t.clone()),
            (None, Some(r)) => {
                if !(r >= 1.0 && r.is_finite()) {
                    return Err(Error::InvalidArgument(format!("ru_ratio {r} must be at least 1")));
                }
                let smallest = *counts.iter().min().unwrap_or(&0);
                let cap = (r * smallest as f64).round() as usize;
                Ok(counts.iter().map(|&c| c.min(cap)).collect())
            }
            (None, None) => Err(Error::InvalidArgument("ctgan_ru needs ru_targets or ru_ratio".into())),
        }
    }

    /// Check the plan against the class counts of `data`.
    pub fn validate(&self, data: &Dataset) -> Result<()> {
        let counts = data.class_counts();
        let check_len = |t: &[usize], what: &str| {
            if t.len() != counts.len() {
                return Err(Error::InvalidArgument(format!(
                    "{what} has {} entries for {} classes",
                    t.len(),
                    counts.len()
                )));
            }
            if t.contains(&0) {
                return Err(Error::InvalidArgument(format!("{what} must all be at least 1")));
            }
            Ok(())
        };
        check_len(&self.targets, "targets")?;
        let below = |t: &[usize], floor: &[usize], what: &str| match (0..t.len()).find(|&c| t[c] < floor[c]) {
            Some(c) => Err(Error::InvalidArgument(format!(
                "class {c}: {what} {} is below {}",
                t[c], floor[c]
            ))),
            None => Ok(()),
        };
        match self.method {
            Method::Ru => below(&counts, &self.targets, "available count"),
            Method::SmoteNc | Method::Ctgan => below(&self.targets, &counts, "target"),
            Method::CtganRu => {
                let ru = self.resolve_ru_targets(&counts)?;
                check_len(&ru, "ru_targets")?;
                below(&counts, &ru, "available count")?;
                below(&self.targets, &ru, "target")
            }
        }?;
        if self.method == Method::SmoteNc && self.k_neighbors == 0 {
            return Err(Error::InvalidArgument("k_neighbors must be at least 1".into()));
        }
        if matches!(self.method, Method::Ctgan | Method::CtganRu) {
            self.ctgan.validate()?;
        }
        Ok(())
    }

    fn ctgan_config(&self) -> CtganConfig {
        self.ctgan.clone().with_seed(rng::derive_seed(self.seed, "train"))
    }

    /// Rebalance `data`. Output class counts equal `targets` exactly.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        self.validate(data)?;
        let counts = data.class_counts();
        let out = match self.method {
            Method::Ru => random_undersample(data, &self.targets, self.seed)?,
            Method::SmoteNc => {
                let mut out = data.clone();
                for (class, (&t, &have)) in self.targets.iter().zip(&counts).enumerate() {
                    if t > have {
                        let seed = rng::derive_seed(self.seed, &format!("smote{class}"));
                        let grown = smote_nc(&out, class, self.k_neighbors, t - have, seed)?;
                        out = grown;
                    }
                }
                out
            }
            Method::Ctgan => {
                if self.targets == counts {
                    data.clone()
                } else {
                    let cfg = self.ctgan_config();
                    let model = CtganModel::train(data, &cfg)?;
                    oversample_with_model(data, &model, &self.targets, rng::derive_seed(self.seed, "generate"))?
                }
            }
            Method::CtganRu => {
                let reduced = random_undersample(data, &self.resolve_ru_targets(&counts)?, self.seed)?;
                if reduced.class_counts() == self.targets {
                    reduced
                } else {
                    let model = CtganModel::train(&reduced, &self.ctgan_config())?;
                    oversample_with_model(&reduced, &model, &self.targets, rng::derive_seed(self.seed, "generate"))?
                }
            }
        };
        debug_assert_eq!(out.class_counts(), self.targets);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{ColumnSpec, DataSchema, Value};
    use std::sync::Arc;

    fn data(counts: &[usize]) -> Dataset {
        let names: Vec<String> = (0..counts.len()).map(|c| format!("c{c}")).collect();
        let schema = Arc::new(
            DataSchema::new(vec![ColumnSpec::continuous("x"), ColumnSpec::discrete("y", names)], "y").unwrap(),
        );
        let mut rows = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                rows.push(vec![Value::Real(c as f64 * 3.0 + (i % 11) as f64 * 0.2), Value::Category(c)]);
            }
        }
        Dataset::from_rows(schema, &rows).unwrap()
    }

    #[test]
    fn toml_round_trip() {
        let text = "method = \"ctgan_ru\"\ntargets = [114, 114]\nru_targets = [114, 57]\nseed = 3\n[ctgan]\nepochs = 5\n";
        let plan = ResamplePlan::from_toml_str(text).unwrap();
        assert_eq!(plan.method, Method::CtganRu);
        assert_eq!(plan.ctgan.epochs, 5);
        assert_eq!(plan.k_neighbors, 5);
        assert_eq!(ResamplePlan::from_toml_str(&plan.to_toml_string()).unwrap(), plan);
        assert!(ResamplePlan::from_toml_str("method = \"tvae\"\ntargets = [1, 1]").is_err());
        assert!(ResamplePlan::from_toml_str("method = \"ru\"\ntargets = [1, 1]\nbogus = 1").is_err());
    }

    #[test]
    fn validation() {
        let d = data(&[100, 10]);
        assert!(ResamplePlan::new(Method::Ru, vec![10, 10], 0).validate(&d).is_ok());
        assert!(ResamplePlan::new(Method::Ru, vec![10, 11], 0).validate(&d).is_err());
        assert!(ResamplePlan::new(Method::Ru, vec![0, 10], 0).validate(&d).is_err());
        assert!(ResamplePlan::new(Method::SmoteNc, vec![100, 100], 0).validate(&d).is_ok());
        assert!(ResamplePlan::new(Method::SmoteNc, vec![90, 100], 0).validate(&d).is_err());
        let mut p = ResamplePlan::new(Method::CtganRu, vec![20, 20], 0);
        assert!(p.validate(&d).is_err());
        p.ru_ratio = Some(2.0);
        assert_eq!(p.resolve_ru_targets(&[100, 10]).unwrap(), vec![20, 10]);
        assert!(p.validate(&d).is_ok());
        p.ru_targets = Some(vec![20, 10]);
        assert!(p.validate(&d).is_err());
    }

    #[test]
    fn ru_ratio_three_class() {
        let mut p = ResamplePlan::new(Method::CtganRu, vec![126, 126, 126], 0);
        p.ru_ratio = Some(2.0);
        assert_eq!(p.resolve_ru_targets(&[317, 63, 63]).unwrap(), vec![126, 63, 63]);
    }

    #[test]
    fn apply_hits_targets() {
        let d = data(&[120, 12]);
        assert_eq!(ResamplePlan::new(Method::Ru, vec![12, 12], 4).apply(&d).unwrap().class_counts(), vec![12, 12]);
        let out = ResamplePlan::new(Method::SmoteNc, vec![120, 120], 4).apply(&d).unwrap();
        assert_eq!(out.class_counts(), vec![120, 120]);
        let mut p = ResamplePlan::new(Method::CtganRu, vec![24, 24], 4);
        p.ru_targets = Some(vec![24, 12]);
        p.ctgan = CtganConfig {
            epochs: 1,
            batch_size: 12,
            pac: 2,
            z_dim: 4,
            generator_residual: vec![8],
            generator_tail: vec![8, 8],
            discriminator_dims: vec![8],
            max_modes: 2,
            ..CtganConfig::default()
        };
        let a = p.apply(&d).unwrap();
        assert_eq!(a.class_counts(), vec![24, 24]);
        assert_eq!(a, p.apply(&d).unwrap());
    }
}
