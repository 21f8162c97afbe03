use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode_norm::{DEFAULT_MAX_MODES, DEFAULT_WEIGHT_THRESHOLD};

/// Training hyper-parameters. Missing TOML keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CtganConfig {
    pub epochs: usize,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub batch_size: usize,
    pub pac: usize,
    pub z_dim: usize,
    pub gumbel_temperature: f64,
    pub leaky_ratio: f64,
    pub dropout_rate: f64,
    pub seed: u64,
    /// Widths of the concatenating generator blocks.
    pub generator_residual: Vec<usize>,
    /// Widths of the plain generator tail; the first tail layer is batch-normalized.
    pub generator_tail: Vec<usize>,
    pub discriminator_dims: Vec<usize>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub bn_momentum: f64,
    pub max_modes: usize,
    pub mode_weight_threshold: f64,
}

impl Default for CtganConfig {
    fn default() -> Self {
        CtganConfig {
            epochs: 200,
            lr_generator: 1e-4,
            lr_discriminator: 5e-4,
            batch_size: 500,
            pac: 10,
            z_dim: 128,
            gumbel_temperature: 0.2,
            leaky_ratio: 0.2,
            dropout_rate: 0.5,
            seed: 0,
            generator_residual: vec![256, 256],
            generator_tail: vec![256, 128],
            discriminator_dims: vec![256, 256, 128, 64],
            adam_beta1: 0.5,
            adam_beta2: 0.9,
            bn_momentum: 0.9,
            max_modes: DEFAULT_MAX_MODES,
            mode_weight_threshold: DEFAULT_WEIGHT_THRESHOLD,
        }
    }
}

impl CtganConfig {
    /// A narrow network for small data and many repeated fits.
    pub fn desk() -> Self {
        CtganConfig {
            batch_size: 100,
            z_dim: 32,
            generator_residual: vec![64, 64],
            generator_tail: vec![64, 64],
            discriminator_dims: vec![64, 64],
            lr_generator: 1e-4,
            lr_discriminator: 1e-3,
            dropout_rate: 0.1,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.pac == 0 || self.batch_size == 0 {
            return bad("batch_size and pac must be positive".into());
        }
        if self.batch_size % self.pac != 0 {
            return bad(format!("batch_size {} is not divisible by pac {}", self.batch_size, self.pac));
        }
        if self.z_dim == 0 {
            return bad("z_dim must be positive".into());
        }
        for (name, lr) in [("lr_generator", self.lr_generator), ("lr_discriminator", self.lr_discriminator)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("{name} = {lr} must be positive"));
            }
        }
        if !(self.gumbel_temperature > 0.0 && self.gumbel_temperature.is_finite()) {
            return bad(format!("gumbel_temperature {} must be positive", self.gumbel_temperature));
        }
        if !(self.leaky_ratio > 0.0 && self.leaky_ratio < 1.0) {
            return bad(format!("leaky_ratio {} outside (0, 1)", self.leaky_ratio));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        for (name, b) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
            ("bn_momentum", self.bn_momentum),
        ] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} = {b} outside [0, 1)"));
            }
        }
        if self.generator_tail.is_empty() || self.discriminator_dims.is_empty() {
            return bad("generator_tail and discriminator_dims need at least one layer".into());
        }
        let all = self.generator_residual.iter().chain(&self.generator_tail).chain(&self.discriminator_dims);
        if all.clone().any(|&d| d == 0) {
            return bad("layer widths must be positive".into());
        }
        if self.max_modes == 0 {
            return bad("max_modes must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.mode_weight_threshold) {
            return bad(format!("mode_weight_threshold {} outside [0, 1)", self.mode_weight_threshold));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip_toml() {
        let c = CtganConfig::default();
        c.validate().unwrap();
        CtganConfig::desk().validate().unwrap();
        let text = toml::to_string(&c).unwrap();
        assert_eq!(toml::from_str::<CtganConfig>(&text).unwrap(), c);
        let partial: CtganConfig = toml::from_str("epochs = 3\nbatch_size = 20").unwrap();
        assert_eq!(partial.epochs, 3);
        assert_eq!(partial.pac, 10);
        assert!(toml::from_str::<CtganConfig>("epoch = 3").is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let base = CtganConfig::default();
        for c in [
            CtganConfig { batch_size: 505, ..base.clone() },
            CtganConfig { dropout_rate: 1.0, ..base.clone() },
            CtganConfig { leaky_ratio: 0.0, ..base.clone() },
            CtganConfig { gumbel_temperature: 0.0, ..base.clone() },
            CtganConfig { lr_generator: -1.0, ..base.clone() },
            CtganConfig { pac: 0, ..base.clone() },
            CtganConfig { discriminator_dims: vec![], ..base.clone() },
        ] {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
