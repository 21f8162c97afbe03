//! Run configuration files (TOML). Keys mirror the long flag names with
//! dashes replaced by underscores; a flag given on the command line wins
//! over the same key in the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crashsynth::ctgan::CtganConfig;
use crashsynth::montecarlo::Scenario;
use crashsynth::pipeline::PipelineConfig;
use crashsynth::resampling::Method;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResampleSection {
    pub method: Option<Method>,
    pub targets: Option<Vec<usize>>,
    pub ratio: Option<Vec<f64>>,
    pub ru_targets: Option<Vec<usize>>,
    pub ru_ratio: Option<Vec<f64>>,
    pub k_neighbors: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub real: Option<PathBuf>,
    pub synthetic: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub threshold: Option<f64>,
    pub classes: Option<usize>,
    pub bins: Option<usize>,
    pub pairs: Option<Vec<String>>,
    pub seeds: Option<Vec<u64>>,
    pub n: Option<usize>,
    pub condition: Option<String>,
    pub replications: Option<usize>,
    pub resample: Option<ResampleSection>,
    pub ctgan: Option<CtganConfig>,
    pub pipeline: Option<PipelineConfig>,
    #[serde(default)]
    pub scenario: Vec<Scenario>,
}

impl FileConfig {
    /// Relative paths in a config file are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.out,
            &mut cfg.data,
            &mut cfg.schema,
            &mut cfg.test,
            &mut cfg.real,
            &mut cfg.synthetic,
            &mut cfg.predictions,
            &mut cfg.model,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// `flag` if given, else the file value, else an error naming the key.
pub fn required<T>(flag: Option<T>, file: Option<T>, key: &str) -> Result<T, CliError> {
    flag.or(file)
        .ok_or_else(|| CliError::Config(format!("missing required setting '{key}' (flag --{} or config key {key})", key.replace('_', "-"))))
}

pub fn existing(path: PathBuf, key: &str) -> Result<PathBuf, CliError> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Config(format!("{key}: file {} does not exist", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let cfg: FileConfig = toml::from_str(
            "seed = 3\ndata = \"a.csv\"\n[resample]\nmethod = \"ctgan_ru\"\nratio = [1, 1]\nru_ratio = [2, 1]\n[ctgan]\nepochs = 5\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.resample.unwrap().method, Some(Method::CtganRu));
        assert_eq!(cfg.ctgan.unwrap().epochs, 5);
        assert!(toml::from_str::<FileConfig>("sede = 3").is_err());
    }

    #[test]
    fn flag_precedence() {
        assert_eq!(required(Some(1), Some(2), "seed").unwrap(), 1);
        assert_eq!(required(None, Some(2), "seed").unwrap(), 2);
        assert!(required::<u64>(None, None, "seed").is_err());
    }
}
