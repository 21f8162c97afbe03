use crate::ctgan::{CtganConfig, CtganModel};
use crate::error::{Error, Result};
use crate::rng;
use crate::tabular::{Dataset, Value};

use super::under::random_undersample;

/// Append generated rows until every class reaches its target. Rows for class
/// `c` are generated with the label condition fixed to `c` and carry label `c`.
pub fn oversample_with_model(data: &Dataset, model: &CtganModel, targets: &[usize], seed: u64) -> Result<Dataset> {
    let counts = data.class_counts();
    if targets.len() != counts.len() {
        return Err(Error::InvalidArgument(format!("{} targets for {} classes", targets.len(), counts.len())));
    }
    if model.schema() != data.schema() {
        return Err(Error::Schema("model was trained on a different schema".into()));
    }
    let label = data.schema().label_index();
    let name = data.schema().label_name().to_string();
    let mut out = data.clone();
    for (class, (&target, &have)) in targets.iter().zip(&counts).enumerate() {
        if target < have {
            return Err(Error::InvalidArgument(format!(
                "class {class}: over-sampling target {target} is below the current {have}"
            )));
        }
        if target == have {
            continue;
        }
        let generated = model.generate(target - have, Some((&name, class)), rng::derive_seed(seed, &format!("class{class}")))?;
        for i in 0..generated.n_rows() {
            let mut row = generated.row(i);
            row[label] = Value::Category(class);
            out.push_row(&row)?;
        }
    }
    Ok(out)
}

/// Train a CTGAN on `data` and grow `minority_class` to `target_count` rows.
pub fn ctgan_oversample(data: &Dataset, minority_class: usize, target_count: usize, config: &CtganConfig) -> Result<Dataset> {
    let counts = data.class_counts();
    let have = *counts
        .get(minority_class)
        .ok_or_else(|| Error::InvalidArgument(format!("no class {minority_class}")))?;
    if target_count < have {
        return Err(Error::InvalidArgument(format!(
            "target {target_count} is below the current {have} rows"
        )));
    }
    if target_count == have {
        return Ok(data.clone());
    }
    let mut targets = counts;
    targets[minority_class] = target_count;
    let model = CtganModel::train(data, config)?;
    oversample_with_model(data, &model, &targets, config.seed)
}

/// Under-sample to `ru_targets`, train one CTGAN on the reduced set, then
/// generate every class up to `final_targets`.
pub fn ctgan_ru(data: &Dataset, ru_targets: &[usize], final_targets: &[usize], config: &CtganConfig) -> Result<Dataset> {
    if final_targets.len() != ru_targets.len() {
        return Err(Error::InvalidArgument("RU and final targets differ in length".into()));
    }
    if let Some(c) = (0..ru_targets.len()).find(|&c| final_targets[c] < ru_targets[c]) {
        return Err(Error::InvalidArgument(format!(
            "class {c}: final target {} is below the RU target {}",
            final_targets[c], ru_targets[c]
        )));
    }
    let reduced = random_undersample(data, ru_targets, config.seed)?;
    if final_targets == ru_targets {
        return Ok(reduced);
    }
    let model = CtganModel::train(&reduced, config)?;
    oversample_with_model(&reduced, &model, final_targets, config.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{ColumnSpec, DataSchema};
    use std::sync::Arc;

    fn toy(counts: &[usize]) -> Dataset {
        let names: Vec<String> = (0..counts.len()).map(|c| format!("c{c}")).collect();
        let schema = Arc::new(
            DataSchema::new(
                vec![
                    ColumnSpec::continuous("x"),
                    ColumnSpec::discrete("road", ["a", "b"]),
                    ColumnSpec::discrete("y", names),
                ],
                "y",
            )
            .unwrap(),
        );
        let mut rows = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                rows.push(vec![Value::Real(c as f64 + (i % 7) as f64 * 0.1), Value::Category(i % 2), Value::Category(c)]);
            }
        }
        Dataset::from_rows(schema, &rows).unwrap()
    }

    fn tiny() -> CtganConfig {
        CtganConfig {
            epochs: 2,
            batch_size: 20,
            pac: 2,
            z_dim: 4,
            generator_residual: vec![8],
            generator_tail: vec![8, 8],
            discriminator_dims: vec![8, 8],
            max_modes: 2,
            ..CtganConfig::default()
        }
    }

    #[test]
    fn oversample_counts_and_labels() {
        let d = toy(&[200, 20]);
        let out = ctgan_oversample(&d, 1, 200, &tiny()).unwrap();
        assert_eq!(out.class_counts(), vec![200, 200]);
        assert_eq!(out.select(&(0..220).collect::<Vec<_>>()), d);
        assert!(out.labels()[220..].iter().all(|&l| l == 1));
    }

    #[test]
    fn oversample_noop() {
        let d = toy(&[30, 10]);
        assert_eq!(ctgan_oversample(&d, 1, 10, &tiny()).unwrap(), d);
        assert!(ctgan_oversample(&d, 1, 5, &tiny()).is_err());
    }

    #[test]
    fn mixed_binary_and_three_class() {
        let d = toy(&[317, 15]);
        assert!(ctgan_ru(&d, &[60, 15], &[50, 30], &tiny()).is_err());
        let out = ctgan_ru(&d, &[60, 15], &[60, 30], &tiny()).unwrap();
        assert_eq!(out.class_counts(), vec![60, 30]);

        let d = toy(&[317, 63, 63]);
        let out = ctgan_ru(&d, &[126, 63, 63], &[126, 126, 126], &tiny()).unwrap();
        assert_eq!(out.class_counts(), vec![126, 126, 126]);
    }
}
