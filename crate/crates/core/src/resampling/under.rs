use rand::seq::index;

use crate::error::{Error, Result};
use crate::rng;
use crate::tabular::Dataset;

/// Row indices kept by random under-sampling, in original order.
pub fn undersample_indices(data: &Dataset, targets: &[usize], seed: u64) -> Result<Vec<usize>> {
    let counts = data.class_counts();
    if targets.len() != counts.len() {
        return Err(Error::InvalidArgument(format!(
            "{} targets for {} classes",
            targets.len(),
            counts.len()
        )));
    }
    let mut r = rng::substream(seed, "resample.ru");
    let mut keep = Vec::with_capacity(targets.iter().sum());
    for (class, (&target, &have)) in targets.iter().zip(&counts).enumerate() {
        if target > have {
            return Err(Error::InvalidArgument(format!(
                "class {class}: target {target} exceeds the {have} available rows"
            )));
        }
        let rows = data.rows_of_class(class);
        keep.extend(index::sample(&mut r, have, target).into_iter().map(|i| rows[i]));
    }
    keep.sort_unstable();
    Ok(keep)
}

/// Uniform random subset with exactly `targets[c]` rows of each class.
pub fn random_undersample(data: &Dataset, targets: &[usize], seed: u64) -> Result<Dataset> {
    Ok(data.select(&undersample_indices(data, targets, seed)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{ColumnSpec, DataSchema, Value};
    use proptest::prelude::*;
    use std::sync::Arc;

    pub(crate) fn fixture(counts: &[usize]) -> Dataset {
        let names: Vec<String> = (0..counts.len()).map(|c| format!("c{c}")).collect();
        let schema = Arc::new(
            DataSchema::new(vec![ColumnSpec::continuous("x"), ColumnSpec::discrete("y", names)], "y").unwrap(),
        );
        let mut rows = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                rows.push(vec![Value::Real((c * 1000 + i) as f64), Value::Category(c)]);
            }
        }
        Dataset::from_rows(schema, &rows).unwrap()
    }

    #[test]
    fn exact_counts() {
        let d = fixture(&[317, 63]);
        let out = random_undersample(&d, &[63, 63], 1).unwrap();
        assert_eq!(out.class_counts(), vec![63, 63]);
    }

    #[test]
    fn identity_when_targets_match() {
        let d = fixture(&[20, 5]);
        let out = random_undersample(&d, &[20, 5], 9).unwrap();
        assert_eq!(out, d);
    }

    #[test]
    fn infeasible_target() {
        let d = fixture(&[20, 5]);
        assert!(random_undersample(&d, &[10, 6], 1).is_err());
        assert!(random_undersample(&d, &[10], 1).is_err());
    }

    proptest! {
        #[test]
        fn subset_and_deterministic(a in 1usize..60, b in 1usize..60, fa in 0.0f64..1.0, fb in 0.0f64..1.0, seed in any::<u64>()) {
            let d = fixture(&[a, b]);
            let t = [((a as f64 * fa) as usize).max(1), ((b as f64 * fb) as usize).max(1)];
            let out = random_undersample(&d, &t, seed).unwrap();
            prop_assert_eq!(out.class_counts(), t.to_vec());
            prop_assert_eq!(&out, &random_undersample(&d, &t, seed).unwrap());
            let original: Vec<Vec<Value>> = (0..d.n_rows()).map(|i| d.row(i)).collect();
            let mut seen = std::collections::HashSet::new();
            for i in 0..out.n_rows() {
                let row = out.row(i);
                let pos = original.iter().position(|r| *r == row);
                prop_assert!(pos.is_some());
                prop_assert!(seen.insert(pos.unwrap()));
            }
        }
    }
}
