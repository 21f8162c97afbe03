use rand::Rng;
use rand_distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{DataSchema, Dataset};

/// Position of every discrete column's block inside the conditional vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CondLayout {
    /// Schema indices of the discrete columns, in schema order.
    pub columns: Vec<usize>,
    pub offsets: Vec<usize>,
    pub sizes: Vec<usize>,
    pub width: usize,
}

impl CondLayout {
    pub fn new(schema: &DataSchema) -> Self {
        let columns = schema.discrete_indices();
        let sizes: Vec<usize> = columns.iter().map(|&c| schema.column(c).cardinality()).collect();
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut width = 0;
        for &s in &sizes {
            offsets.push(width);
            width += s;
        }
        CondLayout {
            columns,
            offsets,
            sizes,
            width,
        }
    }

    /// Block number of a schema column, if discrete.
    pub fn block_of(&self, column: usize) -> Option<usize> {
        self.columns.iter().position(|&c| c == column)
    }

    /// Flat index of `(column, category)`.
    pub fn position(&self, column: usize, category: usize) -> Result<usize> {
        let b = self
            .block_of(column)
            .ok_or_else(|| Error::InvalidArgument(format!("column {column} is not discrete")))?;
        if category >= self.sizes[b] {
            return Err(Error::InvalidArgument(format!(
                "category {category} out of range for column {column} ({} categories)",
                self.sizes[b]
            )));
        }
        Ok(self.offsets[b] + category)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondVector {
    pub values: Vec<f64>,
    /// Schema column index and category index.
    pub selected: (usize, usize),
}

pub fn build_cond_vector(schema: &DataSchema, column: &str, category: usize) -> Result<CondVector> {
    let c = schema.require_index(column)?;
    if schema.column(c).is_continuous() {
        return Err(Error::InvalidArgument(format!("column {column} is continuous")));
    }
    let layout = CondLayout::new(schema);
    let pos = layout.position(c, category)?;
    let mut values = vec![0.0; layout.width];
    values[pos] = 1.0;
    Ok(CondVector {
        values,
        selected: (c, category),
    })
}

/// How categories are weighted once a column is picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CategoryWeighting {
    /// `log(1 + f_k)`: rare categories are explored more often.
    LogFrequency,
    /// `f_k`: reproduces the observed marginal.
    Frequency,
}

/// Draws `(column, category)` pairs: column uniform over the discrete
/// columns, category by the chosen weighting of observed counts.
#[derive(Debug, Clone)]
pub struct CondSampler {
    columns: Vec<usize>,
    categories: Vec<Option<WeightedIndex<f64>>>,
}

impl CondSampler {
    /// `counts[b]` are the category counts of discrete block `b`.
    pub fn new(layout: &CondLayout, counts: &[Vec<usize>], weighting: CategoryWeighting) -> Result<Self> {
        if layout.columns.is_empty() {
            return Err(Error::InvalidArgument("no discrete column to condition on".into()));
        }
        let categories = counts
            .iter()
            .map(|cs| {
                let w: Vec<f64> = cs
                    .iter()
                    .map(|&f| match weighting {
                        CategoryWeighting::LogFrequency => (f as f64).ln_1p(),
                        CategoryWeighting::Frequency => f as f64,
                    })
                    .collect();
                WeightedIndex::new(w).ok()
            })
            .collect();
        Ok(CondSampler {
            columns: layout.columns.clone(),
            categories,
        })
    }

    pub fn from_data(data: &Dataset, weighting: CategoryWeighting) -> Result<Self> {
        let layout = CondLayout::new(data.schema());
        let counts: Vec<_> = layout.columns.iter().map(|&c| data.category_counts(c)).collect();
        Self::new(&layout, &counts, weighting)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        loop {
            let b = rng.random_range(0..self.columns.len());
            // an empty column (no rows) is skipped
            if let Some(dist) = &self.categories[b] {
                return (self.columns[b], dist.sample(rng));
            }
        }
    }
}

/// One training condition drawn from `data` by log-frequency weighting.
pub fn sample_training_condition<R: Rng + ?Sized>(data: &Dataset, rng: &mut R) -> Result<(usize, usize)> {
    let sampler = CondSampler::from_data(data, CategoryWeighting::LogFrequency)?;
    if sampler.categories.iter().all(Option::is_none) {
        return Err(Error::InsufficientData("dataset has no rows".into()));
    }
    Ok(sampler.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::tabular::{ColumnSpec, Value};
    use std::collections::HashSet;
    use std::sync::Arc;

    fn two_discrete() -> DataSchema {
        DataSchema::new(
            vec![
                ColumnSpec::continuous("x"),
                ColumnSpec::discrete("a", ["p", "q", "r"]),
                ColumnSpec::discrete("y", ["n", "f"]),
            ],
            "y",
        )
        .unwrap()
    }

    #[test]
    fn cond_vector_layout() {
        let s = two_discrete();
        let v = build_cond_vector(&s, "y", 1).unwrap();
        assert_eq!(v.values, vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(v.selected, (2, 1));
        assert!(build_cond_vector(&s, "x", 0).is_err());
        assert!(build_cond_vector(&s, "y", 2).is_err());
        assert!(build_cond_vector(&s, "zz", 0).is_err());
    }

    #[test]
    fn every_selection_is_a_distinct_one_hot() {
        let s = two_discrete();
        let mut seen = HashSet::new();
        for (col, k) in [("a", 3), ("y", 2)] {
            for cat in 0..k {
                let v = build_cond_vector(&s, col, cat).unwrap();
                assert_eq!(v.values.iter().sum::<f64>(), 1.0);
                assert_eq!(v.values.len(), 5);
                seen.insert(v.values.iter().map(|x| *x as u8).collect::<Vec<_>>());
            }
        }
        // brute force: all 5 unit vectors of length 5
        let all: HashSet<Vec<u8>> = (0..5).map(|i| (0..5).map(|j| u8::from(i == j)).collect()).collect();
        assert_eq!(seen, all);
    }

    fn label_only(counts: &[usize]) -> Dataset {
        let schema = Arc::new(DataSchema::new(vec![ColumnSpec::discrete("y", ["a", "b", "c"])], "y").unwrap());
        let rows: Vec<Vec<Value>> = counts
            .iter()
            .enumerate()
            .flat_map(|(k, &n)| std::iter::repeat_n(vec![Value::Category(k)], n))
            .collect();
        Dataset::from_rows(schema, &rows).unwrap()
    }

    #[test]
    fn log_frequency_probabilities() {
        let data = label_only(&[99, 1, 0]);
        let sampler = CondSampler::from_data(&data, CategoryWeighting::LogFrequency).unwrap();
        let mut r = rng::seeded(3);
        let n = 100_000;
        let mut hits = [0usize; 3];
        for _ in 0..n {
            hits[sampler.sample(&mut r).1] += 1;
        }
        let expect = 2f64.ln() / (100f64.ln() + 2f64.ln());
        assert!((expect - 0.1308).abs() < 1e-3);
        assert!((hits[1] as f64 / n as f64 - expect).abs() < 0.01);
        assert_eq!(hits[2], 0);

        let data = label_only(&[50, 50, 0]);
        let mut r = rng::seeded(4);
        let mut a = 0;
        for _ in 0..n {
            if sample_training_condition(&data, &mut r).unwrap().1 == 0 {
                a += 1;
            }
        }
        assert!((a as f64 / n as f64 - 0.5).abs() < 0.01);
    }
}
