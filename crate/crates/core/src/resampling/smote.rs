use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::tabular::{Dataset, Value};

/// Neighbour structure of one class under the SMOTE-NC metric.
#[derive(Debug, Clone)]
pub struct SmoteNeighbors {
    /// Dataset rows belonging to the class.
    pub members: Vec<usize>,
    /// For each member, positions (into `members`) of its k nearest others.
    pub neighbors: Vec<Vec<usize>>,
    /// Nominal value assigned to every synthetic row seeded by that member.
    pub votes: Vec<Vec<(usize, usize)>>,
    /// Penalty added per mismatched nominal feature.
    pub mismatch_penalty: f64,
}

fn std_dev(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

impl SmoteNeighbors {
    pub fn build(data: &Dataset, class: usize, k: usize) -> Result<Self> {
        let schema = data.schema();
        let conts = schema.continuous_indices();
        if conts.is_empty() {
            return Err(Error::InvalidArgument("SMOTE-NC needs at least one continuous column".into()));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("k_neighbors must be at least 1".into()));
        }
        let members = data.rows_of_class(class);
        if members.len() <= k {
            return Err(Error::InsufficientData(format!(
                "class {class} has {} rows; SMOTE-NC with k = {k} needs more than k",
                members.len()
            )));
        }
        let label = schema.label_index();
        let nominal: Vec<usize> = schema.discrete_indices().into_iter().filter(|&c| c != label).collect();

        let stds: Vec<f64> = conts
            .iter()
            .map(|&c| {
                let col = data.real_column(c);
                std_dev(members.iter().map(|&r| col[r]))
            })
            .collect();
        let mut sorted = stds.clone();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let med = if sorted.len() % 2 == 1 { sorted[mid] } else { (sorted[mid - 1] + sorted[mid]) / 2.0 };
        let mismatch_penalty = med * med;
        let scale: Vec<f64> = stds.iter().map(|&s| if s > 0.0 { s } else { 1.0 }).collect();

        let z: Vec<Vec<f64>> = members
            .iter()
            .map(|&r| conts.iter().zip(&scale).map(|(&c, s)| data.real_column(c)[r] / s).collect())
            .collect();
        let cats: Vec<Vec<usize>> = members
            .iter()
            .map(|&r| nominal.iter().map(|&c| data.category_column(c)[r]).collect())
            .collect();

        let m = members.len();
        let mut neighbors = Vec::with_capacity(m);
        let mut votes = Vec::with_capacity(m);
        for i in 0..m {
            let mut d: Vec<(f64, usize)> = (0..m)
                .filter(|&j| j != i)
                .map(|j| {
                    let cont: f64 = z[i].iter().zip(&z[j]).map(|(a, b)| (a - b).powi(2)).sum();
                    let miss = cats[i].iter().zip(&cats[j]).filter(|(a, b)| a != b).count();
                    (cont + miss as f64 * mismatch_penalty, j)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let nn: Vec<usize> = d[..k].iter().map(|&(_, j)| j).collect();
            let vote = nominal
                .iter()
                .enumerate()
                .map(|(f, &c)| {
                    let mut tally = vec![0usize; schema.column(c).cardinality()];
                    for &j in &nn {
                        tally[cats[j][f]] += 1;
                    }
                    // max_by_key keeps the last maximum, so scan in reverse for the lowest index
                    let best = (0..tally.len()).rev().max_by_key(|&v| tally[v]).expect("non-empty");
                    (c, best)
                })
                .collect();
            neighbors.push(nn);
            votes.push(vote);
        }
        Ok(Self {
            members,
            neighbors,
            votes,
            mismatch_penalty,
        })
    }
}

/// Append `n_synthetic` SMOTE-NC rows of `minority_class`.
pub fn smote_nc(data: &Dataset, minority_class: usize, k_neighbors: usize, n_synthetic: usize, seed: u64) -> Result<Dataset> {
    let nb = SmoteNeighbors::build(data, minority_class, k_neighbors)?;
    let conts = data.schema().continuous_indices();
    let mut out = data.clone();
    let mut r = rng::substream(seed, "resample.smote");
    for _ in 0..n_synthetic {
        let i = r.random_range(0..nb.members.len());
        let j = nb.neighbors[i][r.random_range(0..k_neighbors)];
        let t = loop {
            let t: f64 = r.random();
            if t > 0.0 {
                break t;
            }
        };
        let (a, b) = (nb.members[i], nb.members[j]);
        let mut row = data.row(a);
        for &c in &conts {
            let (x, y) = (data.real_column(c)[a], data.real_column(c)[b]);
            row[c] = Value::Real(x + t * (y - x));
        }
        for &(c, v) in &nb.votes[i] {
            row[c] = Value::Category(v);
        }
        out.push_row(&row)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{ColumnSpec, DataSchema};
    use std::sync::Arc;

    fn fixture() -> Dataset {
        let schema = Arc::new(
            DataSchema::new(
                vec![
                    ColumnSpec::continuous("x"),
                    ColumnSpec::continuous("w"),
                    ColumnSpec::discrete("road", ["a", "b", "c"]),
                    ColumnSpec::discrete("y", ["maj", "min"]),
                ],
                "y",
            )
            .unwrap(),
        );
        let mut rows = Vec::new();
        for i in 0..30 {
            rows.push(vec![Value::Real(i as f64), Value::Real(-(i as f64)), Value::Category(i % 3), Value::Category(0)]);
        }
        for (x, w, road) in [(0.0, 1.0, 0), (1.0, 3.0, 1), (2.5, 2.0, 1), (4.0, 0.5, 2), (7.0, 1.5, 1)] {
            rows.push(vec![Value::Real(x), Value::Real(w), Value::Category(road), Value::Category(1)]);
        }
        Dataset::from_rows(schema, &rows).unwrap()
    }

    #[test]
    fn zero_synthetic_is_identity() {
        let d = fixture();
        assert_eq!(smote_nc(&d, 1, 3, 0, 1).unwrap(), d);
    }

    #[test]
    fn originals_kept_and_counts() {
        let d = fixture();
        let out = smote_nc(&d, 1, 3, 40, 2).unwrap();
        assert_eq!(out.class_counts(), vec![30, 45]);
        assert_eq!(out.select(&(0..35).collect::<Vec<_>>()), d);
    }

    #[test]
    fn synthetic_rows_within_minority_hull() {
        let d = fixture();
        let out = smote_nc(&d, 1, 3, 200, 3).unwrap();
        for i in 35..out.n_rows() {
            let x = out.real_column(0)[i];
            assert!((0.0..=7.0).contains(&x));
        }
    }

    #[test]
    fn preconditions() {
        let d = fixture();
        assert!(smote_nc(&d, 1, 5, 1, 1).is_err());
        assert!(smote_nc(&d, 1, 0, 1, 1).is_err());
        let schema = Arc::new(DataSchema::new(vec![ColumnSpec::discrete("y", ["a", "b"])], "y").unwrap());
        let rows: Vec<Vec<Value>> = (0..10).map(|i| vec![Value::Category(i % 2)]).collect();
        let only_nominal = Dataset::from_rows(schema, &rows).unwrap();
        assert!(smote_nc(&only_nominal, 1, 2, 1, 1).is_err());
    }

    #[test]
    fn vote_prefers_lowest_category_on_ties() {
        let d = fixture();
        let nb = SmoteNeighbors::build(&d, 1, 2).unwrap();
        let road = d.category_column(2);
        for (i, vote) in nb.votes.iter().enumerate() {
            let mut tally = [0usize; 3];
            for &j in &nb.neighbors[i] {
                tally[road[nb.members[j]]] += 1;
            }
            let top = *tally.iter().max().unwrap();
            assert_eq!(vote[0], (2, tally.iter().position(|&t| t == top).unwrap()));
        }
        assert!(nb.mismatch_penalty > 0.0);
    }

    #[test]
    fn deterministic() {
        let d = fixture();
        assert_eq!(smote_nc(&d, 1, 3, 25, 8).unwrap(), smote_nc(&d, 1, 3, 25, 8).unwrap());
        assert_ne!(smote_nc(&d, 1, 3, 25, 8).unwrap(), smote_nc(&d, 1, 3, 25, 9).unwrap());
    }
}
