use std::sync::Arc;

use rand::seq::SliceRandom;

use super::schema::{ColumnKind, DataSchema};
use crate::error::{Error, Result};
use crate::rng;

/// A single cell: a finite real for continuous columns, a category index for
/// discrete ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Real(f64),
    Category(usize),
}

impl Value {
    pub fn as_real(self) -> Option<f64> {
        match self {
            Value::Real(v) => Some(v),
            Value::Category(_) => None,
        }
    }

    pub fn as_category(self) -> Option<usize> {
        match self {
            Value::Category(c) => Some(c),
            Value::Real(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum ColumnData {
    Real(Vec<f64>),
    Category(Vec<usize>),
}

impl ColumnData {
    fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Real(v) => ColumnData::Real(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Category(v) => ColumnData::Category(rows.iter().map(|&r| v[r]).collect()),
        }
    }
}

/// Column-major table conforming to a [`DataSchema`]. Every continuous value
/// is finite and every category index is in range; constructors enforce it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<DataSchema>,
    columns: Vec<ColumnData>,
    n_rows: usize,
}

impl Dataset {
    pub fn empty(schema: Arc<DataSchema>) -> Self {
        let columns = schema
            .columns()
            .iter()
            .map(|c| match c.kind {
                ColumnKind::Continuous => ColumnData::Real(Vec::new()),
                ColumnKind::Discrete { .. } => ColumnData::Category(Vec::new()),
            })
            .collect();
        Dataset {
            schema,
            columns,
            n_rows: 0,
        }
    }

    pub fn from_rows(schema: Arc<DataSchema>, rows: &[Vec<Value>]) -> Result<Self> {
        let mut data = Dataset::empty(schema);
        for row in rows {
            data.push_row(row)?;
        }
        Ok(data)
    }

    pub fn push_row(&mut self, row: &[Value]) -> Result<()> {
        self.check_row(row)?;
        for (col, value) in self.columns.iter_mut().zip(row) {
            match (col, value) {
                (ColumnData::Real(v), Value::Real(x)) => v.push(*x),
                (ColumnData::Category(v), Value::Category(c)) => v.push(*c),
                _ => unreachable!("checked"),
            }
        }
        self.n_rows += 1;
        Ok(())
    }

    fn check_row(&self, row: &[Value]) -> Result<()> {
        if row.len() != self.schema.len() {
            return Err(Error::Shape(format!(
                "row has {} values, schema has {} columns",
                row.len(),
                self.schema.len()
            )));
        }
        for (spec, value) in self.schema.columns().iter().zip(row) {
            match (&spec.kind, value) {
                (ColumnKind::Continuous, Value::Real(x)) if x.is_finite() => {}
                (ColumnKind::Continuous, Value::Real(x)) => {
                    return Err(Error::NonFinite(format!("column '{}' value {x}", spec.name)))
                }
                (ColumnKind::Discrete { categories }, Value::Category(c)) if *c < categories.len() => {}
                (ColumnKind::Discrete { categories }, Value::Category(c)) => {
                    return Err(Error::InvalidArgument(format!(
                        "column '{}': category index {c} out of range (0..{})",
                        spec.name,
                        categories.len()
                    )))
                }
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "column '{}': value {value:?} has the wrong kind",
                        spec.name
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> &DataSchema {
        &self.schema
    }

    pub fn schema_arc(&self) -> Arc<DataSchema> {
        Arc::clone(&self.schema)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    /// Values of a continuous column.
    ///
    /// # Panics
    /// If the column is discrete.
    pub fn real_column(&self, column: usize) -> &[f64] {
        match &self.columns[column] {
            ColumnData::Real(v) => v,
            ColumnData::Category(_) => panic!("column {column} is discrete"),
        }
    }

    /// Category indices of a discrete column.
    ///
    /// # Panics
    /// If the column is continuous.
    pub fn category_column(&self, column: usize) -> &[usize] {
        match &self.columns[column] {
            ColumnData::Category(v) => v,
            ColumnData::Real(_) => panic!("column {column} is continuous"),
        }
    }

    pub fn labels(&self) -> &[usize] {
        self.category_column(self.schema.label_index())
    }

    pub fn value(&self, row: usize, column: usize) -> Value {
        match &self.columns[column] {
            ColumnData::Real(v) => Value::Real(v[row]),
            ColumnData::Category(v) => Value::Category(v[row]),
        }
    }

    pub fn row(&self, row: usize) -> Vec<Value> {
        (0..self.columns.len()).map(|c| self.value(row, c)).collect()
    }

    /// Row count per category of a discrete column.
    pub fn category_counts(&self, column: usize) -> Vec<usize> {
        let mut counts = vec![0; self.schema.column(column).cardinality()];
        for &c in self.category_column(column) {
            counts[c] += 1;
        }
        counts
    }

    /// Row count per label class.
    pub fn class_counts(&self) -> Vec<usize> {
        self.category_counts(self.schema.label_index())
    }

    pub fn rows_of_class(&self, class: usize) -> Vec<usize> {
        self.labels()
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect()
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: Arc::clone(&self.schema),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            n_rows: rows.len(),
        }
    }

    /// Append all rows of `other`, which must share this schema.
    pub fn append(&mut self, other: &Dataset) -> Result<()> {
        if self.schema != other.schema {
            return Err(Error::Schema("cannot append datasets with different schemas".into()));
        }
        for (a, b) in self.columns.iter_mut().zip(&other.columns) {
            match (a, b) {
                (ColumnData::Real(a), ColumnData::Real(b)) => a.extend_from_slice(b),
                (ColumnData::Category(a), ColumnData::Category(b)) => a.extend_from_slice(b),
                _ => unreachable!("schemas match"),
            }
        }
        self.n_rows += other.n_rows;
        Ok(())
    }
}

/// Seeded random train/test partition. The training half receives
/// `round(train_fraction * n)` rows; both halves keep the original row order.
pub fn split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    if data.is_empty() {
        return Err(Error::InsufficientData("cannot split an empty dataset".into()));
    }
    let n = data.n_rows();
    let n_train = (train_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    let (train, test) = order.split_at_mut(n_train);
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.select(train), data.select(test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::ColumnSpec;
    use proptest::prelude::*;

    fn schema() -> Arc<DataSchema> {
        Arc::new(
            DataSchema::new(
                vec![ColumnSpec::continuous("x"), ColumnSpec::discrete("y", ["no", "yes"])],
                "y",
            )
            .unwrap(),
        )
    }

    fn dataset(n: usize) -> Dataset {
        let rows: Vec<_> = (0..n)
            .map(|i| vec![Value::Real(i as f64), Value::Category(i % 2)])
            .collect();
        Dataset::from_rows(schema(), &rows).unwrap()
    }

    #[test]
    fn validates_rows() {
        let mut d = Dataset::empty(schema());
        assert!(d.push_row(&[Value::Real(f64::NAN), Value::Category(0)]).is_err());
        assert!(d.push_row(&[Value::Real(1.0), Value::Category(2)]).is_err());
        assert!(d.push_row(&[Value::Category(0), Value::Category(0)]).is_err());
        assert!(d.push_row(&[Value::Real(1.0)]).is_err());
        d.push_row(&[Value::Real(1.0), Value::Category(1)]).unwrap();
        assert_eq!(d.class_counts(), vec![0, 1]);
    }

    #[test]
    fn split_sizes_match_reported_designs() {
        // Sizes only depend on n and the fraction.
        for (n, train, test) in [(157_080usize, 109_956usize, 47_124usize), (906, 634, 272)] {
            let n_train = (0.7 * n as f64).round() as usize;
            assert_eq!(n_train, train);
            assert_eq!(n - n_train, test);
        }
        let (tr, te) = split(&dataset(906), 0.7, 3).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (634, 272));
    }

    #[test]
    fn split_is_deterministic() {
        let d = dataset(10);
        let a = split(&d, 0.5, 11).unwrap();
        let b = split(&d, 0.5, 11).unwrap();
        assert_eq!(a, b);
        assert!(split(&d, 1.0, 1).is_err());
        assert!(split(&d, 0.0, 1).is_err());
        assert!(split(&Dataset::empty(schema()), 0.5, 1).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 2usize..200, frac in 0.05f64..0.95, seed in any::<u64>()) {
            let d = dataset(n);
            let (tr, te) = split(&d, frac, seed).unwrap();
            prop_assert_eq!(tr.n_rows(), (frac * n as f64).round() as usize);
            let mut all: Vec<f64> = tr.real_column(0).iter().chain(te.real_column(0)).copied().collect();
            all.sort_by(f64::total_cmp);
            let expected: Vec<f64> = (0..n).map(|i| i as f64).collect();
            prop_assert_eq!(all, expected);
        }
    }
}
