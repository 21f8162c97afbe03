use ndarray::Array2;

use crate::error::{Error, Result};
use crate::tabular::{ColumnKind, Dataset};

/// Feature matrix plus response. Discrete predictors are dummy coded against
/// their first category.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    x: Array2<f64>,
    names: Vec<String>,
    y: Vec<usize>,
    n_classes: usize,
    intercept: bool,
}

impl DesignMatrix {
    /// `x` must already contain the intercept column when `intercept` is set.
    pub fn new(x: Array2<f64>, names: Vec<String>, y: Vec<usize>, n_classes: usize, intercept: bool) -> Result<Self> {
        if names.len() != x.ncols() {
            return Err(Error::Shape(format!("{} names for {} columns", names.len(), x.ncols())));
        }
        if y.len() != x.nrows() {
            return Err(Error::Shape(format!("{} responses for {} rows", y.len(), x.nrows())));
        }
        if let Some((i, _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("design entry {i:?}")));
        }
        if n_classes < 2 {
            return Err(Error::InvalidArgument("response needs at least two classes".into()));
        }
        if let Some(&bad) = y.iter().find(|&&v| v >= n_classes) {
            return Err(Error::InvalidArgument(format!("response {bad} outside 0..{n_classes}")));
        }
        if x.nrows() < x.ncols() + 1 {
            return Err(Error::InsufficientData(format!(
                "{} rows for {} features",
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(DesignMatrix {
            x,
            names,
            y,
            n_classes,
            intercept,
        })
    }

    /// Build from a dataset: every non-label column becomes a predictor, the
    /// label becomes the response.
    pub fn from_dataset(data: &Dataset, intercept: bool) -> Result<Self> {
        let schema = data.schema();
        let label = schema.label_index();
        let mut names = Vec::new();
        let mut cols: Vec<Vec<f64>> = Vec::new();
        if intercept {
            names.push("(Intercept)".to_string());
            cols.push(vec![1.0; data.n_rows()]);
        }
        for (c, spec) in schema.columns().iter().enumerate() {
            if c == label {
                continue;
            }
            match &spec.kind {
                ColumnKind::Continuous => {
                    names.push(spec.name.clone());
                    cols.push(data.real_column(c).to_vec());
                }
                ColumnKind::Discrete { categories } => {
                    let values = data.category_column(c);
                    for (k, cat) in categories.iter().enumerate().skip(1) {
                        names.push(format!("{}[{}]", spec.name, cat));
                        cols.push(values.iter().map(|&v| f64::from(u8::from(v == k))).collect());
                    }
                }
            }
        }
        let n = data.n_rows();
        let x = Array2::from_shape_fn((n, cols.len()), |(i, j)| cols[j][i]);
        Self::new(x, names, data.labels().to_vec(), schema.n_classes(), intercept)
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn y(&self) -> &[usize] {
        &self.y
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Predictor values of one row, excluding the intercept column.
    pub fn features(&self, row: usize) -> Vec<f64> {
        let skip = usize::from(self.intercept);
        self.x.row(row).iter().skip(skip).copied().collect()
    }

    pub(crate) fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &v in &self.y {
            c[v] += 1;
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{ColumnSpec, DataSchema, Value};
    use std::sync::Arc;

    #[test]
    fn dummy_coding_against_first_category() {
        let schema = Arc::new(
            DataSchema::new(
                vec![
                    ColumnSpec::continuous("speed"),
                    ColumnSpec::discrete("light", ["day", "dusk", "dark"]),
                    ColumnSpec::discrete("y", ["n", "f"]),
                ],
                "y",
            )
            .unwrap(),
        );
        let rows = vec![
            vec![Value::Real(30.0), Value::Category(0), Value::Category(0)],
            vec![Value::Real(55.0), Value::Category(2), Value::Category(1)],
            vec![Value::Real(40.0), Value::Category(1), Value::Category(0)],
            vec![Value::Real(70.0), Value::Category(2), Value::Category(1)],
            vec![Value::Real(20.0), Value::Category(0), Value::Category(0)],
        ];
        let d = Dataset::from_rows(schema, &rows).unwrap();
        let m = DesignMatrix::from_dataset(&d, true).unwrap();
        assert_eq!(m.names(), &["(Intercept)", "speed", "light[dusk]", "light[dark]"]);
        assert_eq!(m.x().row(1).to_vec(), vec![1.0, 55.0, 0.0, 1.0]);
        assert_eq!(m.x().row(2).to_vec(), vec![1.0, 40.0, 1.0, 0.0]);
        assert_eq!(m.y(), &[0, 1, 0, 1, 0]);
        assert_eq!(m.features(1), vec![55.0, 0.0, 1.0]);
        let no_int = DesignMatrix::from_dataset(&d, false).unwrap();
        assert_eq!(no_int.n_features(), 3);
    }

    #[test]
    fn validation() {
        let x = Array2::zeros((3, 1));
        assert!(DesignMatrix::new(x.clone(), vec!["a".into()], vec![0, 1, 2], 2, false).is_err());
        assert!(DesignMatrix::new(x.clone(), vec![], vec![0, 1, 0], 2, false).is_err());
        let mut bad = x.clone();
        bad[(0, 0)] = f64::NAN;
        assert!(DesignMatrix::new(bad, vec!["a".into()], vec![0, 1, 0], 2, false).is_err());
        assert!(DesignMatrix::new(Array2::zeros((2, 2)), vec!["a".into(), "b".into()], vec![0, 1], 2, false).is_err());
    }
}
