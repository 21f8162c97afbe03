use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnKind {
    Continuous,
    Discrete { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Continuous,
        }
    }

    pub fn discrete<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Discrete {
                categories: categories.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, ColumnKind::Continuous)
    }

    pub fn categories(&self) -> Option<&[String]> {
        match &self.kind {
            ColumnKind::Discrete { categories } => Some(categories),
            ColumnKind::Continuous => None,
        }
    }

    /// Number of categories, zero for continuous columns.
    pub fn cardinality(&self) -> usize {
        self.categories().map_or(0, <[String]>::len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LabelKind {
    Binary,
    Ordered { levels: usize },
}

/// Column layout of a dataset plus its designated label column.
///
/// Category order is authoritative: it fixes one-hot positions everywhere
/// downstream, independent of the order categories appear in data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemaFile", into = "SchemaFile")]
pub struct DataSchema {
    columns: Vec<ColumnSpec>,
    label: usize,
    label_kind: LabelKind,
}

impl DataSchema {
    /// Build and validate a schema. The label kind follows from the label's
    /// category count: two categories give a binary label, three or more an
    /// ordered one.
    pub fn new(columns: Vec<ColumnSpec>, label_column: &str) -> Result<Self> {
        let mut seen = HashSet::new();
        for col in &columns {
            if col.name.is_empty() {
                return Err(Error::Schema("empty column name".into()));
            }
            if !seen.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column '{}'", col.name)));
            }
            if let ColumnKind::Discrete { categories } = &col.kind {
                if categories.len() < 2 {
                    return Err(Error::Schema(format!(
                        "discrete column '{}' needs at least 2 categories",
                        col.name
                    )));
                }
                let mut cats = HashSet::new();
                for c in categories {
                    if !cats.insert(c.as_str()) {
                        return Err(Error::Schema(format!(
                            "column '{}' lists category '{}' twice",
                            col.name, c
                        )));
                    }
                }
            }
        }
        let label = columns
            .iter()
            .position(|c| c.name == label_column)
            .ok_or_else(|| Error::Schema(format!("label column '{label_column}' not found")))?;
        let levels = match &columns[label].kind {
            ColumnKind::Discrete { categories } => categories.len(),
            ColumnKind::Continuous => {
                return Err(Error::Schema(format!("label column '{label_column}' must be discrete")))
            }
        };
        let label_kind = if levels == 2 {
            LabelKind::Binary
        } else {
            LabelKind::Ordered { levels }
        };
        Ok(DataSchema {
            columns,
            label,
            label_kind,
        })
    }

    /// Parse a schema file (TOML).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SchemaFile = toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        DataSchema::try_from(file).map_err(Error::Schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&SchemaFile::from(self.clone())).expect("schema serializes")
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> &ColumnSpec {
        &self.columns[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn require_index(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown column '{name}'")))
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn label_index(&self) -> usize {
        self.label
    }

    pub fn label_name(&self) -> &str {
        &self.columns[self.label].name
    }

    pub fn label_kind(&self) -> LabelKind {
        self.label_kind
    }

    pub fn n_classes(&self) -> usize {
        self.columns[self.label].cardinality()
    }

    pub fn class_names(&self) -> &[String] {
        self.columns[self.label].categories().expect("label is discrete")
    }

    /// Indices of continuous columns, in schema order.
    pub fn continuous_indices(&self) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&i| self.columns[i].is_continuous())
            .collect()
    }

    /// Indices of discrete columns (label included), in schema order.
    pub fn discrete_indices(&self) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&i| !self.columns[i].is_continuous())
            .collect()
    }

    pub fn n_continuous(&self) -> usize {
        self.continuous_indices().len()
    }

    pub fn n_discrete(&self) -> usize {
        self.discrete_indices().len()
    }

    pub fn category_index(&self, column: usize, name: &str) -> Option<usize> {
        self.columns[column].categories()?.iter().position(|c| c == name)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SchemaFile {
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label_kind: Option<String>,
    columns: Vec<ColumnEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ColumnEntry {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    categories: Option<Vec<String>>,
}

impl TryFrom<SchemaFile> for DataSchema {
    type Error = String;

    fn try_from(file: SchemaFile) -> std::result::Result<Self, String> {
        let mut columns = Vec::with_capacity(file.columns.len());
        for entry in file.columns {
            let kind = match (entry.kind.as_str(), entry.categories) {
                ("continuous", None) => ColumnKind::Continuous,
                ("continuous", Some(_)) => {
                    return Err(format!("continuous column '{}' cannot list categories", entry.name))
                }
                ("discrete", Some(categories)) => ColumnKind::Discrete { categories },
                ("discrete", None) => {
                    return Err(format!("discrete column '{}' needs categories", entry.name))
                }
                (other, _) => return Err(format!("column '{}': unknown kind '{other}'", entry.name)),
            };
            columns.push(ColumnSpec { name: entry.name, kind });
        }
        let schema = DataSchema::new(columns, &file.label).map_err(|e| e.to_string())?;
        match (file.label_kind.as_deref(), schema.label_kind) {
            (None, _) | (Some("binary"), LabelKind::Binary) | (Some("ordered"), LabelKind::Ordered { .. }) => Ok(schema),
            (Some(k), actual) => Err(format!(
                "label_kind '{k}' does not match the label's {} categories ({actual:?})",
                schema.n_classes()
            )),
        }
    }
}

impl From<DataSchema> for SchemaFile {
    fn from(schema: DataSchema) -> Self {
        let label_kind = match schema.label_kind {
            LabelKind::Binary => "binary",
            LabelKind::Ordered { .. } => "ordered",
        };
        SchemaFile {
            label: schema.label_name().to_string(),
            label_kind: Some(label_kind.to_string()),
            columns: schema
                .columns
                .into_iter()
                .map(|c| match c.kind {
                    ColumnKind::Continuous => ColumnEntry {
                        name: c.name,
                        kind: "continuous".into(),
                        categories: None,
                    },
                    ColumnKind::Discrete { categories } => ColumnEntry {
                        name: c.name,
                        kind: "discrete".into(),
                        categories: Some(categories),
                    },
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &str = r#"
label = "severity"
label_kind = "binary"

[[columns]]
name = "curvature"
kind = "continuous"

[[columns]]
name = "age"
kind = "discrete"
categories = ["<=25", "26-65", ">=66"]

[[columns]]
name = "severity"
kind = "discrete"
categories = ["nFI", "FI"]
"#;

    #[test]
    fn parses_schema_file() {
        let s = DataSchema::from_toml_str(SCHEMA).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.label_name(), "severity");
        assert_eq!(s.label_kind(), LabelKind::Binary);
        assert_eq!(s.continuous_indices(), vec![0]);
        assert_eq!(s.discrete_indices(), vec![1, 2]);
        let back = DataSchema::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_invalid_schemas() {
        let dup = vec![ColumnSpec::continuous("a"), ColumnSpec::continuous("a")];
        assert!(DataSchema::new(dup, "a").is_err());
        let cont_label = vec![ColumnSpec::continuous("a")];
        assert!(DataSchema::new(cont_label, "a").is_err());
        let one_cat = vec![ColumnSpec::discrete("y", ["only"])];
        assert!(DataSchema::new(one_cat, "y").is_err());
        let dup_cat = vec![ColumnSpec::discrete("y", ["a", "a"])];
        assert!(DataSchema::new(dup_cat, "y").is_err());
        let missing = vec![ColumnSpec::discrete("y", ["a", "b"])];
        assert!(DataSchema::new(missing, "z").is_err());
    }

    #[test]
    fn ordered_label_levels() {
        let s = DataSchema::new(vec![ColumnSpec::discrete("y", ["0", "1", "2"])], "y").unwrap();
        assert_eq!(s.label_kind(), LabelKind::Ordered { levels: 3 });
        let wrong = SCHEMA.replace("label_kind = \"binary\"", "label_kind = \"ordered\"");
        assert!(DataSchema::from_toml_str(&wrong).is_err());
    }
}
