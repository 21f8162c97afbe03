use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Value};
use super::schema::DataSchema;
use crate::error::{Error, Result};
use crate::mode_norm::{self, ModeModel};

/// Model-space row: `[α₁, β₁, …, α_Nc, β_Nc, d₁, …, d_Nd]`, where β and d are
/// one-hot blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedRow(pub Vec<f64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpanKind {
    /// Scalar offset inside the selected mode, in [-1, 1].
    Alpha,
    /// One-hot mode indicator.
    Mode,
    /// One-hot category of a discrete column.
    Category,
}

/// A contiguous block of the encoded vector belonging to one source column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub column: usize,
    pub kind: SpanKind,
    pub start: usize,
    pub width: usize,
}

impl Span {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.width
    }
}

/// Encoder/decoder between schema rows and encoded vectors.
#[derive(Debug, Clone)]
pub struct Encoder {
    schema: Arc<DataSchema>,
    models: Vec<ModeModel>,
    spans: Vec<Span>,
    width: usize,
}

impl Encoder {
    /// `models` holds one fitted mixture per continuous column, in schema order.
    pub fn new(schema: Arc<DataSchema>, models: Vec<ModeModel>) -> Result<Self> {
        let cont = schema.continuous_indices();
        if cont.len() != models.len() {
            return Err(Error::Shape(format!(
                "{} mode models for {} continuous columns",
                models.len(),
                cont.len()
            )));
        }
        let mut spans = Vec::new();
        let mut start = 0;
        for (&column, model) in cont.iter().zip(&models) {
            spans.push(Span {
                column,
                kind: SpanKind::Alpha,
                start,
                width: 1,
            });
            start += 1;
            spans.push(Span {
                column,
                kind: SpanKind::Mode,
                start,
                width: model.n_modes(),
            });
            start += model.n_modes();
        }
        for column in schema.discrete_indices() {
            let width = schema.column(column).cardinality();
            spans.push(Span {
                column,
                kind: SpanKind::Category,
                start,
                width,
            });
            start += width;
        }
        Ok(Encoder {
            schema,
            models,
            spans,
            width: start,
        })
    }

    /// Fit one mixture per continuous column of `data`.
    pub fn fit(data: &Dataset, max_modes: usize, weight_threshold: f64, seed: u64) -> Result<Self> {
        let schema = data.schema_arc();
        let models = schema
            .continuous_indices()
            .into_iter()
            .map(|c| {
                let mut m = mode_norm::fit_vgm(
                    data.real_column(c),
                    max_modes,
                    weight_threshold,
                    crate::rng::derive_seed(seed, &schema.column(c).name),
                )?;
                m.column = schema.column(c).name.clone();
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?;
        Encoder::new(schema, models)
    }

    pub fn schema(&self) -> &DataSchema {
        &self.schema
    }

    pub fn schema_arc(&self) -> Arc<DataSchema> {
        Arc::clone(&self.schema)
    }

    pub fn mode_models(&self) -> &[ModeModel] {
        &self.models
    }

    pub fn spans(&self) -> &[Span] {
        &self.spans
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// The one-hot span of a discrete column.
    pub fn category_span(&self, column: usize) -> Option<&Span> {
        self.spans
            .iter()
            .find(|s| s.column == column && s.kind == SpanKind::Category)
    }

    pub fn encode<R: Rng + ?Sized>(&self, row: &[Value], rng: &mut R) -> Result<EncodedRow> {
        if row.len() != self.schema.len() {
            return Err(Error::Shape(format!(
                "row has {} values, schema has {} columns",
                row.len(),
                self.schema.len()
            )));
        }
        let mut out = vec![0.0; self.width];
        let mut model_iter = self.models.iter();
        let mut pending_mode = 0;
        for span in &self.spans {
            match span.kind {
                SpanKind::Alpha => {
                    let v = row[span.column]
                        .as_real()
                        .ok_or_else(|| Error::InvalidArgument(format!("column {} expects a real", span.column)))?;
                    let model = model_iter.next().expect("one model per alpha span");
                    let (alpha, mode) = mode_norm::normalize(v, model, rng);
                    out[span.start] = alpha;
                    pending_mode = mode;
                }
                SpanKind::Mode => out[span.start + pending_mode] = 1.0,
                SpanKind::Category => {
                    let c = row[span.column].as_category().ok_or_else(|| {
                        Error::InvalidArgument(format!("column {} expects a category", span.column))
                    })?;
                    if c >= span.width {
                        return Err(Error::InvalidArgument(format!(
                            "category {c} out of range for column {}",
                            span.column
                        )));
                    }
                    out[span.start + c] = 1.0;
                }
            }
        }
        Ok(EncodedRow(out))
    }

    /// Encode every row into a row-major `n × width` buffer.
    pub fn encode_dataset<R: Rng + ?Sized>(&self, data: &Dataset, rng: &mut R) -> Result<Vec<f64>> {
        if data.schema() != self.schema.as_ref() {
            return Err(Error::Schema("dataset schema differs from encoder schema".into()));
        }
        let mut out = Vec::with_capacity(data.n_rows() * self.width);
        for r in 0..data.n_rows() {
            out.extend(self.encode(&data.row(r), rng)?.0);
        }
        Ok(out)
    }

    /// Invert [`Encoder::encode`]: argmax of each one-hot block, continuous
    /// values denormalized within the argmax mode. Accepts soft generator
    /// outputs as well as exact one-hot rows.
    pub fn decode(&self, encoded: &[f64]) -> Result<Vec<Value>> {
        if encoded.len() != self.width {
            return Err(Error::Shape(format!(
                "encoded length {} != expected {}",
                encoded.len(),
                self.width
            )));
        }
        let mut row = vec![Value::Category(0); self.schema.len()];
        let mut model_iter = self.models.iter();
        let mut alpha = 0.0;
        for span in &self.spans {
            let block = &encoded[span.range()];
            match span.kind {
                SpanKind::Alpha => alpha = block[0].clamp(-1.0, 1.0),
                SpanKind::Mode => {
                    let model = model_iter.next().expect("one model per mode span");
                    let v = mode_norm::denormalize(alpha, argmax(block), model)?;
                    row[span.column] = Value::Real(v);
                }
                SpanKind::Category => row[span.column] = Value::Category(argmax(block)),
            }
        }
        Ok(row)
    }
}

/// Index of the first maximal entry.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Encode one row given per-continuous-column mode models.
pub fn encode_row<R: Rng + ?Sized>(
    row: &[Value],
    mode_models: &[ModeModel],
    schema: &DataSchema,
    rng: &mut R,
) -> Result<EncodedRow> {
    Encoder::new(Arc::new(schema.clone()), mode_models.to_vec())?.encode(row, rng)
}

pub fn decode_row(encoded: &EncodedRow, mode_models: &[ModeModel], schema: &DataSchema) -> Result<Vec<Value>> {
    Encoder::new(Arc::new(schema.clone()), mode_models.to_vec())?.decode(&encoded.0)
}
