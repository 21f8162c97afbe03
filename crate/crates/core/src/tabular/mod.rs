//! Typed tabular data: schemas, datasets, CSV I/O, splitting and the row
//! encoder that maps raw records to model-space vectors.

mod csvio;
mod dataset;
mod encode;
mod schema;

pub use csvio::{format_sig9, load_csv, read_csv, write_csv, write_csv_to};
pub use dataset::{split, Dataset, Value};
pub use encode::{decode_row, encode_row, EncodedRow, Encoder, Span, SpanKind};
pub use schema::{ColumnKind, ColumnSpec, DataSchema, LabelKind};
