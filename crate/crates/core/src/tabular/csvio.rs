use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::dataset::{Dataset, Value};
use super::schema::{ColumnKind, DataSchema};
use crate::error::{Error, Result};

/// Load a CSV file whose header names exactly the schema's columns, in any
/// order. Row numbers in errors are 1-based file lines (the header is line 1).
pub fn load_csv(path: impl AsRef<Path>, schema: Arc<DataSchema>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, &path.display().to_string())
}

pub fn read_csv<R: Read>(reader: R, schema: Arc<DataSchema>, source: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let file_err = |message: String| Error::File {
        path: source.to_string(),
        message,
    };
    let headers = rdr.headers().map_err(|e| file_err(e.to_string()))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(file_err("empty file".into()));
    }
    // position in the record for each schema column
    let mut positions = Vec::with_capacity(schema.len());
    for col in schema.columns() {
        let pos = headers
            .iter()
            .position(|h| h == col.name)
            .ok_or_else(|| file_err(format!("missing column '{}'", col.name)))?;
        positions.push(pos);
    }
    if let Some(extra) = headers.iter().find(|h| schema.index_of(h).is_none()) {
        return Err(file_err(format!("column '{extra}' is not in the schema")));
    }

    let mut data = Dataset::empty(Arc::clone(&schema));
    let mut row = Vec::with_capacity(schema.len());
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| file_err(format!("line {line}: {e}")))?;
        row.clear();
        for (col, &pos) in schema.columns().iter().zip(&positions) {
            let parse_err = |message: String| Error::Parse {
                path: source.to_string(),
                row: line,
                column: col.name.clone(),
                message,
            };
            let raw = record.get(pos).unwrap_or("");
            if raw.is_empty() {
                return Err(parse_err("missing value".into()));
            }
            let value = match &col.kind {
                ColumnKind::Continuous => {
                    let v: f64 = raw
                        .parse()
                        .map_err(|_| parse_err(format!("cannot parse '{raw}' as a number")))?;
                    if !v.is_finite() {
                        return Err(parse_err(format!("non-finite value '{raw}'")));
                    }
                    Value::Real(v)
                }
                ColumnKind::Discrete { categories } => {
                    let idx = categories
                        .iter()
                        .position(|c| c == raw)
                        .ok_or_else(|| parse_err(format!("unknown category '{raw}'")))?;
                    Value::Category(idx)
                }
            };
            row.push(value);
        }
        data.push_row(&row)?;
    }
    if data.is_empty() {
        return Err(file_err("empty file: no data rows".into()));
    }
    Ok(data)
}

pub fn write_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(std::io::BufWriter::new(file), data).map_err(|e| match e {
        Error::File { message, .. } => Error::File {
            path: path.display().to_string(),
            message,
        },
        other => other,
    })
}

/// Header in schema order; category names verbatim; reals with 9 significant digits.
pub fn write_csv_to<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::File {
        path: "<csv>".into(),
        message: e.to_string(),
    };
    let schema = data.schema();
    wtr.write_record(schema.columns().iter().map(|c| c.name.as_str()))
        .map_err(err)?;
    let mut fields = Vec::with_capacity(schema.len());
    for r in 0..data.n_rows() {
        fields.clear();
        for (c, col) in schema.columns().iter().enumerate() {
            fields.push(match data.value(r, c) {
                Value::Real(v) => format_sig9(v),
                Value::Category(k) => col.categories().expect("discrete")[k].clone(),
            });
        }
        wtr.write_record(&fields).map_err(err)?;
    }
    wtr.flush().map_err(|e| Error::File {
        path: "<csv>".into(),
        message: e.to_string(),
    })
}

/// Format with 9 significant digits, `%.9g` style: fixed notation for
/// moderate exponents, scientific otherwise, trailing zeros trimmed.
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::ColumnSpec;

    fn schema() -> Arc<DataSchema> {
        Arc::new(
            DataSchema::new(
                vec![
                    ColumnSpec::continuous("grade"),
                    ColumnSpec::discrete("severity", ["nFI", "FI"]),
                ],
                "severity",
            )
            .unwrap(),
        )
    }

    #[test]
    fn parses_three_rows_in_any_column_order() {
        let text = "severity,grade\nnFI,1.5\nFI,-2\nnFI,0.25\n";
        let d = read_csv(text.as_bytes(), schema(), "mem").unwrap();
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.real_column(0), &[1.5, -2.0, 0.25]);
        assert_eq!(d.labels(), &[0, 1, 0]);
    }

    #[test]
    fn reports_locations() {
        let bad_cat = "grade,severity\n1,nFI\n2,Z\n";
        match read_csv(bad_cat.as_bytes(), schema(), "mem") {
            Err(Error::Parse { row, column, message, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "severity");
                assert!(message.contains("unknown category 'Z'"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad_num = "grade,severity\nabc,nFI\n";
        assert!(matches!(
            read_csv(bad_num.as_bytes(), schema(), "mem"),
            Err(Error::Parse { row: 2, .. })
        ));
        let missing_value = "grade,severity\n,nFI\n";
        assert!(matches!(
            read_csv(missing_value.as_bytes(), schema(), "mem"),
            Err(Error::Parse { .. })
        ));
        let missing_col = "grade\n1\n";
        assert!(read_csv(missing_col.as_bytes(), schema(), "mem").is_err());
        assert!(read_csv("".as_bytes(), schema(), "mem").is_err());
        assert!(read_csv("grade,severity\n".as_bytes(), schema(), "mem").is_err());
    }

    #[test]
    fn counts_classes_at_full_scale() {
        let mut text = String::from("grade,severity\n");
        for i in 0..157_080 {
            text.push_str(if i % 1939 == 0 && i / 1939 < 81 { "0.5,FI\n" } else { "0.5,nFI\n" });
        }
        let d = read_csv(text.as_bytes(), schema(), "mem").unwrap();
        assert_eq!(d.class_counts(), vec![156_999, 81]);
    }

    #[test]
    fn writes_nine_significant_digits() {
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(0.1 + 0.2), "0.3");
        assert_eq!(format_sig9(std::f64::consts::PI), "3.14159265");
        assert_eq!(format_sig9(-123456.789012), "-123456.789");
        assert_eq!(format_sig9(1.5e-7), "1.5e-7");
        assert_eq!(format_sig9(2.0e12), "2e12");
        let text = "grade,severity\n3.14159265358979,FI\n";
        let d = read_csv(text.as_bytes(), schema(), "mem").unwrap();
        let mut out = Vec::new();
        write_csv_to(&mut out, &d).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "grade,severity\n3.14159265,FI\n");
    }
}
