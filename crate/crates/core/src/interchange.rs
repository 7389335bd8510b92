//! Line-oriented text form of a schema and its rows.
//!
//! The first record is the header, one `name:dtype` entry per column. Each
//! following record is one row. Records are CSV, so cells containing commas,
//! quotes or newlines are quoted. Cells are written as:
//!
//! | dtype         | text                                       |
//! |---------------|--------------------------------------------|
//! | `Int64`       | decimal                                    |
//! | `Float64`     | shortest round-trip decimal, `NaN`, `inf`  |
//! | `Bool`        | `true` / `false`                           |
//! | `String`      | as is                                      |
//! | `Bytes`       | lowercase hex                              |
//! | `FloatVector` | `[f1;f2;...]`                              |
//! | `Image`       | hex of the PGM/PPM encoding, `@`, path     |
//! | `Timestamp`   | UTC seconds                                |

use std::io::{Read, Write};
use std::sync::Arc;

use tundra_image::{decode, encode, ImageFormat};

use crate::value::{DType, Row, Schema, Value};
use crate::Error;

pub fn write_rows<W: Write>(out: W, schema: &Schema, rows: &[Row]) -> Result<(), Error> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let header: Vec<String> = schema
        .fields()
        .iter()
        .map(|f| match f.dtype {
            DType::Rows(_) => Err(Error::Invalid(format!(
                "column `{}` holds nested rows, which have no text form",
                f.name
            ))),
            _ => Ok(format!("{}:{}", f.name, f.dtype)),
        })
        .collect::<Result<_, _>>()?;
    w.write_record(&header).map_err(csv_error)?;
    for row in rows {
        schema.check_row(row)?;
        let cells: Vec<String> = row
            .values()
            .iter()
            .map(format_cell)
            .collect::<Result<_, _>>()?;
        w.write_record(&cells).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn rows_to_string(schema: &Schema, rows: &[Row]) -> Result<String, Error> {
    let mut buf = Vec::new();
    write_rows(&mut buf, schema, rows)?;
    Ok(String::from_utf8(buf).expect("cells are UTF-8"))
}

pub fn read_rows<R: Read>(input: R) -> Result<(Schema, Vec<Row>), Error> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = r.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(csv_error)?,
        None => {
            return Err(Error::Interchange {
                line: 1,
                reason: "missing header".into(),
            })
        }
    };
    let mut fields = Vec::new();
    for entry in header.iter() {
        let (name, dtype) = entry.rsplit_once(':').ok_or_else(|| Error::Interchange {
            line: 1,
            reason: format!("header entry `{entry}` is not name:dtype"),
        })?;
        let dtype = DType::from_name(dtype).ok_or_else(|| Error::Interchange {
            line: 1,
            reason: format!("unknown dtype `{dtype}`"),
        })?;
        fields.push((name.to_string(), dtype));
    }
    let schema = Schema::new(fields).map_err(|e| Error::Interchange {
        line: 1,
        reason: e.to_string(),
    })?;
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != schema.len() {
            return Err(Error::Interchange {
                line,
                reason: format!("{} cells, expected {}", rec.len(), schema.len()),
            });
        }
        let values = rec
            .iter()
            .zip(schema.fields())
            .map(|(text, f)| {
                parse_cell(text, &f.dtype).map_err(|reason| Error::Interchange {
                    line,
                    reason: format!("column `{}`: {reason}", f.name),
                })
            })
            .collect::<Result<_, _>>()?;
        rows.push(Row::new(values));
    }
    Ok((schema, rows))
}

pub fn rows_from_str(text: &str) -> Result<(Schema, Vec<Row>), Error> {
    read_rows(text.as_bytes())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Interchange {
        line,
        reason: e.to_string(),
    }
}

fn format_cell(v: &Value) -> Result<String, Error> {
    Ok(match v {
        Value::Int64(x) | Value::Timestamp(x) => x.to_string(),
        Value::Float64(x) => x.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::String(s) => s.to_string(),
        Value::Bytes(b) => hex::encode(b),
        Value::FloatVector(v) => {
            let items: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            format!("[{}]", items.join(";"))
        }
        Value::Image(img) => {
            let bytes = encode(img, ImageFormat::pnm_for(img.mode()))
                .map_err(|e| Error::Invalid(e.to_string()))?;
            format!("{}@{}", hex::encode(bytes), img.path())
        }
        Value::Rows(_) => return Err(Error::Invalid("nested rows have no text form".into())),
    })
}

fn parse_cell(text: &str, dtype: &DType) -> Result<Value, String> {
    Ok(match dtype {
        DType::Int64 => Value::Int64(text.parse().map_err(|_| format!("bad integer `{text}`"))?),
        DType::Timestamp => Value::Timestamp(
            text.parse()
                .map_err(|_| format!("bad timestamp `{text}`"))?,
        ),
        DType::Float64 => Value::Float64(text.parse().map_err(|_| format!("bad float `{text}`"))?),
        DType::Bool => match text {
            "true" => Value::Bool(true),
            "false" => Value::Bool(false),
            _ => return Err(format!("bad bool `{text}`")),
        },
        DType::String => Value::string(text),
        DType::Bytes => Value::Bytes(Arc::from(
            hex::decode(text).map_err(|e| format!("bad hex: {e}"))?,
        )),
        DType::FloatVector => {
            let inner = text
                .strip_prefix('[')
                .and_then(|t| t.strip_suffix(']'))
                .ok_or_else(|| format!("vector `{text}` is not bracketed"))?;
            let items = if inner.is_empty() {
                Vec::new()
            } else {
                inner
                    .split(';')
                    .map(|x| {
                        x.parse::<f32>()
                            .map_err(|_| format!("bad vector element `{x}`"))
                    })
                    .collect::<Result<_, _>>()?
            };
            Value::vector(items)
        }
        DType::Image => {
            let (data, path) = text
                .split_once('@')
                .ok_or_else(|| "image cell lacks `@path`".to_string())?;
            let bytes = hex::decode(data).map_err(|e| format!("bad hex: {e}"))?;
            let img = decode(&bytes, None).map_err(|e| e.to_string())?;
            Value::image(img.with_path(path))
        }
        DType::Rows(_) => return Err("nested rows have no text form".into()),
    })
}
