use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use tundra_image::ImageRecord;

use crate::Error;

/// Column data types.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DType {
    Int64,
    Float64,
    Bool,
    String,
    Bytes,
    FloatVector,
    Image,
    Timestamp,
    /// Nested rows, produced by `group_by_key`.
    Rows(Box<Schema>),
}

impl DType {
    /// Keys of a shuffle must be one of these.
    pub fn is_hashable(&self) -> bool {
        matches!(
            self,
            DType::Int64 | DType::Float64 | DType::Bool | DType::String | DType::Timestamp
        )
    }

    /// The name used in schema headers. Nested rows have no text form.
    pub fn name(&self) -> &'static str {
        match self {
            DType::Int64 => "Int64",
            DType::Float64 => "Float64",
            DType::Bool => "Bool",
            DType::String => "String",
            DType::Bytes => "Bytes",
            DType::FloatVector => "FloatVector",
            DType::Image => "Image",
            DType::Timestamp => "Timestamp",
            DType::Rows(_) => "Rows",
        }
    }

    pub fn from_name(name: &str) -> Option<DType> {
        Some(match name {
            "Int64" => DType::Int64,
            "Float64" => DType::Float64,
            "Bool" => DType::Bool,
            "String" => DType::String,
            "Bytes" => DType::Bytes,
            "FloatVector" => DType::FloatVector,
            "Image" => DType::Image,
            "Timestamp" => DType::Timestamp,
            _ => return None,
        })
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Field {
    pub name: String,
    pub dtype: DType,
}

/// Ordered, uniquely named columns.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Schema {
    fields: Vec<Field>,
}

impl Schema {
    pub fn new(fields: Vec<(impl Into<String>, DType)>) -> Result<Schema, Error> {
        let fields: Vec<Field> = fields
            .into_iter()
            .map(|(name, dtype)| Field {
                name: name.into(),
                dtype,
            })
            .collect();
        let mut seen = HashSet::new();
        for f in &fields {
            if f.name.is_empty() {
                return Err(Error::InvalidSchema("empty column name".into()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate column `{}`",
                    f.name
                )));
            }
        }
        Ok(Schema { fields })
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    /// Index of `name`, or `MissingColumn`.
    pub fn require(&self, name: &str) -> Result<usize, Error> {
        self.index_of(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Index of `name` if its dtype is `dtype`.
    pub fn require_typed(&self, name: &str, dtype: &DType) -> Result<usize, Error> {
        let i = self.require(name)?;
        if &self.fields[i].dtype != dtype {
            return Err(Error::ColumnType {
                column: name.to_string(),
                expected: dtype.to_string(),
                actual: self.fields[i].dtype.to_string(),
            });
        }
        Ok(i)
    }

    pub fn dtype(&self, i: usize) -> &DType {
        &self.fields[i].dtype
    }

    pub fn names(&self) -> Vec<&str> {
        self.fields.iter().map(|f| f.name.as_str()).collect()
    }

    /// This schema with one column appended.
    pub fn with(&self, name: &str, dtype: DType) -> Result<Schema, Error> {
        let mut fields: Vec<(String, DType)> = self
            .fields
            .iter()
            .map(|f| (f.name.clone(), f.dtype.clone()))
            .collect();
        fields.push((name.to_string(), dtype));
        Schema::new(fields)
    }

    /// This schema restricted to `indices`, in that order.
    pub fn project(&self, indices: &[usize]) -> Result<Schema, Error> {
        Schema::new(
            indices
                .iter()
                .map(|&i| (self.fields[i].name.clone(), self.fields[i].dtype.clone()))
                .collect(),
        )
    }

    /// Checks arity and every cell's kind.
    pub fn check_row(&self, row: &Row) -> Result<(), Error> {
        if row.len() != self.len() {
            return Err(Error::SchemaMismatch(format!(
                "row has {} cells, schema has {} columns",
                row.len(),
                self.len()
            )));
        }
        for (f, v) in self.fields.iter().zip(row.values()) {
            if !v.conforms(&f.dtype) {
                return Err(Error::SchemaMismatch(format!(
                    "column `{}` is {} but the cell is {}",
                    f.name,
                    f.dtype,
                    v.kind_name()
                )));
            }
        }
        Ok(())
    }
}

/// A typed cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int64(i64),
    Float64(f64),
    Bool(bool),
    String(Arc<str>),
    Bytes(Arc<[u8]>),
    FloatVector(Arc<[f32]>),
    Image(Arc<ImageRecord>),
    Timestamp(i64),
    Rows(Arc<[Row]>),
}

impl Value {
    pub fn string(s: impl AsRef<str>) -> Value {
        Value::String(Arc::from(s.as_ref()))
    }

    pub fn vector(v: impl Into<Vec<f32>>) -> Value {
        Value::FloatVector(Arc::from(v.into()))
    }

    pub fn image(img: ImageRecord) -> Value {
        Value::Image(Arc::new(img))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Int64(_) => "Int64",
            Value::Float64(_) => "Float64",
            Value::Bool(_) => "Bool",
            Value::String(_) => "String",
            Value::Bytes(_) => "Bytes",
            Value::FloatVector(_) => "FloatVector",
            Value::Image(_) => "Image",
            Value::Timestamp(_) => "Timestamp",
            Value::Rows(_) => "Rows",
        }
    }

    pub fn conforms(&self, dtype: &DType) -> bool {
        match (self, dtype) {
            (Value::Int64(_), DType::Int64)
            | (Value::Float64(_), DType::Float64)
            | (Value::Bool(_), DType::Bool)
            | (Value::String(_), DType::String)
            | (Value::Bytes(_), DType::Bytes)
            | (Value::FloatVector(_), DType::FloatVector)
            | (Value::Image(_), DType::Image)
            | (Value::Timestamp(_), DType::Timestamp) => true,
            (Value::Rows(rows), DType::Rows(schema)) => {
                rows.iter().all(|r| schema.check_row(r).is_ok())
            }
            _ => false,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int64(v) | Value::Timestamp(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Float64(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_vector(&self) -> Option<&[f32]> {
        match self {
            Value::FloatVector(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_image(&self) -> Option<&ImageRecord> {
        match self {
            Value::Image(img) => Some(img),
            _ => None,
        }
    }

    pub fn as_rows(&self) -> Option<&[Row]> {
        match self {
            Value::Rows(rows) => Some(rows),
            _ => None,
        }
    }

    /// Appends the canonical encoding: a kind tag followed by a
    /// self-delimiting payload. Byte order of encodings is the canonical sort
    /// order.
    pub fn encode_into(&self, out: &mut Vec<u8>) {
        fn len(out: &mut Vec<u8>, n: usize) {
            out.extend_from_slice(&(n as u64).to_be_bytes());
        }
        match self {
            Value::Int64(v) => {
                out.push(1);
                out.extend_from_slice(&((*v as u64) ^ (1 << 63)).to_be_bytes());
            }
            Value::Float64(v) => {
                out.push(2);
                out.extend_from_slice(&v.to_bits().to_be_bytes());
            }
            Value::Bool(v) => {
                out.push(3);
                out.push(*v as u8);
            }
            Value::String(s) => {
                out.push(4);
                len(out, s.len());
                out.extend_from_slice(s.as_bytes());
            }
            Value::Bytes(b) => {
                out.push(5);
                len(out, b.len());
                out.extend_from_slice(b);
            }
            Value::FloatVector(v) => {
                out.push(6);
                len(out, v.len());
                for x in v.iter() {
                    out.extend_from_slice(&x.to_bits().to_be_bytes());
                }
            }
            Value::Image(img) => {
                out.push(7);
                len(out, img.path().len());
                out.extend_from_slice(img.path().as_bytes());
                len(out, img.width());
                len(out, img.height());
                out.push(img.channels() as u8);
                out.extend_from_slice(img.data());
            }
            Value::Timestamp(v) => {
                out.push(8);
                out.extend_from_slice(&((*v as u64) ^ (1 << 63)).to_be_bytes());
            }
            Value::Rows(rows) => {
                out.push(9);
                len(out, rows.len());
                for r in rows.iter() {
                    let enc = r.encode();
                    len(out, enc.len());
                    out.extend_from_slice(&enc);
                }
            }
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }
}

/// An immutable ordered list of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    values: Vec<Value>,
}

impl Row {
    pub fn new(values: Vec<Value>) -> Row {
        Row { values }
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn get(&self, i: usize) -> &Value {
        &self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<Value> {
        self.values
    }

    /// A new row with `value` appended.
    pub fn with(&self, value: Value) -> Row {
        let mut values = Vec::with_capacity(self.values.len() + 1);
        values.extend_from_slice(&self.values);
        values.push(value);
        Row { values }
    }

    /// A new row with cell `i` replaced.
    pub fn replaced(&self, i: usize, value: Value) -> Row {
        let mut values = self.values.clone();
        values[i] = value;
        Row { values }
    }

    pub fn project(&self, indices: &[usize]) -> Row {
        Row {
            values: indices.iter().map(|&i| self.values[i].clone()).collect(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for v in &self.values {
            v.encode_into(&mut out);
        }
        out
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Sorts rows by their canonical encodings.
pub fn canonical_sort(rows: &mut [Row]) {
    rows.sort_by_cached_key(|r| r.encode());
}

/// Rows in canonical order, for order-insensitive comparison.
pub fn canonical(rows: impl IntoIterator<Item = Row>) -> Vec<Row> {
    let mut rows: Vec<Row> = rows.into_iter().collect();
    canonical_sort(&mut rows);
    rows
}
