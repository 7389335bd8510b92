//! Reads a camera-trap corpus directory into a dataset.
//!
//! Layout: `<root>/<cameraId>/<utcSeconds>_<label>.<pgm|ppm|bmp>`, plus an
//! optional `<root>/meta.csv` with header `path,cameraId,timestamp,label`
//! (paths relative to the root). Sidecar entries take precedence over what
//! the file name says, and may list images outside the camera directories.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use tundra_core::{DType, Dataset, Engine, Error, Row, Schema, Value};
use tundra_image::{decode, ImageFormat};

pub const SIDECAR: &str = "meta.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    /// Relative to the corpus root, `/`-separated.
    pub path: String,
    pub camera_id: String,
    pub timestamp: i64,
    pub label: i64,
}

/// `path, image, cameraId, timestamp, label`.
pub fn corpus_schema() -> Schema {
    Schema::new(vec![
        ("path", DType::String),
        ("image", DType::Image),
        ("cameraId", DType::String),
        ("timestamp", DType::Timestamp),
        ("label", DType::Int64),
    ])
    .expect("valid schema")
}

fn bad(path: &str, reason: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("corpus entry {path}: {reason}"))
}

fn parse_label(path: &str, s: &str) -> Result<i64, Error> {
    match s.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(bad(path, format!("label {other:?} is not 0 or 1"))),
    }
}

/// Metadata from `<cameraId>/<utcSeconds>_<label>.<ext>`.
pub fn parse_file_name(path: &str) -> Result<CorpusEntry, Error> {
    let (camera, file) = path
        .split_once('/')
        .filter(|(c, f)| !c.is_empty() && !f.contains('/'))
        .ok_or_else(|| bad(path, "expected <cameraId>/<file>"))?;
    let stem = file.rsplit_once('.').map_or(file, |(s, _)| s);
    let (ts, label) = stem
        .split_once('_')
        .ok_or_else(|| bad(path, "file name lacks <utcSeconds>_<label>"))?;
    let timestamp = ts
        .parse()
        .map_err(|_| bad(path, format!("timestamp {ts:?} is not an integer")))?;
    Ok(CorpusEntry {
        path: path.to_string(),
        camera_id: camera.to_string(),
        timestamp,
        label: parse_label(path, label)?,
    })
}

fn read_sidecar(file: &Path) -> Result<BTreeMap<String, CorpusEntry>, Error> {
    let mut reader = csv::Reader::from_path(file).map_err(|e| bad(SIDECAR, e))?;
    let headers = reader.headers().map_err(|e| bad(SIDECAR, e))?.clone();
    let want = ["path", "cameraId", "timestamp", "label"];
    if headers.iter().collect::<Vec<_>>() != want {
        return Err(bad(SIDECAR, format!("header must be {}", want.join(","))));
    }
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(SIDECAR, e))?;
        let path = record[0].to_string();
        if record[1].is_empty() {
            return Err(bad(&path, "empty cameraId"));
        }
        let timestamp = record[2].trim().parse().map_err(|_| {
            bad(
                &path,
                format!("timestamp {:?} is not an integer", &record[2]),
            )
        })?;
        let entry = CorpusEntry {
            camera_id: record[1].to_string(),
            timestamp,
            label: parse_label(&path, &record[3])?,
            path: path.clone(),
        };
        if out.insert(path.clone(), entry).is_some() {
            return Err(bad(&path, "listed twice in the sidecar"));
        }
    }
    Ok(out)
}

/// Lists the corpus, sorted by path.
pub fn scan(root: &Path) -> Result<Vec<CorpusEntry>, Error> {
    let sidecar_path = root.join(SIDECAR);
    let mut entries = if sidecar_path.exists() {
        read_sidecar(&sidecar_path)?
    } else {
        BTreeMap::new()
    };
    for dir in std::fs::read_dir(root)? {
        let dir = dir?;
        if !dir.file_type()?.is_dir() {
            continue;
        }
        let camera = dir.file_name().to_string_lossy().into_owned();
        for file in std::fs::read_dir(dir.path())? {
            let file = file?;
            let name = file.file_name().to_string_lossy().into_owned();
            let is_image = name
                .rsplit_once('.')
                .and_then(|(_, ext)| ImageFormat::from_extension(ext))
                .is_some();
            if !is_image || !file.file_type()?.is_file() {
                continue;
            }
            let rel = format!("{camera}/{name}");
            if !entries.contains_key(&rel) {
                entries.insert(rel.clone(), parse_file_name(&rel)?);
            }
        }
    }
    Ok(entries.into_values().collect())
}

/// Reads and decodes every image, dealing rows round-robin into
/// `partitions` partitions in path order.
pub fn read_corpus(engine: &Arc<Engine>, root: &Path, partitions: usize) -> Result<Dataset, Error> {
    let mut rows = Vec::new();
    for entry in scan(root)? {
        let bytes = std::fs::read(root.join(&entry.path))?;
        let hint = entry
            .path
            .rsplit_once('.')
            .and_then(|(_, ext)| ImageFormat::from_extension(ext));
        let image = decode(&bytes, hint)
            .map_err(|e| bad(&entry.path, e))?
            .with_path(entry.path.clone());
        rows.push(Row::new(vec![
            Value::string(&entry.path),
            Value::image(image),
            Value::string(&entry.camera_id),
            Value::Timestamp(entry.timestamp),
            Value::Int64(entry.label),
        ]));
    }
    if rows.is_empty() {
        return Err(Error::Invalid(format!(
            "no images under {}",
            root.display()
        )));
    }
    Dataset::from_rows(engine, corpus_schema(), rows, partitions)
}
