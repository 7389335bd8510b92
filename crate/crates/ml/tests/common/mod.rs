#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use tundra_core::{DType, Dataset, Engine, Error, Row, Schema, Value};
use tundra_graph::reference;
use tundra_image::synth::{generate, CorpusConfig};
use tundra_ml::corpus::corpus_schema;

pub fn engine(workers: usize) -> Arc<Engine> {
    Engine::with_workers(workers).unwrap()
}

/// Writes the reference network into `dir` and returns its manifest path.
pub fn reference_model(dir: &Path) -> PathBuf {
    let path = dir.join("reference.tgraph");
    tundra_graph::save_graph(&reference::build(reference::DEFAULT_SEED), &path).unwrap();
    path
}

/// The error a failed job was carrying, if it was a tundra error.
pub fn inner(e: &Error) -> &Error {
    e.job_error()
        .and_then(|j| j.downcast_ref::<Error>())
        .unwrap_or(e)
}

pub fn vec_schema() -> Schema {
    Schema::new(vec![
        ("features", DType::FloatVector),
        ("label", DType::Int64),
    ])
    .unwrap()
}

pub fn labeled(rows: &[(Vec<f32>, i64)]) -> Vec<Row> {
    rows.iter()
        .map(|(x, y)| Row::new(vec![Value::vector(x.clone()), Value::Int64(*y)]))
        .collect()
}

pub fn corpus_rows(cfg: &CorpusConfig) -> Vec<Row> {
    generate(cfg)
        .into_iter()
        .map(|c| {
            Row::new(vec![
                Value::string(&c.rel_path),
                Value::image(c.image),
                Value::string(&c.camera_id),
                Value::Timestamp(c.timestamp),
                Value::Int64(c.label as i64),
            ])
        })
        .collect()
}

pub fn corpus(engine: &Arc<Engine>, cfg: &CorpusConfig, partitions: usize) -> Dataset {
    Dataset::from_rows(engine, corpus_schema(), corpus_rows(cfg), partitions).unwrap()
}

pub fn f64_col(rows: &[Row], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r.get(i).as_f64().unwrap()).collect()
}
