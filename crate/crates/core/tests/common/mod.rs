#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use tundra_core::{DType, Dataset, Engine, Row, Schema, Value};

pub fn int_schema() -> Schema {
    Schema::new(vec![("x", DType::Int64)]).unwrap()
}

pub fn kv_schema() -> Schema {
    Schema::new(vec![("k", DType::String), ("v", DType::Int64)]).unwrap()
}

pub fn ints(values: impl IntoIterator<Item = i64>) -> Vec<Row> {
    values
        .into_iter()
        .map(|v| Row::new(vec![Value::Int64(v)]))
        .collect()
}

pub fn kv(k: &str, v: i64) -> Row {
    Row::new(vec![Value::string(k), Value::Int64(v)])
}

pub fn engine(workers: usize) -> Arc<Engine> {
    Engine::with_workers(workers).unwrap()
}

pub fn values(rows: &[Row]) -> Vec<i64> {
    rows.iter().map(|r| r.get(0).as_i64().unwrap()).collect()
}

pub fn sorted(mut v: Vec<i64>) -> Vec<i64> {
    v.sort();
    v
}

/// A source of `0..n` in `partitions` partitions that counts evaluations of
/// each partition.
pub fn counted_source(
    engine: &Arc<Engine>,
    n: i64,
    partitions: usize,
) -> (Dataset, Arc<Vec<AtomicUsize>>) {
    let counts: Arc<Vec<AtomicUsize>> =
        Arc::new((0..partitions).map(|_| AtomicUsize::new(0)).collect());
    let c = counts.clone();
    let ds = Dataset::from_generator(engine, int_schema(), partitions, move |ctx| {
        c[ctx.partition()].fetch_add(1, Ordering::SeqCst);
        Ok(ints(
            (0..n).filter(|i| (*i as usize) % partitions == ctx.partition()),
        ))
    })
    .unwrap();
    (ds, counts)
}

pub fn total(counts: &[AtomicUsize]) -> usize {
    counts.iter().map(|c| c.load(Ordering::SeqCst)).sum()
}
