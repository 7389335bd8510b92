mod common;

use std::path::Path;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tundra_core::pipeline::{ParamValue, Transformer};
use tundra_core::{DType, Dataset, Error, Row, Schema, Value};
use tundra_graph::reference::{self, OUTPUT_NODE, RN1_NODE, RN2_NODE};
use tundra_graph::Tensor;
use tundra_ml::{param_map, NetworkModel};

fn network(model: &Path, node: &str, mini_batch: i64) -> Result<NetworkModel, Error> {
    NetworkModel::new(param_map(
        &NetworkModel::descriptor(),
        &[
            ("modelPath", ParamValue::Path(model.display().to_string())),
            ("outputNode", ParamValue::String(node.into())),
            ("miniBatchSize", ParamValue::Int(mini_batch)),
        ],
    )?)
}

fn input_rows(n: usize, len: usize, seed: u64) -> Vec<Row> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let v: Vec<f32> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            Row::new(vec![Value::Int64(i as i64), Value::vector(v)])
        })
        .collect()
}

fn vector_schema() -> Schema {
    Schema::new(vec![("id", DType::Int64), ("vector", DType::FloatVector)]).unwrap()
}

fn side() -> usize {
    reference::INPUT_SIDE * reference::INPUT_SIDE
}

#[test]
fn outputs_match_direct_graph_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let model = reference_model(dir.path());
    let graph = reference::build(reference::DEFAULT_SEED);
    let rows = input_rows(12, side(), 1);
    let ds = Dataset::from_rows(&engine(2), vector_schema(), rows.clone(), 3).unwrap();
    for (node, len) in [(RN2_NODE, 64), (RN1_NODE, 64), (OUTPUT_NODE, 2)] {
        let stage = network(&model, node, 5).unwrap();
        assert_eq!(stage.output_len(), len);
        assert_eq!(stage.input_len(), side());
        let mut out = stage.transform(&ds).unwrap().collect().unwrap();
        out.sort_by_key(|r| r.get(0).as_i64());
        for (r, input) in out.iter().zip(&rows) {
            let x = Tensor::new(
                graph.input_shape().to_vec(),
                input.get(1).as_vector().unwrap().to_vec(),
            )
            .unwrap();
            let want = graph.eval(&x, node).unwrap();
            assert_eq!(r.get(2).as_vector().unwrap(), want.data(), "node {node}");
        }
        if node == OUTPUT_NODE {
            for r in &out {
                let sum: f32 = r.get(2).as_vector().unwrap().iter().sum();
                assert!((sum - 1.0).abs() < 1e-5);
            }
        }
    }
}

#[test]
fn mini_batch_size_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let model = reference_model(dir.path());
    let ds =
        Dataset::from_rows(&engine(2), vector_schema(), input_rows(100, side(), 2), 4).unwrap();
    let run = |mb| {
        let mut rows = network(&model, RN2_NODE, mb)
            .unwrap()
            .transform(&ds)
            .unwrap()
            .collect()
            .unwrap();
        rows.sort_by_key(|r| r.get(0).as_i64());
        rows.iter()
            .map(|r| {
                r.get(2)
                    .as_vector()
                    .unwrap()
                    .iter()
                    .map(|x| x.to_bits())
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    };
    let one = run(1);
    assert_eq!(run(7), one);
    assert_eq!(run(64), one);
}

#[test]
fn graph_is_materialized_once_per_worker() {
    let dir = tempfile::tempdir().unwrap();
    let model = reference_model(dir.path());
    let stage = network(&model, RN2_NODE, 64).unwrap();
    assert!(matches!(stage.load_metrics(), Err(Error::NoJobYet)));
    for _ in 0..3 {
        let ds =
            Dataset::from_rows(&engine(4), vector_schema(), input_rows(32, side(), 3), 16).unwrap();
        stage.transform(&ds).unwrap().collect().unwrap();
        let m = stage.load_metrics().unwrap();
        assert_eq!(m.total_materializations(), 4);
        assert!(m.materializations.values().all(|&n| n == 1));
    }
}

#[test]
fn batches_are_counted_per_partition() {
    let dir = tempfile::tempdir().unwrap();
    let model = reference_model(dir.path());
    let stage = network(&model, RN2_NODE, 10).unwrap();
    let one =
        Dataset::from_rows(&engine(1), vector_schema(), input_rows(37, side(), 4), 1).unwrap();
    stage.transform(&one).unwrap().collect().unwrap();
    assert_eq!(stage.load_metrics().unwrap().batches, 4);
    let split =
        Dataset::from_rows(&engine(2), vector_schema(), input_rows(37, side(), 4), 2).unwrap();
    stage.transform(&split).unwrap().collect().unwrap();
    assert_eq!(stage.load_metrics().unwrap().batches, 4);
}

#[test]
fn configuration_and_row_errors() {
    let dir = tempfile::tempdir().unwrap();
    let model = reference_model(dir.path());
    assert!(matches!(network(&model, "nope", 8), Err(Error::Model(_))));
    assert!(matches!(
        network(&model, RN2_NODE, 0),
        Err(Error::InvalidParam { param, .. }) if param == "miniBatchSize"
    ));
    assert!(matches!(
        network(&dir.path().join("missing.tgraph"), RN2_NODE, 8),
        Err(Error::Io(_))
    ));
    let weights = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p != &model)
        .unwrap();
    let mut blob = std::fs::read(&weights).unwrap();
    blob[10] ^= 0x40;
    std::fs::write(&weights, blob).unwrap();
    assert!(matches!(network(&model, RN2_NODE, 8), Err(Error::Model(_))));

    let model = reference_model(dir.path());
    let stage = network(&model, RN2_NODE, 8).unwrap();
    let short = Dataset::from_rows(&engine(1), vector_schema(), input_rows(3, 100, 5), 1).unwrap();
    let err = stage.transform(&short).unwrap().collect().unwrap_err();
    assert!(matches!(
        inner(&err),
        Error::VectorSizeMismatch { expected, actual: 100 } if *expected == side()
    ));
}
