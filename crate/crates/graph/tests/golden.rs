//! The reference model and a tiny model are pinned by golden files. Set
//! `TUNDRA_BLESS=1` to regenerate them after an intentional format change.

use std::path::PathBuf;

use tundra_graph::{load_graph, reference, save_graph, Tensor};

fn testdata(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("testdata")
        .join(name)
}

fn bless() -> bool {
    std::env::var_os("TUNDRA_BLESS").is_some()
}

#[test]
fn reference_manifest_is_bit_exact() {
    let g = reference::build(reference::DEFAULT_SEED);
    let text = g.manifest_text("reference.tgw");
    let path = testdata("reference.tgraph");
    if bless() {
        std::fs::write(&path, &text).unwrap();
    }
    // Block checksums in the manifest pin every weight bit.
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
}

#[test]
fn tiny_model_pair_loads_and_evaluates() {
    let path = testdata("tiny.tgraph");
    if bless() {
        let full = reference::build(7);
        let tiny = tundra_graph::ComputationGraph::new(
            vec![
                tundra_graph::GraphNode {
                    name: "x".into(),
                    op: tundra_graph::Op::Input,
                    inputs: vec![],
                    weights: vec![],
                },
                tundra_graph::GraphNode {
                    name: "d".into(),
                    op: tundra_graph::Op::Dense { out_units: 2 },
                    inputs: vec!["x".into()],
                    weights: vec!["d.kernel".into(), "d.bias".into()],
                },
                tundra_graph::GraphNode {
                    name: "p".into(),
                    op: tundra_graph::Op::Softmax,
                    inputs: vec!["d".into()],
                    weights: vec![],
                },
            ],
            vec![64],
            "p",
            vec![
                tundra_graph::WeightBlock {
                    name: "d.kernel".into(),
                    shape: vec![64, 2],
                    data: full.block("logits.kernel").unwrap().data.clone(),
                },
                tundra_graph::WeightBlock {
                    name: "d.bias".into(),
                    shape: vec![2],
                    data: full.block("logits.bias").unwrap().data.clone(),
                },
            ],
        )
        .unwrap();
        save_graph(&tiny, &path).unwrap();
    }
    let g = load_graph(&path).unwrap();
    let out = g.eval(&Tensor::vector(vec![0.5; 64]), "p").unwrap();
    assert_eq!(out.shape(), &[2]);
    let text = g.manifest_text("tiny.tgw");
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
    assert_eq!(
        std::fs::read(testdata("tiny.tgw")).unwrap(),
        g.weight_blob()
    );
}

#[test]
fn reference_round_trips_through_files() {
    let g = reference::build(reference::DEFAULT_SEED);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reference.tgraph");
    save_graph(&g, &path).unwrap();
    assert_eq!(load_graph(&path).unwrap(), g);
}
