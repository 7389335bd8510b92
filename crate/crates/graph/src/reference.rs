//! The reference CNN used as the pretrained featurizer.
//!
//! ```text
//! image 64x64x1 -> conv1 3x3x8 -> relu1 -> pool1 2x2 -> conv2 3x3x16 -> relu2
//!   -> pool2 2x2 -> flatten -> feat64 (dense 64) -> feat64_relu -> logits (dense 2)
//!   -> probs (softmax)
//! ```
//!
//! All weights are drawn uniformly from [-0.1, 0.1] with a seeded ChaCha8
//! stream, block by block in manifest order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ComputationGraph, GraphNode, Op, WeightBlock};

pub const DEFAULT_SEED: u64 = 2018;
pub const INPUT_SIDE: usize = 64;
/// Truncation point dropping the classifier and the last activation.
pub const RN2_NODE: &str = "feat64";
/// Truncation point dropping only the classifier.
pub const RN1_NODE: &str = "feat64_relu";
pub const OUTPUT_NODE: &str = "probs";

fn node(name: &str, op: Op, input: Option<&str>, weights: bool) -> GraphNode {
    GraphNode {
        name: name.into(),
        op,
        inputs: input.into_iter().map(str::to_string).collect(),
        weights: if weights {
            vec![format!("{name}.kernel"), format!("{name}.bias")]
        } else {
            Vec::new()
        },
    }
}

pub fn build(seed: u64) -> ComputationGraph {
    let conv = |out_channels| Op::Conv2d {
        kernel_h: 3,
        kernel_w: 3,
        out_channels,
        stride: 1,
    };
    let pool = Op::MaxPool2d {
        pool_h: 2,
        pool_w: 2,
        stride: 2,
    };
    let nodes = vec![
        node("image", Op::Input, None, false),
        node("conv1", conv(8), Some("image"), true),
        node("relu1", Op::Relu, Some("conv1"), false),
        node("pool1", pool, Some("relu1"), false),
        node("conv2", conv(16), Some("pool1"), true),
        node("relu2", Op::Relu, Some("conv2"), false),
        node("pool2", pool, Some("relu2"), false),
        node("flatten", Op::Flatten, Some("pool2"), false),
        node(RN2_NODE, Op::Dense { out_units: 64 }, Some("flatten"), true),
        node(RN1_NODE, Op::Relu, Some(RN2_NODE), false),
        node("logits", Op::Dense { out_units: 2 }, Some(RN1_NODE), true),
        node(OUTPUT_NODE, Op::Softmax, Some("logits"), false),
    ];
    // 64 -> 62 -> 31 -> 29 -> 14
    let flat = 14 * 14 * 16;
    let shapes: [(&str, Vec<usize>); 8] = [
        ("conv1.kernel", vec![3, 3, 1, 8]),
        ("conv1.bias", vec![8]),
        ("conv2.kernel", vec![3, 3, 8, 16]),
        ("conv2.bias", vec![16]),
        ("feat64.kernel", vec![flat, 64]),
        ("feat64.bias", vec![64]),
        ("logits.kernel", vec![64, 2]),
        ("logits.bias", vec![2]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = shapes
        .into_iter()
        .map(|(name, shape)| {
            let n: usize = shape.iter().product();
            let data: Vec<f32> = (0..n).map(|_| rng.gen_range(-0.1f32..=0.1)).collect();
            WeightBlock {
                name: name.into(),
                shape,
                data: data.into(),
            }
        })
        .collect();
    ComputationGraph::new(nodes, vec![INPUT_SIDE, INPUT_SIDE, 1], OUTPUT_NODE, blocks)
        .expect("reference graph is well formed")
}
