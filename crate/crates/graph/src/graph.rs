use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use crate::tensor::checked_numel;
use crate::GraphError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Input,
    Dense {
        out_units: usize,
    },
    Relu,
    /// `valid` padding only.
    Conv2d {
        kernel_h: usize,
        kernel_w: usize,
        out_channels: usize,
        stride: usize,
    },
    MaxPool2d {
        pool_h: usize,
        pool_w: usize,
        stride: usize,
    },
    Flatten,
    Softmax,
    Add,
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Dense { .. } => "dense",
            Op::Relu => "relu",
            Op::Conv2d { .. } => "conv2d",
            Op::MaxPool2d { .. } => "maxpool2d",
            Op::Flatten => "flatten",
            Op::Softmax => "softmax",
            Op::Add => "add",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Op::Input => 0,
            Op::Add => 2,
            _ => 1,
        }
    }

    /// Number of weight blocks the op consumes (kernel, bias).
    pub fn weight_count(&self) -> usize {
        match self {
            Op::Dense { .. } | Op::Conv2d { .. } => 2,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub name: String,
    pub op: Op,
    pub inputs: Vec<String>,
    pub weights: Vec<String>,
}

/// A named block in the weight store. The data is shared between a graph and
/// every graph truncated from it.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Arc<[f32]>,
}

/// A validated, topologically ordered feed-forward graph.
#[derive(Debug, Clone)]
pub struct ComputationGraph {
    pub(crate) nodes: Vec<GraphNode>,
    pub(crate) input_name: String,
    pub(crate) input_shape: Vec<usize>,
    pub(crate) output_name: String,
    pub(crate) blocks: Vec<WeightBlock>,
    pub(crate) index: HashMap<String, usize>,
    pub(crate) block_index: HashMap<String, usize>,
    pub(crate) shapes: Vec<Vec<usize>>,
}

impl PartialEq for ComputationGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.input_name == other.input_name
            && self.input_shape == other.input_shape
            && self.output_name == other.output_name
            && self.blocks == other.blocks
    }
}

impl ComputationGraph {
    /// Validates the parts and computes static shapes.
    pub fn new(
        nodes: Vec<GraphNode>,
        input_shape: Vec<usize>,
        output_name: impl Into<String>,
        blocks: Vec<WeightBlock>,
    ) -> Result<Self, GraphError> {
        let output_name = output_name.into();
        let mut index = HashMap::with_capacity(nodes.len());
        let mut input_name = None;
        for (i, node) in nodes.iter().enumerate() {
            if node.name.is_empty() {
                return Err(GraphError::Invalid("empty node name".into()));
            }
            if node.inputs.len() != node.op.arity() {
                return Err(GraphError::Invalid(format!(
                    "node {} ({}) takes {} inputs, got {}",
                    node.name,
                    node.op.name(),
                    node.op.arity(),
                    node.inputs.len()
                )));
            }
            if node.weights.len() != node.op.weight_count() {
                return Err(GraphError::Invalid(format!(
                    "node {} ({}) takes {} weight blocks, got {}",
                    node.name,
                    node.op.name(),
                    node.op.weight_count(),
                    node.weights.len()
                )));
            }
            for input in &node.inputs {
                // Inputs must precede the node, which also rules out cycles.
                if !index.contains_key(input) {
                    return Err(GraphError::UnknownNode(input.clone()));
                }
            }
            if node.op == Op::Input {
                if input_name.is_some() {
                    return Err(GraphError::Invalid("more than one input node".into()));
                }
                input_name = Some(node.name.clone());
            }
            if index.insert(node.name.clone(), i).is_some() {
                return Err(GraphError::Invalid(format!(
                    "duplicate node name {}",
                    node.name
                )));
            }
        }
        let input_name = input_name.ok_or_else(|| GraphError::Invalid("no input node".into()))?;
        if !index.contains_key(&output_name) {
            return Err(GraphError::UnknownNode(output_name));
        }

        let mut block_index = HashMap::with_capacity(blocks.len());
        for (i, block) in blocks.iter().enumerate() {
            if checked_numel(&block.shape) != Some(block.data.len()) {
                return Err(GraphError::Invalid(format!(
                    "weight block {} has shape {:?} but {} values",
                    block.name,
                    block.shape,
                    block.data.len()
                )));
            }
            if block_index.insert(block.name.clone(), i).is_some() {
                return Err(GraphError::Invalid(format!(
                    "duplicate weight block {}",
                    block.name
                )));
            }
        }
        for node in &nodes {
            for w in &node.weights {
                if !block_index.contains_key(w) {
                    return Err(GraphError::Invalid(format!(
                        "node {} references missing weight block {w}",
                        node.name
                    )));
                }
            }
        }

        let mut graph = ComputationGraph {
            nodes,
            input_name,
            input_shape,
            output_name,
            blocks,
            index,
            block_index,
            shapes: Vec::new(),
        };
        let input_shape = graph.input_shape.clone();
        graph.shapes = graph.infer_node_shapes(&input_shape)?;
        Ok(graph)
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node(&self, name: &str) -> Option<&GraphNode> {
        self.index.get(name).map(|&i| &self.nodes[i])
    }

    pub fn input_name(&self) -> &str {
        &self.input_name
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn output_name(&self) -> &str {
        &self.output_name
    }

    pub fn blocks(&self) -> &[WeightBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&WeightBlock> {
        self.block_index.get(name).map(|&i| &self.blocks[i])
    }

    /// Static shape of a node for the graph's declared input shape.
    pub fn shape_of(&self, name: &str) -> Option<&[usize]> {
        self.index.get(name).map(|&i| self.shapes[i].as_slice())
    }

    /// Static shapes for every node given an input shape.
    pub fn infer_shapes(
        &self,
        input_shape: &[usize],
    ) -> Result<BTreeMap<String, Vec<usize>>, GraphError> {
        let shapes = self.infer_node_shapes(input_shape)?;
        Ok(self
            .nodes
            .iter()
            .map(|n| n.name.clone())
            .zip(shapes)
            .collect())
    }

    pub(crate) fn infer_node_shapes(
        &self,
        input_shape: &[usize],
    ) -> Result<Vec<Vec<usize>>, GraphError> {
        let mut shapes: Vec<Vec<usize>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let fail = |reason: String| GraphError::ShapeInconsistency {
                node: node.name.clone(),
                reason,
            };
            let arg = |k: usize| &shapes[self.index[&node.inputs[k]]];
            let weight_shape = |k: usize| &self.blocks[self.block_index[&node.weights[k]]].shape;
            let shape = match node.op {
                Op::Input => {
                    if checked_numel(input_shape).is_none() {
                        return Err(fail(format!("invalid input shape {input_shape:?}")));
                    }
                    input_shape.to_vec()
                }
                Op::Relu => arg(0).clone(),
                Op::Softmax => arg(0).clone(),
                Op::Flatten => vec![arg(0).iter().product()],
                Op::Add => {
                    if arg(0) != arg(1) {
                        return Err(fail(format!("cannot add {:?} and {:?}", arg(0), arg(1))));
                    }
                    arg(0).clone()
                }
                Op::Dense { out_units } => {
                    let [n_in] = arg(0).as_slice() else {
                        return Err(fail(format!("dense needs a vector, got {:?}", arg(0))));
                    };
                    if weight_shape(0) != &[*n_in, out_units] {
                        return Err(fail(format!(
                            "kernel shape {:?}, expected [{n_in}, {out_units}]",
                            weight_shape(0)
                        )));
                    }
                    if weight_shape(1) != &[out_units] {
                        return Err(fail(format!(
                            "bias shape {:?}, expected [{out_units}]",
                            weight_shape(1)
                        )));
                    }
                    vec![out_units]
                }
                Op::Conv2d {
                    kernel_h,
                    kernel_w,
                    out_channels,
                    stride,
                } => {
                    let [h, w, c] = arg(0).as_slice() else {
                        return Err(fail(format!("conv2d needs HxWxC, got {:?}", arg(0))));
                    };
                    if stride == 0 || kernel_h == 0 || kernel_w == 0 || out_channels == 0 {
                        return Err(fail("zero kernel size, stride or channel count".into()));
                    }
                    if kernel_h > *h || kernel_w > *w {
                        return Err(fail(format!(
                            "kernel {kernel_h}x{kernel_w} larger than input {h}x{w}"
                        )));
                    }
                    if weight_shape(0) != &[kernel_h, kernel_w, *c, out_channels] {
                        return Err(fail(format!(
                            "kernel shape {:?}, expected [{kernel_h}, {kernel_w}, {c}, {out_channels}]",
                            weight_shape(0)
                        )));
                    }
                    if weight_shape(1) != &[out_channels] {
                        return Err(fail(format!(
                            "bias shape {:?}, expected [{out_channels}]",
                            weight_shape(1)
                        )));
                    }
                    vec![
                        (h - kernel_h) / stride + 1,
                        (w - kernel_w) / stride + 1,
                        out_channels,
                    ]
                }
                Op::MaxPool2d {
                    pool_h,
                    pool_w,
                    stride,
                } => {
                    let [h, w, c] = arg(0).as_slice() else {
                        return Err(fail(format!("maxpool2d needs HxWxC, got {:?}", arg(0))));
                    };
                    if stride == 0 || pool_h == 0 || pool_w == 0 {
                        return Err(fail("zero pool size or stride".into()));
                    }
                    if pool_h > *h || pool_w > *w {
                        return Err(fail(format!(
                            "pool {pool_h}x{pool_w} larger than input {h}x{w}"
                        )));
                    }
                    vec![(h - pool_h) / stride + 1, (w - pool_w) / stride + 1, *c]
                }
            };
            shapes.push(shape);
        }
        Ok(shapes)
    }

    /// Indices of `name` and all its ancestors, in topological order.
    pub(crate) fn ancestors(&self, name: &str) -> Result<Vec<usize>, GraphError> {
        let target = *self
            .index
            .get(name)
            .ok_or_else(|| GraphError::UnknownNode(name.to_string()))?;
        let mut keep = vec![false; self.nodes.len()];
        keep[target] = true;
        for i in (0..=target).rev() {
            if keep[i] {
                for input in &self.nodes[i].inputs {
                    keep[self.index[input]] = true;
                }
            }
        }
        Ok((0..=target).filter(|&i| keep[i]).collect())
    }

    /// The sub-graph computing `name`: its ancestor closure, with `name` as
    /// the output. Weight data is shared with `self`.
    pub fn truncate(&self, name: &str) -> Result<ComputationGraph, GraphError> {
        let keep = self.ancestors(name)?;
        let nodes: Vec<GraphNode> = keep.iter().map(|&i| self.nodes[i].clone()).collect();
        let used: HashSet<&str> = nodes
            .iter()
            .flat_map(|n| n.weights.iter().map(String::as_str))
            .collect();
        let blocks = self
            .blocks
            .iter()
            .filter(|b| used.contains(b.name.as_str()))
            .cloned()
            .collect();
        ComputationGraph::new(nodes, self.input_shape.clone(), name, blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(name: &str, shape: Vec<usize>) -> WeightBlock {
        let n = shape.iter().product();
        WeightBlock {
            name: name.into(),
            shape,
            data: vec![0.5; n].into(),
        }
    }

    fn node(name: &str, op: Op, inputs: &[&str], weights: &[&str]) -> GraphNode {
        GraphNode {
            name: name.into(),
            op,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            weights: weights.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn dense_after_flatten_of_4x4x1() {
        let g = ComputationGraph::new(
            vec![
                node("x", Op::Input, &[], &[]),
                node("f", Op::Flatten, &["x"], &[]),
                node("d", Op::Dense { out_units: 10 }, &["f"], &["d.k", "d.b"]),
            ],
            vec![4, 4, 1],
            "d",
            vec![block("d.k", vec![16, 10]), block("d.b", vec![10])],
        )
        .unwrap();
        assert_eq!(g.infer_shapes(&[4, 4, 1]).unwrap()["d"], vec![10]);
    }

    #[test]
    fn valid_conv_on_8x8() {
        let g = ComputationGraph::new(
            vec![
                node("x", Op::Input, &[], &[]),
                node(
                    "c",
                    Op::Conv2d {
                        kernel_h: 3,
                        kernel_w: 3,
                        out_channels: 2,
                        stride: 1,
                    },
                    &["x"],
                    &["c.k", "c.b"],
                ),
                node(
                    "p",
                    Op::MaxPool2d {
                        pool_h: 2,
                        pool_w: 2,
                        stride: 2,
                    },
                    &["c"],
                    &[],
                ),
            ],
            vec![8, 8, 1],
            "p",
            vec![block("c.k", vec![3, 3, 1, 2]), block("c.b", vec![2])],
        )
        .unwrap();
        assert_eq!(g.shape_of("c").unwrap(), &[6, 6, 2]);
        assert_eq!(g.shape_of("p").unwrap(), &[3, 3, 2]);
    }

    #[test]
    fn add_of_mismatched_shapes() {
        let err = ComputationGraph::new(
            vec![
                node("x", Op::Input, &[], &[]),
                node("f", Op::Flatten, &["x"], &[]),
                node("a", Op::Add, &["x", "f"], &[]),
            ],
            vec![2, 2, 1],
            "a",
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::ShapeInconsistency { node, .. } if node == "a"));
    }

    #[test]
    fn structural_errors() {
        let forward_ref = ComputationGraph::new(
            vec![
                node("r", Op::Relu, &["x"], &[]),
                node("x", Op::Input, &[], &[]),
            ],
            vec![2],
            "r",
            vec![],
        );
        assert!(matches!(forward_ref, Err(GraphError::UnknownNode(_))));
        let bad_output =
            ComputationGraph::new(vec![node("x", Op::Input, &[], &[])], vec![2], "y", vec![]);
        assert!(matches!(bad_output, Err(GraphError::UnknownNode(_))));
        let missing_weight = ComputationGraph::new(
            vec![
                node("x", Op::Input, &[], &[]),
                node("d", Op::Dense { out_units: 1 }, &["x"], &["k", "b"]),
            ],
            vec![2],
            "d",
            vec![],
        );
        assert!(matches!(missing_weight, Err(GraphError::Invalid(_))));
    }
}
