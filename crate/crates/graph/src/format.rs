//! On-disk model format: a text manifest plus a little-endian `f32` weight
//! blob.
//!
//! ```text
//! TGRAPH1
//! weights model.tgw
//! input image 64,64,1
//! output probs
//! node image input
//! node conv1 conv2d inputs=image kernelH=3 kernelW=3 outChannels=8 stride=1 padding=valid weights=conv1.kernel,conv1.bias
//! ...
//! block conv1.kernel 3,3,1,8 <sha256 of the block's bytes, lowercase hex>
//! ```
//!
//! Nodes are listed in topological order. Blocks are stored in the blob in
//! manifest order, row-major, without padding.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::graph::{ComputationGraph, GraphNode, Op, WeightBlock};
use crate::GraphError;

pub const MAGIC: &str = "TGRAPH1";

struct BlockDecl {
    name: String,
    shape: Vec<usize>,
    sha256: String,
}

struct Manifest {
    weights_file: Option<String>,
    input_name: String,
    input_shape: Vec<usize>,
    output_name: String,
    nodes: Vec<GraphNode>,
    blocks: Vec<BlockDecl>,
}

fn malformed(line: usize, reason: impl Into<String>) -> GraphError {
    GraphError::Malformed {
        line,
        reason: reason.into(),
    }
}

fn parse_dims(line: usize, text: &str) -> Result<Vec<usize>, GraphError> {
    text.split(',')
        .map(|d| match d.parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v),
            _ => Err(malformed(line, format!("bad dimension {d:?}"))),
        })
        .collect()
}

fn parse_manifest(text: &str) -> Result<Manifest, GraphError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, MAGIC)) => {}
        _ => return Err(GraphError::BadMagic),
    }
    let mut weights_file = None;
    let mut input = None;
    let mut output_name = None;
    let mut nodes = Vec::new();
    let mut blocks = Vec::new();
    for (ln, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().expect("non-empty line");
        let rest: Vec<&str> = tokens.collect();
        match (keyword, rest.as_slice()) {
            ("weights", [file]) => weights_file = Some(file.to_string()),
            ("input", [name, dims]) => input = Some((name.to_string(), parse_dims(ln, dims)?)),
            ("output", [name]) => output_name = Some(name.to_string()),
            ("node", [name, op, attrs @ ..]) => nodes.push(parse_node(ln, name, op, attrs)?),
            ("block", [name, dims, sha]) => {
                if sha.len() != 64 || !sha.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
                    return Err(malformed(ln, "sha256 must be 64 lowercase hex digits"));
                }
                blocks.push(BlockDecl {
                    name: name.to_string(),
                    shape: parse_dims(ln, dims)?,
                    sha256: sha.to_string(),
                });
            }
            _ => return Err(malformed(ln, format!("unrecognized line {line:?}"))),
        }
    }
    let (input_name, input_shape) = input.ok_or_else(|| malformed(0, "missing input line"))?;
    let output_name = output_name.ok_or_else(|| malformed(0, "missing output line"))?;
    Ok(Manifest {
        weights_file,
        input_name,
        input_shape,
        output_name,
        nodes,
        blocks,
    })
}

fn parse_node(ln: usize, name: &str, op: &str, attrs: &[&str]) -> Result<GraphNode, GraphError> {
    let mut inputs = Vec::new();
    let mut weights = Vec::new();
    let mut values: Vec<(&str, &str)> = Vec::new();
    for attr in attrs {
        let (key, value) = attr
            .split_once('=')
            .ok_or_else(|| malformed(ln, format!("attribute {attr:?} lacks '='")))?;
        match key {
            "inputs" => inputs = value.split(',').map(str::to_string).collect(),
            "weights" => weights = value.split(',').map(str::to_string).collect(),
            _ => values.push((key, value)),
        }
    }
    let mut take = |key: &str| -> Result<usize, GraphError> {
        let pos = values
            .iter()
            .position(|(k, _)| *k == key)
            .ok_or_else(|| malformed(ln, format!("{op} node {name} lacks {key}")))?;
        let (_, v) = values.remove(pos);
        v.parse::<usize>()
            .map_err(|_| malformed(ln, format!("{key}={v} is not an integer")))
    };
    let op = match op {
        "input" => Op::Input,
        "relu" => Op::Relu,
        "flatten" => Op::Flatten,
        "softmax" => Op::Softmax,
        "add" => Op::Add,
        "dense" => Op::Dense {
            out_units: take("outUnits")?,
        },
        "conv2d" => {
            let op = Op::Conv2d {
                kernel_h: take("kernelH")?,
                kernel_w: take("kernelW")?,
                out_channels: take("outChannels")?,
                stride: take("stride")?,
            };
            if let Some(pos) = values.iter().position(|(k, _)| *k == "padding") {
                let (_, padding) = values.remove(pos);
                if padding != "valid" {
                    return Err(malformed(ln, format!("unsupported padding {padding}")));
                }
            }
            op
        }
        "maxpool2d" => Op::MaxPool2d {
            pool_h: take("poolH")?,
            pool_w: take("poolW")?,
            stride: take("stride")?,
        },
        other => return Err(GraphError::UnknownOp(other.to_string())),
    };
    if let Some((key, _)) = values.first() {
        return Err(malformed(
            ln,
            format!("unknown attribute {key} for {}", op.name()),
        ));
    }
    Ok(GraphNode {
        name: name.to_string(),
        op,
        inputs,
        weights,
    })
}

impl ComputationGraph {
    /// Parses a manifest and its weight blob, verifying every block checksum.
    pub fn from_bytes(manifest: &[u8], weights: &[u8]) -> Result<Self, GraphError> {
        let text = std::str::from_utf8(manifest).map_err(|_| GraphError::BadMagic)?;
        let manifest = parse_manifest(text)?;
        let mut expected = 0usize;
        for block in &manifest.blocks {
            let n = block
                .shape
                .iter()
                .try_fold(4usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| malformed(0, format!("block {} too large", block.name)))?;
            expected = expected
                .checked_add(n)
                .ok_or_else(|| malformed(0, "weights too large"))?;
        }
        if expected != weights.len() {
            return Err(GraphError::WeightBlobSize {
                expected,
                actual: weights.len(),
            });
        }
        let mut offset = 0;
        let mut blocks = Vec::with_capacity(manifest.blocks.len());
        for decl in manifest.blocks {
            let n: usize = decl.shape.iter().product();
            let bytes = &weights[offset..offset + 4 * n];
            offset += 4 * n;
            if hex::encode(Sha256::digest(bytes)) != decl.sha256 {
                return Err(GraphError::ChecksumMismatch { block: decl.name });
            }
            let data: Arc<[f32]> = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            blocks.push(WeightBlock {
                name: decl.name,
                shape: decl.shape,
                data,
            });
        }
        let graph = ComputationGraph::new(
            manifest.nodes,
            manifest.input_shape,
            manifest.output_name,
            blocks,
        )?;
        if graph.input_name() != manifest.input_name {
            return Err(GraphError::Invalid(format!(
                "input line names {} but the input node is {}",
                manifest.input_name,
                graph.input_name()
            )));
        }
        Ok(graph)
    }

    /// Renders the manifest text, pointing at `weights_file`.
    pub fn manifest_text(&self, weights_file: &str) -> String {
        let mut out = String::new();
        let dims = |s: &[usize]| {
            s.iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "weights {weights_file}").unwrap();
        writeln!(out, "input {} {}", self.input_name, dims(&self.input_shape)).unwrap();
        writeln!(out, "output {}", self.output_name).unwrap();
        for node in &self.nodes {
            write!(out, "node {} {}", node.name, node.op.name()).unwrap();
            if !node.inputs.is_empty() {
                write!(out, " inputs={}", node.inputs.join(",")).unwrap();
            }
            match node.op {
                Op::Dense { out_units } => write!(out, " outUnits={out_units}").unwrap(),
                Op::Conv2d {
                    kernel_h,
                    kernel_w,
                    out_channels,
                    stride,
                } => write!(
                    out,
                    " kernelH={kernel_h} kernelW={kernel_w} outChannels={out_channels} stride={stride} padding=valid"
                )
                .unwrap(),
                Op::MaxPool2d {
                    pool_h,
                    pool_w,
                    stride,
                } => write!(out, " poolH={pool_h} poolW={pool_w} stride={stride}").unwrap(),
                _ => {}
            }
            if !node.weights.is_empty() {
                write!(out, " weights={}", node.weights.join(",")).unwrap();
            }
            out.push('\n');
        }
        for block in &self.blocks {
            let sha = hex::encode(Sha256::digest(block_bytes(block)));
            writeln!(out, "block {} {} {sha}", block.name, dims(&block.shape)).unwrap();
        }
        out
    }

    pub fn weight_blob(&self) -> Vec<u8> {
        self.blocks.iter().flat_map(block_bytes).collect()
    }
}

fn block_bytes(block: &WeightBlock) -> Vec<u8> {
    block.data.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Loads a manifest and the weight file it names (relative to the manifest).
pub fn load_graph(manifest_path: &Path) -> Result<ComputationGraph, GraphError> {
    let manifest = fs::read(manifest_path)?;
    let weights_file = weights_file_of(&manifest)?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let weights = fs::read(dir.join(weights_file))?;
    ComputationGraph::from_bytes(&manifest, &weights)
}

/// The weight file named by a manifest.
pub fn weights_file_of(manifest: &[u8]) -> Result<String, GraphError> {
    let text = std::str::from_utf8(manifest).map_err(|_| GraphError::BadMagic)?;
    parse_manifest(text)?
        .weights_file
        .ok_or_else(|| malformed(0, "missing weights line"))
}

/// Writes `<stem>.tgraph`-style manifest at `manifest_path` and the blob next
/// to it with the `.tgw` extension.
pub fn save_graph(graph: &ComputationGraph, manifest_path: &Path) -> Result<(), GraphError> {
    let weights_path = manifest_path.with_extension("tgw");
    let weights_file = weights_path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| GraphError::Invalid("manifest path has no file name".into()))?
        .to_string();
    fs::write(&weights_path, graph.weight_blob())?;
    fs::write(manifest_path, graph.manifest_text(&weights_file))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = "TGRAPH1
weights tiny.tgw
input x 2
output r
node x input
node d dense inputs=x outUnits=2 weights=d.kernel,d.bias
node r relu inputs=d
";

    fn tiny_blob() -> (String, Vec<u8>) {
        let kernel: Vec<u8> = [1.0f32, 0.0, 0.0, 1.0]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        let bias: Vec<u8> = [0.0f32, -5.0]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        let manifest = format!(
            "{TINY}block d.kernel 2,2 {}\nblock d.bias 2 {}\n",
            hex::encode(Sha256::digest(&kernel)),
            hex::encode(Sha256::digest(&bias))
        );
        (manifest, [kernel, bias].concat())
    }

    #[test]
    fn parses_and_round_trips() {
        let (manifest, blob) = tiny_blob();
        let g = ComputationGraph::from_bytes(manifest.as_bytes(), &blob).unwrap();
        assert_eq!(g.manifest_text("tiny.tgw"), manifest);
        assert_eq!(g.weight_blob(), blob);
        let out = g.eval(&crate::Tensor::vector(vec![3.0, 4.0]), "r").unwrap();
        assert_eq!(out.data(), &[3.0, 0.0]);
    }

    #[test]
    fn flipped_byte_is_a_checksum_mismatch() {
        let (manifest, mut blob) = tiny_blob();
        blob[5] ^= 0x01;
        let err = ComputationGraph::from_bytes(manifest.as_bytes(), &blob).unwrap_err();
        assert!(matches!(err, GraphError::ChecksumMismatch { block } if block == "d.kernel"));
    }

    #[test]
    fn gelu_is_unknown() {
        let (manifest, blob) = tiny_blob();
        let manifest = manifest.replace("node r relu", "node r gelu");
        let err = ComputationGraph::from_bytes(manifest.as_bytes(), &blob).unwrap_err();
        assert!(matches!(err, GraphError::UnknownOp(op) if op == "gelu"));
    }

    #[test]
    fn bad_magic_and_sizes() {
        let (manifest, blob) = tiny_blob();
        let err = ComputationGraph::from_bytes(b"TGRAPH2\n", &blob).unwrap_err();
        assert!(matches!(err, GraphError::BadMagic));
        let err = ComputationGraph::from_bytes(manifest.as_bytes(), &blob[..20]).unwrap_err();
        assert!(matches!(
            err,
            GraphError::WeightBlobSize {
                expected: 24,
                actual: 20
            }
        ));
        let wrong_shape = manifest.replace("block d.bias 2 ", "block d.bias 1,2 ");
        let err = ComputationGraph::from_bytes(wrong_shape.as_bytes(), &blob).unwrap_err();
        assert!(
            matches!(err, GraphError::ShapeInconsistency { .. }),
            "{err:?}"
        );
    }

    #[test]
    fn save_and_load_files() {
        let (manifest, blob) = tiny_blob();
        let g = ComputationGraph::from_bytes(manifest.as_bytes(), &blob).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.tgraph");
        save_graph(&g, &path).unwrap();
        assert_eq!(load_graph(&path).unwrap(), g);
        assert_eq!(fs::read(dir.path().join("tiny.tgw")).unwrap(), blob);
    }
}
