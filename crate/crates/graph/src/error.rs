use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("manifest does not start with the TGRAPH1 magic")]
    BadMagic,
    #[error("checksum mismatch for weight block {block}")]
    ChecksumMismatch { block: String },
    #[error("shape inconsistency at node {node}: {reason}")]
    ShapeInconsistency { node: String, reason: String },
    #[error("unknown op {0:?}")]
    UnknownOp(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("input shape {actual:?} does not match expected {expected:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("malformed manifest at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("weight blob holds {actual} bytes, manifest declares {expected}")]
    WeightBlobSize { expected: usize, actual: usize },
    #[error("tensor data length {actual} does not match shape {shape:?}")]
    TensorData { shape: Vec<usize>, actual: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
