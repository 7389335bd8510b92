use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use tundra_core::pipeline::{
    ParamKind, ParamMap, ParamSpec, ParamValue, StageDescriptor, StageKind, Transformer,
};
use tundra_core::{Broadcast, DType, Dataset, Error, Value};
use tundra_graph::{weights_file_of, ComputationGraph, GraphError, Tensor};

use crate::{boxed, invalid, stage_basics, transformer_factory};

pub const DEFAULT_MINI_BATCH: i64 = 64;

fn model_error(e: GraphError) -> Error {
    match e {
        GraphError::Io(io) => Error::Io(Arc::new(io)),
        other => Error::Model(other.to_string()),
    }
}

/// Per-job counters behind [`NetworkModel::load_metrics`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadMetrics {
    pub job_id: u64,
    /// Graph materializations per worker.
    pub materializations: BTreeMap<usize, u64>,
    /// Mini-batches evaluated, over all partitions.
    pub batches: u64,
}

impl LoadMetrics {
    pub fn total_materializations(&self) -> u64 {
        self.materializations.values().sum()
    }
}

#[derive(Default)]
struct Counters {
    last_job: Option<u64>,
    batches: BTreeMap<u64, u64>,
}

/// Evaluates a computation graph over a vector column, appending the value
/// of `outputNode` flattened to a vector.
///
/// The model files are read and validated when the stage is configured. The
/// serialized graph is broadcast, so each worker deserializes and re-checks
/// it once per job and shares it across its partitions.
pub struct NetworkModel {
    params: ParamMap,
    broadcast: Arc<Broadcast>,
    input_len: usize,
    output_len: usize,
    counters: Arc<Mutex<Counters>>,
}

impl NetworkModel {
    pub fn descriptor() -> StageDescriptor {
        StageDescriptor::new(
            "NetworkModel",
            StageKind::Transformer,
            "Evaluates a computation graph over a vector column in mini-batches.",
            vec![
                ParamSpec::new("modelPath", ParamKind::Path, "Graph manifest file."),
                ParamSpec::new("inputCol", ParamKind::Column, "FloatVector input column.")
                    .with_default(ParamValue::Column("vector".into())),
                ParamSpec::new(
                    "outputCol",
                    ParamKind::Column,
                    "FloatVector column to append.",
                )
                .with_default(ParamValue::Column("output".into())),
                ParamSpec::new("outputNode", ParamKind::String, "Graph node to evaluate."),
                ParamSpec::new(
                    "miniBatchSize",
                    ParamKind::Int,
                    "Rows per kernel invocation.",
                )
                .with_default(ParamValue::Int(DEFAULT_MINI_BATCH)),
            ],
        )
    }

    pub fn new(params: ParamMap) -> Result<NetworkModel, Error> {
        let manifest_path = Path::new(params.str("modelPath"));
        let manifest = std::fs::read(manifest_path)?;
        let weights_file = weights_file_of(&manifest).map_err(model_error)?;
        let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        let weights = std::fs::read(dir.join(weights_file))?;
        NetworkModel::from_bytes(params, &manifest, &weights)
    }

    /// Configures the stage from an in-memory manifest and weight blob.
    pub fn from_bytes(
        params: ParamMap,
        manifest: &[u8],
        weights: &[u8],
    ) -> Result<NetworkModel, Error> {
        if params.int("miniBatchSize") < 1 {
            return Err(invalid("miniBatchSize", "must be at least 1"));
        }
        let graph = ComputationGraph::from_bytes(manifest, weights).map_err(model_error)?;
        let node = params.str("outputNode");
        let shape = graph
            .shape_of(node)
            .ok_or_else(|| Error::Model(GraphError::UnknownNode(node.into()).to_string()))?;
        let output_len = shape.iter().product();
        let mut payload = Vec::with_capacity(8 + manifest.len() + weights.len());
        payload.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        payload.extend_from_slice(manifest);
        payload.extend_from_slice(weights);
        Ok(NetworkModel {
            input_len: graph.input_len(),
            output_len,
            broadcast: Broadcast::new(payload)?,
            params,
            counters: Arc::default(),
        })
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    /// Counters for the most recent job that ran this stage.
    pub fn load_metrics(&self) -> Result<LoadMetrics, Error> {
        let counters = self.counters.lock().unwrap();
        let job_id = counters.last_job.ok_or(Error::NoJobYet)?;
        Ok(LoadMetrics {
            job_id,
            materializations: self.broadcast.materializations(job_id),
            batches: counters.batches.get(&job_id).copied().unwrap_or(0),
        })
    }
}

transformer_factory!(NetworkModel);

fn decode_payload(bytes: &[u8]) -> Result<ComputationGraph, GraphError> {
    let len = u64::from_le_bytes(bytes[..8].try_into().expect("length prefix")) as usize;
    ComputationGraph::from_bytes(&bytes[8..8 + len], &bytes[8 + len..])
}

impl Transformer for NetworkModel {
    stage_basics!("NetworkModel");

    fn transform(&self, ds: &Dataset) -> Result<Dataset, Error> {
        let idx = ds
            .schema()
            .require_typed(self.params.str("inputCol"), &DType::FloatVector)?;
        let schema = ds
            .schema()
            .with(self.params.str("outputCol"), DType::FloatVector)?;
        let broadcast = self.broadcast.clone();
        let counters = self.counters.clone();
        let node = self.params.str("outputNode").to_string();
        let mini_batch = self.params.int("miniBatchSize") as usize;
        let input_len = self.input_len;
        Ok(ds.map_partitions(schema, move |ctx, rows| {
            counters.lock().unwrap().last_job = Some(ctx.job_id());
            if rows.is_empty() {
                return Ok(rows);
            }
            let graph: Arc<ComputationGraph> =
                broadcast.value(ctx, |bytes| decode_payload(bytes).map_err(Into::into))?;
            let mut inputs = Vec::with_capacity(rows.len());
            for row in &rows {
                let v = row.get(idx).as_vector().expect("typed column");
                if v.len() != input_len {
                    return Err(boxed(Error::VectorSizeMismatch {
                        expected: input_len,
                        actual: v.len(),
                    }));
                }
                inputs.push(Tensor::new(graph.input_shape().to_vec(), v.to_vec())?);
            }
            let outputs = graph.eval_batch(&inputs, mini_batch, &node)?;
            let batches = rows.len().div_ceil(mini_batch) as u64;
            *counters
                .lock()
                .unwrap()
                .batches
                .entry(ctx.job_id())
                .or_default() += batches;
            Ok(rows
                .iter()
                .zip(outputs)
                .map(|(row, t)| row.with(Value::vector(t.into_data())))
                .collect())
        }))
    }
}
