//! Line-delimited JSON RPC for the scripting bindings.
//!
//! Each request line is `{"id": int, "method": string, "params": object}` and
//! gets exactly one response line, `{"id", "ok": true, "result"}` or
//! `{"id", "ok": false, "error": {"code", "message"}}`, in request order.
//! Error codes: 1 malformed request or unknown method, 2 validation, 3
//! execution. Handles are opaque strings valid until the server exits.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use serde_json::{json, Map, Value as Json};
use tundra_core::interchange::{read_rows, rows_to_string};
use tundra_core::pipeline::{pipeline_spec_json, PipelineModel, Registry, Stage};
use tundra_core::{Dataset, Engine, Error};
use tundra_ml::corpus::read_corpus;

use crate::{exit_code, EXIT_EXEC, EXIT_USAGE};

pub const PROTOCOL_ERROR: i32 = 1;
pub const PIPELINE_SPEC_FILE: &str = "pipeline.json";

#[derive(Debug, Clone, PartialEq)]
pub struct RpcError {
    pub code: i32,
    pub message: String,
}

impl RpcError {
    fn protocol(message: impl Into<String>) -> RpcError {
        RpcError {
            code: PROTOCOL_ERROR,
            message: message.into(),
        }
    }

    fn invalid(message: impl Into<String>) -> RpcError {
        RpcError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for RpcError {
    fn from(e: Error) -> RpcError {
        RpcError {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for RpcError {
    fn from(e: std::io::Error) -> RpcError {
        RpcError {
            code: EXIT_EXEC,
            message: format!("i/o error: {e}"),
        }
    }
}

struct StageSlot {
    stage: Stage,
    /// Name and explicitly set params, for stages made by `createStage`.
    created: Option<(String, Map<String, Json>)>,
}

pub struct Server {
    engine: Arc<Engine>,
    registry: Registry,
    stages: BTreeMap<String, StageSlot>,
    data: BTreeMap<String, Dataset>,
    next: u64,
}

/// Serves requests from `input` until `shutdown` or end of input.
pub fn serve(
    engine: Arc<Engine>,
    input: impl BufRead,
    output: &mut dyn Write,
) -> std::io::Result<()> {
    let mut server = Server::new(engine);
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (response, stop) = server.handle_line(&line);
        writeln!(output, "{response}")?;
        output.flush()?;
        if stop {
            break;
        }
    }
    Ok(())
}

fn str_param<'a>(params: &'a Json, name: &str) -> Result<&'a str, RpcError> {
    params
        .get(name)
        .and_then(Json::as_str)
        .ok_or_else(|| RpcError::invalid(format!("missing string param `{name}`")))
}

fn partitions_param(params: &Json, engine: &Engine) -> Result<usize, RpcError> {
    match params.get("partitions") {
        None | Some(Json::Null) => Ok(engine.default_partitions()),
        Some(v) => v
            .as_u64()
            .filter(|&n| n > 0)
            .map(|n| n as usize)
            .ok_or_else(|| RpcError::invalid("`partitions` must be a positive integer")),
    }
}

impl Server {
    pub fn new(engine: Arc<Engine>) -> Server {
        Server {
            engine,
            registry: tundra_ml::registry(),
            stages: BTreeMap::new(),
            data: BTreeMap::new(),
            next: 0,
        }
    }

    /// Handles one request line; the flag is set after `shutdown`.
    pub fn handle_line(&mut self, line: &str) -> (String, bool) {
        let (id, outcome, stop) = match serde_json::from_str::<Json>(line) {
            Err(e) => (
                Json::Null,
                Err(RpcError::protocol(format!("bad request: {e}"))),
                false,
            ),
            Ok(req) => {
                let id = req.get("id").cloned().unwrap_or(Json::Null);
                match (id.as_i64(), req.get("method").and_then(Json::as_str)) {
                    (Some(_), Some(method)) => {
                        let params = req.get("params").cloned().unwrap_or_else(|| json!({}));
                        if !params.is_object() {
                            (
                                id,
                                Err(RpcError::protocol("`params` must be an object")),
                                false,
                            )
                        } else {
                            let stop = method == "shutdown";
                            (id, self.call(method, &params), stop)
                        }
                    }
                    _ => (
                        id,
                        Err(RpcError::protocol(
                            "request needs an integer `id` and a string `method`",
                        )),
                        false,
                    ),
                }
            }
        };
        let response = match outcome {
            Ok(result) => json!({"id": id, "ok": true, "result": result}),
            Err(e) => {
                json!({"id": id, "ok": false, "error": {"code": e.code, "message": e.message}})
            }
        };
        (response.to_string(), stop)
    }

    fn handle(&mut self, prefix: &str) -> String {
        self.next += 1;
        format!("{prefix}-{}", self.next)
    }

    fn stage(&self, params: &Json) -> Result<&StageSlot, RpcError> {
        let h = str_param(params, "handle")?;
        self.stages
            .get(h)
            .ok_or_else(|| RpcError::invalid(format!("unknown stage handle `{h}`")))
    }

    fn dataset(&self, params: &Json) -> Result<&Dataset, RpcError> {
        let h = str_param(params, "dataHandle")?;
        self.data
            .get(h)
            .ok_or_else(|| RpcError::invalid(format!("unknown data handle `{h}`")))
    }

    fn add_stage(&mut self, slot: StageSlot) -> Json {
        let h = self.handle("stage");
        self.stages.insert(h.clone(), slot);
        Json::String(h)
    }

    fn add_data(&mut self, ds: Dataset) -> Json {
        let h = self.handle("data");
        self.data.insert(h.clone(), ds);
        Json::String(h)
    }

    fn call(&mut self, method: &str, params: &Json) -> Result<Json, RpcError> {
        match method {
            "describeStages" => {
                Ok(serde_json::from_str(&self.registry.document_json()).expect("valid JSON"))
            }
            "createStage" => {
                let name = str_param(params, "stageName")?.to_string();
                let given = match params.get("params") {
                    None | Some(Json::Null) => Map::new(),
                    Some(Json::Object(m)) => m.clone(),
                    Some(_) => {
                        return Err(RpcError::invalid("`params` of a stage must be an object"))
                    }
                };
                let stage = self
                    .registry
                    .create_json(&name, &Json::Object(given.clone()))?;
                Ok(self.add_stage(StageSlot {
                    stage,
                    created: Some((name, given)),
                }))
            }
            "setParams" => {
                let h = str_param(params, "handle")?.to_string();
                let slot = self.stage(params)?;
                let (name, mut given) = slot.created.clone().ok_or_else(|| {
                    RpcError::invalid(format!("`{h}` is a fitted model; its params are fixed"))
                })?;
                let updates = params
                    .get("params")
                    .and_then(Json::as_object)
                    .ok_or_else(|| RpcError::invalid("missing object param `params`"))?;
                for (k, v) in updates {
                    given.insert(k.clone(), v.clone());
                }
                let stage = self
                    .registry
                    .create_json(&name, &Json::Object(given.clone()))?;
                let resolved = stage.params().to_json();
                self.stages.insert(
                    h,
                    StageSlot {
                        stage,
                        created: Some((name, given)),
                    },
                );
                Ok(resolved)
            }
            "getParams" => Ok(self.stage(params)?.stage.params().to_json()),
            "fit" => {
                let stage = self.stage(params)?.stage.clone();
                let ds = self.dataset(params)?.clone();
                let fitted = match stage {
                    Stage::Estimator(e) => e.fit(&ds)?,
                    Stage::Transformer(t) => t,
                };
                Ok(self.add_stage(StageSlot {
                    stage: Stage::Transformer(fitted),
                    created: None,
                }))
            }
            "transform" => {
                let stage = self.stage(params)?.stage.clone();
                let t = stage.transformer().ok_or_else(|| {
                    RpcError::invalid(format!("`{}` is an estimator; fit it first", stage.name()))
                })?;
                let out = t.transform(self.dataset(params)?)?;
                Ok(self.add_data(out))
            }
            "readImages" => {
                let dir = str_param(params, "dir")?;
                let partitions = partitions_param(params, &self.engine)?;
                let ds = read_corpus(&self.engine, Path::new(dir), partitions)?;
                Ok(self.add_data(ds))
            }
            "readRows" => {
                let path = str_param(params, "path")?;
                let partitions = partitions_param(params, &self.engine)?;
                let (schema, rows) = read_rows(std::fs::File::open(path)?)?;
                let ds = Dataset::from_rows(&self.engine, schema, rows, partitions)?;
                Ok(self.add_data(ds))
            }
            "collect" => {
                let ds = self.dataset(params)?;
                let limit =
                    match params.get("limit") {
                        None | Some(Json::Null) => None,
                        Some(v) => Some(v.as_u64().ok_or_else(|| {
                            RpcError::invalid("`limit` must be a nonnegative integer")
                        })? as usize),
                    };
                let mut rows = ds.collect()?;
                let count = rows.len();
                if let Some(l) = limit {
                    rows.truncate(l);
                }
                Ok(json!({"count": count, "text": rows_to_string(ds.schema(), &rows)?}))
            }
            "savePipeline" => {
                let dir = Path::new(str_param(params, "dir")?);
                let handles = params
                    .get("handles")
                    .and_then(Json::as_array)
                    .ok_or_else(|| RpcError::invalid("missing array param `handles`"))?;
                let mut stages = Vec::new();
                for h in handles {
                    let h = h
                        .as_str()
                        .ok_or_else(|| RpcError::invalid("handles must be strings"))?;
                    let slot = self
                        .stages
                        .get(h)
                        .ok_or_else(|| RpcError::invalid(format!("unknown stage handle `{h}`")))?;
                    stages.push(slot.stage.clone());
                }
                if stages.is_empty() {
                    return Err(RpcError::invalid("a pipeline needs at least one stage"));
                }
                std::fs::create_dir_all(dir)?;
                let spec = dir.join(PIPELINE_SPEC_FILE);
                std::fs::write(&spec, pipeline_spec_json(&stages))?;
                let mut files = vec![spec.display().to_string()];
                if let Some(ts) = stages
                    .iter()
                    .map(|s| s.transformer().cloned())
                    .collect::<Option<Vec<_>>>()
                {
                    let model = PipelineModel::new(ts)?;
                    model.save(dir)?;
                    for i in 0..model.stages().len() {
                        files.push(
                            dir.join(tundra_core::pipeline::stage_file_name(i))
                                .display()
                                .to_string(),
                        );
                    }
                }
                Ok(json!({ "files": files }))
            }
            "shutdown" => Ok(Json::Null),
            other => Err(RpcError::protocol(format!("unknown method `{other}`"))),
        }
    }
}
