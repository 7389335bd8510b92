use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::{
    CacheStage, DropColumns, ParamKind, ParamMap, ParamSpec, ParamValue, Pipeline,
    RepartitionStage, SelectColumns, Stage, StageDescriptor, StageKind, Transformer,
};
use crate::Error;

pub const REGISTRY_VERSION: u32 = 1;

pub type BuildFn = fn(ParamMap) -> Result<Stage, Error>;
pub type RestoreFn = fn(ParamMap, &[u8]) -> Result<Arc<dyn Transformer>, Error>;

pub struct StageFactory {
    pub descriptor: StageDescriptor,
    pub build: BuildFn,
    /// Rebuilds a fitted model from its state blob.
    pub restore: Option<RestoreFn>,
}

/// Every stage the engine can build, by name.
#[derive(Default)]
pub struct Registry {
    factories: BTreeMap<String, StageFactory>,
}

impl Registry {
    pub fn new() -> Registry {
        Registry::default()
    }

    /// The column, repartition and cache utilities.
    pub fn with_utilities() -> Registry {
        let mut r = Registry::new();
        for f in [
            SelectColumns::factory(),
            DropColumns::factory(),
            RepartitionStage::factory(),
            CacheStage::factory(),
        ] {
            r.register(f).expect("utility stages are distinct");
        }
        r
    }

    pub fn register(&mut self, factory: StageFactory) -> Result<(), Error> {
        factory.descriptor.validate()?;
        let name = factory.descriptor.name.clone();
        if self.factories.contains_key(&name) {
            return Err(Error::DuplicateStage(name));
        }
        self.factories.insert(name, factory);
        Ok(())
    }

    pub fn descriptor(&self, name: &str) -> Result<&StageDescriptor, Error> {
        self.factory(name).map(|f| &f.descriptor)
    }

    fn factory(&self, name: &str) -> Result<&StageFactory, Error> {
        self.factories
            .get(name)
            .ok_or_else(|| Error::UnknownStageName(name.to_string()))
    }

    /// Descriptors in name order.
    pub fn descriptors(&self) -> impl Iterator<Item = &StageDescriptor> {
        self.factories.values().map(|f| &f.descriptor)
    }

    pub fn len(&self) -> usize {
        self.factories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factories.is_empty()
    }

    pub fn create(&self, name: &str, params: BTreeMap<String, ParamValue>) -> Result<Stage, Error> {
        let f = self.factory(name)?;
        (f.build)(ParamMap::resolve(&f.descriptor, params)?)
    }

    pub fn create_json(&self, name: &str, params: &Json) -> Result<Stage, Error> {
        let f = self.factory(name)?;
        (f.build)(ParamMap::from_json(&f.descriptor, params)?)
    }

    /// Rebuilds a saved stage: fitted models from state, the rest from params.
    pub fn restore(&self, name: &str, params: &Json, state: Option<&[u8]>) -> Result<Stage, Error> {
        let f = self.factory(name)?;
        let params = ParamMap::from_json(&f.descriptor, params)?;
        match (state, f.restore) {
            (Some(bytes), Some(restore)) => Ok(Stage::Transformer(restore(params, bytes)?)),
            (Some(_), None) => Err(Error::CorruptStageFile(format!(
                "stage `{name}` has no learned state"
            ))),
            (None, _) => (f.build)(params),
        }
    }

    /// Builds a pipeline from its JSON spec: `[{"stageName": .., "params": {..}}, ..]`.
    pub fn pipeline_from_spec(&self, text: &str) -> Result<Pipeline, Error> {
        let entries: Vec<PipelineSpecEntry> = serde_json::from_str(text)
            .map_err(|e| Error::InvalidPipeline(format!("bad pipeline spec: {e}")))?;
        let stages = entries
            .iter()
            .enumerate()
            .map(|(index, e)| {
                self.create_json(&e.stage_name, &e.params)
                    .map_err(|err| Error::Stage {
                        index,
                        stage: e.stage_name.clone(),
                        source: Box::new(err),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Pipeline::new(stages)
    }

    pub fn document(&self) -> RegistryDocument {
        RegistryDocument {
            version: REGISTRY_VERSION,
            stages: self
                .descriptors()
                .map(|d| StageEntry {
                    name: d.name.clone(),
                    kind: d.kind.name().to_string(),
                    doc: d.doc.clone(),
                    params: d
                        .params
                        .iter()
                        .map(|p| ParamEntry {
                            name: p.name.clone(),
                            kind: p.kind.name().to_string(),
                            default: p.default.as_ref().map_or(Json::Null, ParamValue::to_json),
                            doc: p.doc.clone(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// The registry document as pretty JSON with a trailing newline.
    pub fn document_json(&self) -> String {
        self.document().to_json()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PipelineSpecEntry {
    pub stage_name: String,
    #[serde(default)]
    pub params: Json,
}

/// Serialize a pipeline as a spec document.
pub fn pipeline_spec_json(stages: &[Stage]) -> String {
    let entries: Vec<PipelineSpecEntry> = stages
        .iter()
        .map(|s| PipelineSpecEntry {
            stage_name: s.name().to_string(),
            params: s.params().to_json(),
        })
        .collect();
    serde_json::to_string_pretty(&entries).expect("spec serializes") + "\n"
}

/// Machine-readable description of every stage: the only input of the
/// bindings generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryDocument {
    pub version: u32,
    pub stages: Vec<StageEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageEntry {
    pub name: String,
    pub kind: String,
    #[serde(default)]
    pub doc: String,
    pub params: Vec<ParamEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamEntry {
    pub name: String,
    pub kind: String,
    pub default: Json,
    #[serde(default)]
    pub doc: String,
}

impl RegistryDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes") + "\n"
    }

    /// Parses and validates a document: known kinds, unique names, defaults
    /// matching their kinds.
    pub fn parse(text: &str) -> Result<RegistryDocument, Error> {
        let doc: RegistryDocument = serde_json::from_str(text)
            .map_err(|e| Error::Invalid(format!("bad registry document: {e}")))?;
        doc.descriptors()?;
        Ok(doc)
    }

    pub fn descriptors(&self) -> Result<Vec<StageDescriptor>, Error> {
        let mut names = HashSet::new();
        self.stages
            .iter()
            .map(|s| {
                if !names.insert(s.name.as_str()) {
                    return Err(Error::DuplicateStage(s.name.clone()));
                }
                let kind = StageKind::from_name(&s.kind)
                    .ok_or_else(|| Error::Invalid(format!("unknown stage kind `{}`", s.kind)))?;
                let params = s
                    .params
                    .iter()
                    .map(|p| {
                        let pk = ParamKind::from_name(&p.kind).ok_or_else(|| {
                            Error::Invalid(format!("unknown param kind `{}`", p.kind))
                        })?;
                        let default = match &p.default {
                            Json::Null => None,
                            v => Some(ParamValue::from_json(pk, v).ok_or_else(|| {
                                Error::ParamType {
                                    param: p.name.clone(),
                                    expected: pk.to_string(),
                                }
                            })?),
                        };
                        Ok(ParamSpec {
                            name: p.name.clone(),
                            kind: pk,
                            default,
                            doc: p.doc.clone(),
                        })
                    })
                    .collect::<Result<Vec<_>, Error>>()?;
                let d = StageDescriptor {
                    name: s.name.clone(),
                    kind,
                    doc: s.doc.clone(),
                    params,
                };
                d.validate()?;
                Ok(d)
            })
            .collect()
    }
}
