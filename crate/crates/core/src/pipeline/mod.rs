//! Estimators, transformers and pipelines over [`Dataset`]s.

mod params;
mod registry;
mod stagefile;
mod utility;

use std::any::Any;
use std::path::Path;
use std::sync::Arc;

use crate::{Dataset, Error};

pub use params::{ParamKind, ParamMap, ParamSpec, ParamValue, StageDescriptor, StageKind};
pub use registry::{
    pipeline_spec_json, BuildFn, ParamEntry, PipelineSpecEntry, Registry, RegistryDocument,
    RestoreFn, StageEntry, StageFactory, REGISTRY_VERSION,
};
pub use stagefile::{decode_stage, encode_stage, load_stage, save_stage, STAGE_MAGIC};
pub use utility::{strings, CacheStage, DropColumns, RepartitionStage, SelectColumns};

/// A referentially transparent dataset-to-dataset function.
pub trait Transformer: Send + Sync {
    fn stage_name(&self) -> &str;
    fn params(&self) -> &ParamMap;
    fn transform(&self, ds: &Dataset) -> Result<Dataset, Error>;
    /// Learned state, for fitted models.
    fn state(&self) -> Option<Vec<u8>> {
        None
    }
    fn as_any(&self) -> &dyn Any;
}

/// Learns a [`Transformer`] from a dataset.
pub trait Estimator: Send + Sync {
    fn stage_name(&self) -> &str;
    fn params(&self) -> &ParamMap;
    fn fit(&self, ds: &Dataset) -> Result<Arc<dyn Transformer>, Error>;
    fn as_any(&self) -> &dyn Any;
}

#[derive(Clone)]
pub enum Stage {
    Estimator(Arc<dyn Estimator>),
    Transformer(Arc<dyn Transformer>),
}

impl Stage {
    pub fn name(&self) -> &str {
        match self {
            Stage::Estimator(e) => e.stage_name(),
            Stage::Transformer(t) => t.stage_name(),
        }
    }

    pub fn kind(&self) -> StageKind {
        match self {
            Stage::Estimator(_) => StageKind::Estimator,
            Stage::Transformer(_) => StageKind::Transformer,
        }
    }

    pub fn params(&self) -> &ParamMap {
        match self {
            Stage::Estimator(e) => e.params(),
            Stage::Transformer(t) => t.params(),
        }
    }

    pub fn state(&self) -> Option<Vec<u8>> {
        match self {
            Stage::Estimator(_) => None,
            Stage::Transformer(t) => t.state(),
        }
    }

    pub fn transformer(&self) -> Option<&Arc<dyn Transformer>> {
        match self {
            Stage::Transformer(t) => Some(t),
            Stage::Estimator(_) => None,
        }
    }
}

impl std::fmt::Debug for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}({})", self.name(), self.params().to_json())
    }
}

/// A nonempty ordered list of stages.
#[derive(Clone, Debug)]
pub struct Pipeline {
    stages: Vec<Stage>,
}

impl Pipeline {
    pub fn new(stages: Vec<Stage>) -> Result<Pipeline, Error> {
        if stages.is_empty() {
            return Err(Error::InvalidPipeline(
                "a pipeline needs at least one stage".into(),
            ));
        }
        Ok(Pipeline { stages })
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Fits estimators in order, each on the output of everything before it.
    pub fn fit(&self, ds: &Dataset) -> Result<PipelineModel, Error> {
        let mut current = ds.clone();
        let mut fitted = Vec::with_capacity(self.stages.len());
        let last = self.stages.len() - 1;
        for (index, stage) in self.stages.iter().enumerate() {
            let wrap = |e: Error| Error::Stage {
                index,
                stage: stage.name().to_string(),
                source: Box::new(e),
            };
            let t = match stage {
                Stage::Transformer(t) => t.clone(),
                Stage::Estimator(e) => e.fit(&current).map_err(wrap)?,
            };
            if index < last {
                current = t.transform(&current).map_err(wrap)?;
            }
            fitted.push(t);
        }
        Ok(PipelineModel { stages: fitted })
    }
}

/// The fitted form of a [`Pipeline`]: transformers only.
#[derive(Clone)]
pub struct PipelineModel {
    stages: Vec<Arc<dyn Transformer>>,
}

impl PipelineModel {
    pub fn new(stages: Vec<Arc<dyn Transformer>>) -> Result<PipelineModel, Error> {
        if stages.is_empty() {
            return Err(Error::InvalidPipeline(
                "a pipeline needs at least one stage".into(),
            ));
        }
        Ok(PipelineModel { stages })
    }

    pub fn stages(&self) -> &[Arc<dyn Transformer>] {
        &self.stages
    }

    pub fn transform(&self, ds: &Dataset) -> Result<Dataset, Error> {
        let mut current = ds.clone();
        for (index, t) in self.stages.iter().enumerate() {
            current = t.transform(&current).map_err(|e| Error::Stage {
                index,
                stage: t.stage_name().to_string(),
                source: Box::new(e),
            })?;
        }
        Ok(current)
    }

    /// Writes one stage file per stage, `stage-000.tstage` onwards.
    pub fn save(&self, dir: &Path) -> Result<(), Error> {
        std::fs::create_dir_all(dir)?;
        for (i, t) in self.stages.iter().enumerate() {
            save_stage(
                &Stage::Transformer(t.clone()),
                &dir.join(stage_file_name(i)),
            )?;
        }
        Ok(())
    }

    pub fn load(dir: &Path, registry: &Registry) -> Result<PipelineModel, Error> {
        let mut stages = Vec::new();
        loop {
            let path = dir.join(stage_file_name(stages.len()));
            if !path.exists() {
                break;
            }
            match load_stage(&path, registry)? {
                Stage::Transformer(t) => stages.push(t),
                Stage::Estimator(_) => {
                    return Err(Error::CorruptStageFile(format!(
                        "{} holds an unfitted estimator",
                        path.display()
                    )))
                }
            }
        }
        PipelineModel::new(stages)
    }
}

pub fn stage_file_name(index: usize) -> String {
    format!("stage-{index:03}.tstage")
}
