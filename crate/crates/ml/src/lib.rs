//! The learning half of tundra: logistic regression, vector assembly,
//! evaluation metrics, burst and parity ensembling, camera-based splitting,
//! the image and network stages, the corpus reader and the experiment ladder.
//!
//! Every stage here is registered in [`registry()`], which is what pipeline
//! specs, the RPC server and the bindings generator see.

mod assembler;
mod bursts;
pub mod corpus;
pub mod experiment;
mod images;
pub mod lr;
pub mod metrics;
mod network;
mod registry;
mod split;

use std::collections::BTreeMap;

use tundra_core::pipeline::{ParamMap, ParamValue, StageDescriptor};
use tundra_core::{BoxError, Error};

pub use assembler::VectorAssembler;
pub use bursts::{BurstAssigner, GroupedScoreAverager};
pub use images::{ImageFeaturizer, ImageSetAugmenter, ImageTransformer};
pub use lr::{LogisticRegression, LogisticRegressionModel};
pub use network::{LoadMetrics, NetworkModel};
pub use registry::registry;
pub use split::{camera_in_test, split_by_camera, CameraSplitter};

/// Resolves `given` against `desc`, filling defaults.
pub fn param_map(desc: &StageDescriptor, given: &[(&str, ParamValue)]) -> Result<ParamMap, Error> {
    let given: BTreeMap<String, ParamValue> = given
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect();
    ParamMap::resolve(desc, given)
}

pub fn col(name: &str) -> ParamValue {
    ParamValue::Column(name.to_string())
}

fn boxed(e: Error) -> BoxError {
    Box::new(e)
}

fn invalid(param: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        param: param.to_string(),
        reason: reason.into(),
    }
}

/// `stage_name`, `params` and `as_any` for stages holding `params: ParamMap`.
macro_rules! stage_basics {
    ($name:literal) => {
        fn stage_name(&self) -> &str {
            $name
        }

        fn params(&self) -> &tundra_core::pipeline::ParamMap {
            &self.params
        }

        fn as_any(&self) -> &dyn std::any::Any {
            self
        }
    };
}

/// `new` (validating with `check`) and `factory` for transformers.
macro_rules! transformer_factory {
    ($ty:ident) => {
        impl $ty {
            pub fn factory() -> tundra_core::pipeline::StageFactory {
                tundra_core::pipeline::StageFactory {
                    descriptor: $ty::descriptor(),
                    build: |p| {
                        Ok(tundra_core::pipeline::Stage::Transformer(
                            std::sync::Arc::new($ty::new(p)?),
                        ))
                    },
                    restore: None,
                }
            }
        }
    };
}

pub(crate) use {stage_basics, transformer_factory};
