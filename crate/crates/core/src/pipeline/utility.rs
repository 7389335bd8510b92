use std::any::Any;
use std::sync::Arc;

use super::{ParamKind, ParamMap, ParamSpec, ParamValue, Stage, StageDescriptor, StageFactory};
use super::{StageKind, Transformer};
use crate::{Dataset, Error};

macro_rules! simple_transformer {
    ($ty:ident) => {
        impl $ty {
            pub fn new(params: ParamMap) -> Result<$ty, Error> {
                let stage = $ty { params };
                stage.check()?;
                Ok(stage)
            }

            pub fn factory() -> StageFactory {
                StageFactory {
                    descriptor: $ty::descriptor(),
                    build: |p| Ok(Stage::Transformer(Arc::new($ty::new(p)?))),
                    restore: None,
                }
            }
        }
    };
}

pub struct SelectColumns {
    params: ParamMap,
}

impl SelectColumns {
    pub fn descriptor() -> StageDescriptor {
        StageDescriptor::new(
            "SelectColumns",
            StageKind::Transformer,
            "Keeps the listed columns, in the listed order.",
            vec![ParamSpec::new(
                "cols",
                ParamKind::StringList,
                "Columns to keep.",
            )],
        )
    }

    fn check(&self) -> Result<(), Error> {
        if self.params.strings("cols").is_empty() {
            return Err(Error::InvalidParam {
                param: "cols".into(),
                reason: "at least one column is required".into(),
            });
        }
        Ok(())
    }
}

simple_transformer!(SelectColumns);

impl Transformer for SelectColumns {
    fn stage_name(&self) -> &str {
        "SelectColumns"
    }

    fn params(&self) -> &ParamMap {
        &self.params
    }

    fn transform(&self, ds: &Dataset) -> Result<Dataset, Error> {
        let cols: Vec<&str> = self
            .params
            .strings("cols")
            .iter()
            .map(String::as_str)
            .collect();
        ds.select(&cols)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

pub struct DropColumns {
    params: ParamMap,
}

impl DropColumns {
    pub fn descriptor() -> StageDescriptor {
        StageDescriptor::new(
            "DropColumns",
            StageKind::Transformer,
            "Removes the listed columns.",
            vec![ParamSpec::new(
                "cols",
                ParamKind::StringList,
                "Columns to remove.",
            )],
        )
    }

    fn check(&self) -> Result<(), Error> {
        Ok(())
    }
}

simple_transformer!(DropColumns);

impl Transformer for DropColumns {
    fn stage_name(&self) -> &str {
        "DropColumns"
    }

    fn params(&self) -> &ParamMap {
        &self.params
    }

    fn transform(&self, ds: &Dataset) -> Result<Dataset, Error> {
        let cols: Vec<&str> = self
            .params
            .strings("cols")
            .iter()
            .map(String::as_str)
            .collect();
        ds.drop_columns(&cols)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

pub struct RepartitionStage {
    params: ParamMap,
}

impl RepartitionStage {
    pub fn descriptor() -> StageDescriptor {
        StageDescriptor::new(
            "RepartitionStage",
            StageKind::Transformer,
            "Shuffles rows into a fixed number of partitions.",
            vec![ParamSpec::new(
                "numPartitions",
                ParamKind::Int,
                "Partition count, at least 1.",
            )],
        )
    }

    fn check(&self) -> Result<(), Error> {
        let n = self.params.int("numPartitions");
        if n < 1 {
            return Err(Error::InvalidPartitionCount(n.max(0) as usize));
        }
        Ok(())
    }
}

simple_transformer!(RepartitionStage);

impl Transformer for RepartitionStage {
    fn stage_name(&self) -> &str {
        "RepartitionStage"
    }

    fn params(&self) -> &ParamMap {
        &self.params
    }

    fn transform(&self, ds: &Dataset) -> Result<Dataset, Error> {
        ds.repartition(self.params.int("numPartitions") as usize)
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

pub struct CacheStage {
    params: ParamMap,
}

impl CacheStage {
    pub fn descriptor() -> StageDescriptor {
        StageDescriptor::new(
            "CacheStage",
            StageKind::Transformer,
            "Keeps computed partitions in memory for later actions.",
            vec![],
        )
    }

    fn check(&self) -> Result<(), Error> {
        Ok(())
    }
}

simple_transformer!(CacheStage);

impl Transformer for CacheStage {
    fn stage_name(&self) -> &str {
        "CacheStage"
    }

    fn params(&self) -> &ParamMap {
        &self.params
    }

    fn transform(&self, ds: &Dataset) -> Result<Dataset, Error> {
        Ok(ds.cache())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Shorthand for tests and callers building stages in code.
pub fn strings(items: &[&str]) -> ParamValue {
    ParamValue::StringList(items.iter().map(|s| s.to_string()).collect())
}
