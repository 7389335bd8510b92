//! The scaling workload: featurize synthetic 64x64 grayscale images through
//! the reference network.

use std::path::PathBuf;
use std::sync::Arc;

use tempfile::TempDir;
use tundra_core::pipeline::{ParamValue, Transformer};
use tundra_core::{
    benchmark_scaling, DType, Dataset, Engine, EngineConfig, Error, Row, ScalingRow, Schema, Value,
};
use tundra_graph::reference;
use tundra_image::synth::{generate, CorpusConfig};
use tundra_ml::{param_map, ImageFeaturizer};

pub const DEFAULT_PARTITIONS: usize = 16;

pub fn image_schema() -> Schema {
    Schema::new(vec![("id", DType::Int64), ("image", DType::Image)]).expect("valid schema")
}

/// `n` corpus images, numbered in generation order.
pub fn images(n: usize, seed: u64) -> Vec<Row> {
    let cfg = CorpusConfig {
        cameras: n.div_ceil(12).max(1),
        seed,
        ..CorpusConfig::default()
    };
    generate(&cfg)
        .into_iter()
        .take(n)
        .enumerate()
        .map(|(i, img)| Row::new(vec![Value::Int64(i as i64), Value::image(img.image)]))
        .collect()
}

/// Images plus the reference network on disk.
pub struct Workload {
    rows: Vec<Row>,
    partitions: usize,
    model: PathBuf,
    _dir: TempDir,
}

impl Workload {
    pub fn new(images: usize, partitions: usize) -> Result<Workload, Error> {
        let dir = tempfile::tempdir()?;
        let model = dir.path().join("reference.tgraph");
        tundra_graph::save_graph(&reference::build(reference::DEFAULT_SEED), &model)
            .map_err(|e| Error::Model(e.to_string()))?;
        Ok(Workload {
            rows: self::images(images, 0),
            partitions,
            model,
            _dir: dir,
        })
    }

    pub fn model_path(&self) -> &std::path::Path {
        &self.model
    }

    pub fn featurizer(&self) -> Result<ImageFeaturizer, Error> {
        ImageFeaturizer::new(param_map(
            &ImageFeaturizer::descriptor(),
            &[
                (
                    "modelPath",
                    ParamValue::Path(self.model.display().to_string()),
                ),
                ("outputNode", ParamValue::String(reference::RN2_NODE.into())),
            ],
        )?)
    }

    /// The unfeaturized images on `engine`.
    pub fn source(&self, engine: &Arc<Engine>) -> Result<Dataset, Error> {
        Dataset::from_rows(engine, image_schema(), self.rows.clone(), self.partitions)
    }

    /// The featurized dataset on `engine`, not yet run.
    pub fn dataset(&self, engine: &Arc<Engine>) -> Result<Dataset, Error> {
        self.featurizer()?.transform(&self.source(engine)?)
    }

    pub fn run(&self, engine: &Arc<Engine>) -> Result<usize, Error> {
        self.dataset(engine)?.count()
    }

    /// Median wall time of the featurization per worker count.
    pub fn scaling(
        &self,
        worker_counts: &[usize],
        repetitions: usize,
    ) -> Result<Vec<ScalingRow>, Error> {
        let featurizer = self.featurizer()?;
        benchmark_scaling(
            &EngineConfig::new(1),
            worker_counts,
            repetitions,
            |engine| {
                featurizer
                    .transform(&self.source(engine)?)?
                    .count()
                    .map(drop)
            },
        )
    }
}

/// Parses `1,2,4`.
pub fn parse_worker_list(list: &str) -> Result<Vec<usize>, String> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| format!("{s:?} is not a worker count"))
        })
        .collect()
}
