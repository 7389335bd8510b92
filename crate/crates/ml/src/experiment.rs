//! The transfer-learning ladder on a camera-trap corpus.
//!
//! Variants:
//! - `LR120`: raw pixels resized to 120x120, then logistic regression.
//! - `RN1`, `RN2`: reference-network features at the two truncation points,
//!   then logistic regression.
//! - `RN2+A`: trained on originals plus flipped copies; test scores of both
//!   parities are averaged per image.
//! - `RN2+A+E`: `RN2+A` scores averaged again over each burst.
//!
//! All variants share one camera-based split. Every random choice derives
//! from the single experiment seed through [`derive_seed`], keyed by what
//! consumes it, so adding or removing a variant never changes another's
//! numbers.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use tundra_core::pipeline::{strings, ParamValue, Transformer};
use tundra_core::{fnv1a64, DType, Dataset, Engine, Error, Value};
use tundra_graph::reference;

use crate::corpus::read_corpus;
use crate::metrics::{
    confusion, metrics_json, roc, roc_csv, scores_and_labels, ConfusionMatrix, RocCurve,
};
use crate::{
    col, param_map, split_by_camera, BurstAssigner, GroupedScoreAverager, ImageFeaturizer,
    ImageSetAugmenter, ImageTransformer, LogisticRegression,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Lr120,
    Rn1,
    Rn2,
    Rn2A,
    Rn2AE,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Lr120,
        Variant::Rn1,
        Variant::Rn2,
        Variant::Rn2A,
        Variant::Rn2AE,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Lr120 => "LR120",
            Variant::Rn1 => "RN1",
            Variant::Rn2 => "RN2",
            Variant::Rn2A => "RN2+A",
            Variant::Rn2AE => "RN2+A+E",
        }
    }

    pub fn parse(name: &str) -> Result<Variant, Error> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| Error::Invalid(format!("unknown variant {name:?}")))
    }

    /// Parses a comma-separated list, keeping order and dropping repeats.
    pub fn parse_list(list: &str) -> Result<Vec<Variant>, Error> {
        let mut out = Vec::new();
        for name in list.split(',').map(str::trim) {
            let v = Variant::parse(name)?;
            if !out.contains(&v) {
                out.push(v);
            }
        }
        Ok(out)
    }

    fn augmented(self) -> bool {
        matches!(self, Variant::Rn2A | Variant::Rn2AE)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The seed for one consumer of the experiment seed.
pub fn derive_seed(seed: u64, consumer: &str) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a64(consumer.as_bytes())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub variants: Vec<Variant>,
    /// Reference network manifest.
    pub model_path: PathBuf,
    /// Partition count of the corpus, fixed so results do not depend on the
    /// worker count.
    pub partitions: usize,
    pub test_fraction: f64,
    pub gap_seconds: i64,
    pub learning_rate: f64,
    pub epochs: i64,
    pub l2: f64,
    /// Weight training rows so both classes carry equal total weight.
    pub balance_classes: bool,
}

impl ExperimentConfig {
    pub fn new(seed: u64, model_path: impl Into<PathBuf>) -> ExperimentConfig {
        ExperimentConfig {
            seed,
            variants: Variant::ALL.to_vec(),
            model_path: model_path.into(),
            partitions: 8,
            test_fraction: 0.2,
            gap_seconds: 60,
            learning_rate: 0.5,
            epochs: 300,
            l2: 1e-4,
            balance_classes: true,
        }
    }
}

pub struct VariantResult {
    pub variant: Variant,
    pub curve: RocCurve,
    pub confusion: ConfusionMatrix,
    /// Test rows with their final scores in column `score`.
    pub scored: Dataset,
    pub test_rows: usize,
}

impl VariantResult {
    pub fn metrics_json(&self) -> String {
        let mut doc = metrics_json(&self.curve, &self.confusion);
        let map = doc.as_object_mut().expect("object");
        map.insert("variant".into(), self.variant.name().into());
        map.insert("testRows".into(), self.test_rows.into());
        let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
        text.push('\n');
        text
    }
}

pub struct ExperimentReport {
    pub seed: u64,
    pub results: Vec<VariantResult>,
}

impl ExperimentReport {
    pub fn get(&self, v: Variant) -> Option<&VariantResult> {
        self.results.iter().find(|r| r.variant == v)
    }

    pub fn auc(&self, v: Variant) -> Option<f64> {
        self.get(v).map(|r| r.curve.auc)
    }

    /// `variant,auc,tp,fp,fn,tn,testRows`, one line per variant in run order.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("variant,auc,tp,fp,fn,tn,testRows\n");
        for r in &self.results {
            let c = &r.confusion;
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.variant, r.curve.auc, c.tp, c.fp, c.fn_, c.tn, r.test_rows
            ));
        }
        out
    }

    /// Writes `<variant>.metrics.json`, `<variant>.roc.csv` and
    /// `summary.csv`; returns the paths written.
    pub fn write(&self, out: &Path) -> Result<Vec<PathBuf>, Error> {
        std::fs::create_dir_all(out)?;
        let mut written = Vec::new();
        for r in &self.results {
            let metrics = out.join(format!("{}.metrics.json", r.variant));
            std::fs::write(&metrics, r.metrics_json())?;
            let curve = out.join(format!("{}.roc.csv", r.variant));
            std::fs::write(&curve, roc_csv(&r.curve))?;
            written.push(metrics);
            written.push(curve);
        }
        let summary = out.join("summary.csv");
        std::fs::write(&summary, self.summary_csv())?;
        written.push(summary);
        Ok(written)
    }
}

/// Row weights for labels 0 and 1.
fn class_weights(train: &Dataset, balance: bool) -> Result<[f64; 2], Error> {
    if !balance {
        return Ok([1.0, 1.0]);
    }
    let mut counts = [0usize; 2];
    for row in train.select(&["label"])?.collect()? {
        match row.get(0) {
            Value::Int64(l @ 0..=1) => counts[*l as usize] += 1,
            other => return Err(Error::NonBinaryLabel(other.as_i64().unwrap_or(-1) as f64)),
        }
    }
    if counts.contains(&0) {
        return Err(Error::DegenerateLabels);
    }
    let n = (counts[0] + counts[1]) as f64;
    Ok([n / (2.0 * counts[0] as f64), n / (2.0 * counts[1] as f64)])
}

/// Reads the corpus at `root` with the configured partitioning and runs the
/// ladder.
pub fn run_experiment(
    engine: &Arc<Engine>,
    root: &Path,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport, Error> {
    let corpus = read_corpus(engine, root, cfg.partitions)?;
    run_on(&corpus, cfg)
}

/// Runs the ladder on a dataset with the corpus schema.
pub fn run_on(corpus: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentReport, Error> {
    if cfg.variants.is_empty() {
        return Err(Error::Invalid("no variants requested".into()));
    }
    let (train, test) = split_by_camera(
        corpus,
        "cameraId",
        cfg.test_fraction,
        derive_seed(cfg.seed, "split"),
    )?;
    let (train, test) = (train.cache(), test.cache());
    let class_weights = class_weights(&train, cfg.balance_classes)?;

    let featurizer = |node: &str| -> Result<ImageFeaturizer, Error> {
        ImageFeaturizer::new(param_map(
            &ImageFeaturizer::descriptor(),
            &[
                ("inputCol", col("image")),
                ("outputCol", col("features")),
                (
                    "modelPath",
                    ParamValue::Path(cfg.model_path.to_string_lossy().into_owned()),
                ),
                ("outputNode", ParamValue::String(node.into())),
            ],
        )?)
    };

    // Original and flipped images featurized once, shared by the RN2 rungs.
    let mut augmented: Option<(Dataset, Dataset)> = None;
    let mut augmented_pair = || -> Result<(Dataset, Dataset), Error> {
        if let Some(pair) = &augmented {
            return Ok(pair.clone());
        }
        let aug = ImageSetAugmenter::new(param_map(&ImageSetAugmenter::descriptor(), &[])?)?;
        let rn2 = featurizer(reference::RN2_NODE)?;
        let pair = (
            rn2.transform(&aug.transform(&train)?)?.cache(),
            rn2.transform(&aug.transform(&test)?)?.cache(),
        );
        augmented = Some(pair.clone());
        Ok(pair)
    };
    let originals = |ds: &Dataset| -> Result<Dataset, Error> {
        let pi = ds.schema().require("parity")?;
        Ok(ds.filter(move |row| Ok(row.get(pi) == &Value::Int64(0))))
    };

    let mut results = Vec::new();
    for &variant in &cfg.variants {
        let (train_x, test_x) = match variant {
            Variant::Lr120 => {
                let pixels = ImageTransformer::new(param_map(
                    &ImageTransformer::descriptor(),
                    &[
                        ("inputCol", col("image")),
                        ("outputCol", col("features")),
                        (
                            "ops",
                            strings(&[
                                "grayscale",
                                "resize:120:120:bilinear",
                                "normalize",
                                "toVector",
                            ]),
                        ),
                    ],
                )?)?;
                (pixels.transform(&train)?, pixels.transform(&test)?)
            }
            Variant::Rn1 => {
                let rn1 = featurizer(reference::RN1_NODE)?;
                (rn1.transform(&train)?, rn1.transform(&test)?)
            }
            Variant::Rn2 => {
                let (tr, te) = augmented_pair()?;
                (originals(&tr)?, originals(&te)?)
            }
            Variant::Rn2A | Variant::Rn2AE => augmented_pair()?,
        };

        let li = train_x.schema().require("label")?;
        let train_x = train_x.with_column("weight", DType::Float64, move |row| {
            Ok(Value::Float64(
                class_weights[(row.get(li) == &Value::Int64(1)) as usize],
            ))
        })?;
        let lr = LogisticRegression::new(param_map(
            &LogisticRegression::descriptor(),
            &[
                ("weightCol", ParamValue::String("weight".into())),
                ("learningRate", ParamValue::Float(cfg.learning_rate)),
                ("epochs", ParamValue::Int(cfg.epochs)),
                ("l2", ParamValue::Float(cfg.l2)),
                (
                    "seed",
                    ParamValue::Int(derive_seed(cfg.seed, variant.name()) as i64),
                ),
            ],
        )?)?;
        let model = lr.fit_model(&train_x)?;
        let mut scored = model.transform(&test_x)?;
        if variant.augmented() {
            let parity = GroupedScoreAverager::new(param_map(
                &GroupedScoreAverager::descriptor(),
                &[("keyCol", col("originId"))],
            )?)?;
            scored = originals(&parity.transform(&scored)?)?;
        }
        if variant == Variant::Rn2AE {
            let bursts = BurstAssigner::new(param_map(
                &BurstAssigner::descriptor(),
                &[("gapSeconds", ParamValue::Int(cfg.gap_seconds))],
            )?)?;
            let average =
                GroupedScoreAverager::new(param_map(&GroupedScoreAverager::descriptor(), &[])?)?;
            scored = average.transform(&bursts.transform(&scored)?)?;
        }
        let scored = scored.cache();
        let (scores, labels) = scores_and_labels(&scored, "score", "label")?;
        results.push(VariantResult {
            variant,
            curve: roc(&scores, &labels)?,
            confusion: confusion(&scores, &labels, 0.5)?,
            test_rows: scores.len(),
            scored,
        });
    }
    Ok(ExperimentReport {
        seed: cfg.seed,
        results,
    })
}
