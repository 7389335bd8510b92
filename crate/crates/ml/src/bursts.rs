use tundra_core::pipeline::{
    ParamKind, ParamMap, ParamSpec, ParamValue, StageDescriptor, StageKind, Transformer,
};
use tundra_core::{DType, Dataset, Error, Row, Value};

use crate::{invalid, stage_basics, transformer_factory};

/// Tags each image with `<cameraId>#<ordinal>`: within a camera, images are
/// sorted by time and a new burst starts whenever the gap to the previous
/// image exceeds `gapSeconds`.
pub struct BurstAssigner {
    params: ParamMap,
}

impl BurstAssigner {
    pub fn descriptor() -> StageDescriptor {
        StageDescriptor::new(
            "BurstAssigner",
            StageKind::Transformer,
            "Groups each camera's images into bursts separated by long gaps.",
            vec![
                ParamSpec::new("cameraCol", ParamKind::Column, "String camera id column.")
                    .with_default(ParamValue::Column("cameraId".into())),
                ParamSpec::new(
                    "timestampCol",
                    ParamKind::Column,
                    "Timestamp or Int64 seconds column.",
                )
                .with_default(ParamValue::Column("timestamp".into())),
                ParamSpec::new(
                    "gapSeconds",
                    ParamKind::Int,
                    "Largest gap inside one burst.",
                )
                .with_default(ParamValue::Int(60)),
                ParamSpec::new("outputCol", ParamKind::Column, "Burst id column to append.")
                    .with_default(ParamValue::Column("burstId".into())),
            ],
        )
    }

    pub fn new(params: ParamMap) -> Result<BurstAssigner, Error> {
        if params.int("gapSeconds") < 0 {
            return Err(invalid("gapSeconds", "must not be negative"));
        }
        Ok(BurstAssigner { params })
    }
}

transformer_factory!(BurstAssigner);

impl Transformer for BurstAssigner {
    stage_basics!("BurstAssigner");

    fn transform(&self, ds: &Dataset) -> Result<Dataset, Error> {
        let schema = ds.schema();
        let camera = self.params.str("cameraCol");
        schema.require_typed(camera, &DType::String)?;
        let ti = schema.require(self.params.str("timestampCol"))?;
        if !matches!(schema.dtype(ti), DType::Timestamp | DType::Int64) {
            return Err(Error::ColumnType {
                column: self.params.str("timestampCol").into(),
                expected: "Timestamp or Int64".into(),
                actual: schema.dtype(ti).name().into(),
            });
        }
        let out_schema = schema.with(self.params.str("outputCol"), DType::String)?;
        let gap = self.params.int("gapSeconds");
        let grouped = ds.group_by_key(camera)?;
        Ok(grouped.map_partitions(out_schema, move |_, groups| {
            let mut out = Vec::new();
            for group in groups {
                let id = group.get(0).as_str().expect("string key");
                let rows = group.get(1).as_rows().expect("grouped rows");
                let mut order: Vec<&Row> = rows.iter().collect();
                order.sort_by_key(|r| r.get(ti).as_i64().expect("typed column"));
                let mut burst = 0;
                let mut prev = None;
                for row in order {
                    let t = row.get(ti).as_i64().expect("typed column");
                    if let Some(p) = prev {
                        if t.saturating_sub(p) > gap {
                            burst += 1;
                        }
                    }
                    prev = Some(t);
                    out.push(row.with(Value::string(format!("{id}#{burst}"))));
                }
            }
            Ok(out)
        }))
    }
}

/// Replaces every row's score with the mean score of the rows sharing its
/// key. Used with burst ids for burst ensembling and with origin ids for
/// parity averaging.
pub struct GroupedScoreAverager {
    params: ParamMap,
}

impl GroupedScoreAverager {
    pub fn descriptor() -> StageDescriptor {
        StageDescriptor::new(
            "GroupedScoreAverager",
            StageKind::Transformer,
            "Replaces each score with the mean score of its key group.",
            vec![
                ParamSpec::new("keyCol", ParamKind::Column, "Grouping key column.")
                    .with_default(ParamValue::Column("burstId".into())),
                ParamSpec::new(
                    "scoreCol",
                    ParamKind::Column,
                    "Float64 score column to average.",
                )
                .with_default(ParamValue::Column("score".into())),
            ],
        )
    }

    pub fn new(params: ParamMap) -> Result<GroupedScoreAverager, Error> {
        Ok(GroupedScoreAverager { params })
    }
}

transformer_factory!(GroupedScoreAverager);

/// The arithmetic mean, summed in order. A group whose scores are already
/// identical keeps that exact value, which makes averaging idempotent.
pub fn group_mean(scores: &[f64]) -> f64 {
    if scores.windows(2).all(|w| w[0].to_bits() == w[1].to_bits()) {
        return scores[0];
    }
    scores.iter().sum::<f64>() / scores.len() as f64
}

impl Transformer for GroupedScoreAverager {
    stage_basics!("GroupedScoreAverager");

    fn transform(&self, ds: &Dataset) -> Result<Dataset, Error> {
        let schema = ds.schema().clone();
        schema.require(self.params.str("keyCol"))?;
        let si = schema.require_typed(self.params.str("scoreCol"), &DType::Float64)?;
        let grouped = ds.group_by_key(self.params.str("keyCol"))?;
        Ok(grouped.map_partitions(schema, move |_, groups| {
            let mut out = Vec::new();
            for group in groups {
                let rows = group.get(1).as_rows().expect("grouped rows");
                let scores: Vec<f64> = rows
                    .iter()
                    .map(|r| r.get(si).as_f64().expect("typed column"))
                    .collect();
                let mean = group_mean(&scores);
                out.extend(rows.iter().map(|r| r.replaced(si, Value::Float64(mean))));
            }
            Ok(out)
        }))
    }
}
