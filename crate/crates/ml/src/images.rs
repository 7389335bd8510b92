use std::sync::Arc;

use tundra_core::pipeline::{
    ParamKind, ParamMap, ParamSpec, ParamValue, StageDescriptor, StageKind, Transformer,
};
use tundra_core::{fnv1a64, DType, Dataset, Error, Message, Value};
use tundra_image::{ChainOutput, ImageOp, ImageOpChain, ResizeMethod};

use crate::network::DEFAULT_MINI_BATCH;
use crate::{invalid, param_map, stage_basics, transformer_factory, NetworkModel};

/// Applies an image op chain to every row.
pub struct ImageTransformer {
    params: ParamMap,
    chain: Arc<ImageOpChain>,
}

impl ImageTransformer {
    pub fn descriptor() -> StageDescriptor {
        StageDescriptor::new(
            "ImageTransformer",
            StageKind::Transformer,
            "Runs a fused chain of image ops on an image column.",
            vec![
                ParamSpec::new("inputCol", ParamKind::Column, "Image column.")
                    .with_default(ParamValue::Column("image".into())),
                ParamSpec::new("outputCol", ParamKind::Column, "Image or FloatVector column to append.")
                    .with_default(ParamValue::Column("transformed".into())),
                ParamSpec::new(
                    "ops",
                    ParamKind::StringList,
                    "Ops such as resize:64:64:bilinear, flipHorizontal, grayscale, cropCenter:32:32, normalize:0.5:0, toVector.",
                ),
            ],
        )
    }

    pub fn new(params: ParamMap) -> Result<ImageTransformer, Error> {
        let chain = ImageOpChain::parse(params.strings("ops"))
            .map_err(|e| invalid("ops", e.to_string()))?;
        Ok(ImageTransformer {
            params,
            chain: Arc::new(chain),
        })
    }

    pub fn chain(&self) -> &ImageOpChain {
        &self.chain
    }
}

transformer_factory!(ImageTransformer);

impl Transformer for ImageTransformer {
    stage_basics!("ImageTransformer");

    fn transform(&self, ds: &Dataset) -> Result<Dataset, Error> {
        let idx = ds
            .schema()
            .require_typed(self.params.str("inputCol"), &DType::Image)?;
        let dtype = if self.chain.produces_vector() {
            DType::FloatVector
        } else {
            DType::Image
        };
        let schema = ds.schema().with(self.params.str("outputCol"), dtype)?;
        let chain = self.chain.clone();
        Ok(ds.map_partitions(schema, move |ctx, rows| {
            let mut out = Vec::with_capacity(rows.len());
            for (i, row) in rows.iter().enumerate() {
                let img = row.get(idx).as_image().expect("typed column");
                let value = match chain.apply(img) {
                    Ok(ChainOutput::Image(img)) => Value::image(img),
                    Ok(ChainOutput::Vector(v)) => Value::vector(v),
                    Err(e) => {
                        return Err(Box::new(Message(format!(
                            "row {i} of partition {} ({}): {e}",
                            ctx.partition(),
                            img.path()
                        ))))
                    }
                };
                out.push(row.with(value));
            }
            Ok(out)
        }))
    }
}

/// Resize, normalize and vectorize an image column, then run it through a
/// network: one stage for `ImageTransformer` followed by `NetworkModel`.
pub struct ImageFeaturizer {
    params: ParamMap,
    pixels: ImageTransformer,
    network: NetworkModel,
    scratch: String,
}

impl ImageFeaturizer {
    pub fn descriptor() -> StageDescriptor {
        StageDescriptor::new(
            "ImageFeaturizer",
            StageKind::Transformer,
            "Resizes images to the network input and appends the value of a network node.",
            vec![
                ParamSpec::new("inputCol", ParamKind::Column, "Image column.")
                    .with_default(ParamValue::Column("image".into())),
                ParamSpec::new(
                    "outputCol",
                    ParamKind::Column,
                    "FloatVector column to append.",
                )
                .with_default(ParamValue::Column("features".into())),
                ParamSpec::new("modelPath", ParamKind::Path, "Graph manifest file."),
                ParamSpec::new("outputNode", ParamKind::String, "Graph node to evaluate."),
                ParamSpec::new("resizeW", ParamKind::Int, "Resize width.")
                    .with_default(ParamValue::Int(64)),
                ParamSpec::new("resizeH", ParamKind::Int, "Resize height.")
                    .with_default(ParamValue::Int(64)),
            ],
        )
    }

    pub fn new(params: ParamMap) -> Result<ImageFeaturizer, Error> {
        let scratch = format!("{}__pixels", params.str("outputCol"));
        let network = NetworkModel::new(param_map(
            &NetworkModel::descriptor(),
            &[
                (
                    "modelPath",
                    params.get("modelPath").expect("resolved").clone(),
                ),
                ("inputCol", ParamValue::Column(scratch.clone())),
                (
                    "outputCol",
                    params.get("outputCol").expect("resolved").clone(),
                ),
                (
                    "outputNode",
                    params.get("outputNode").expect("resolved").clone(),
                ),
                ("miniBatchSize", ParamValue::Int(DEFAULT_MINI_BATCH)),
            ],
        )?)?;
        let (w, h) = (params.int("resizeW"), params.int("resizeH"));
        if w < 1 || h < 1 {
            return Err(invalid("resizeW", "resize dimensions must be at least 1"));
        }
        let (w, h) = (w as usize, h as usize);
        let channels = if network.input_len() % (w * h) == 0 {
            network.input_len() / (w * h)
        } else {
            0
        };
        if channels != 1 && channels != 3 {
            return Err(Error::VectorSizeMismatch {
                expected: network.input_len(),
                actual: w * h,
            });
        }
        let mut ops = Vec::new();
        if channels == 1 {
            ops.push(ImageOp::Grayscale);
        }
        ops.push(ImageOp::Resize {
            width: w,
            height: h,
            method: ResizeMethod::Bilinear,
        });
        ops.push(ImageOp::Normalize {
            scale: tundra_image::DEFAULT_SCALE,
            offset: tundra_image::DEFAULT_OFFSET,
        });
        ops.push(ImageOp::ToVector);
        let specs: Vec<String> = ops.iter().map(|op| op.to_string()).collect();
        let pixels = ImageTransformer::new(param_map(
            &ImageTransformer::descriptor(),
            &[
                (
                    "inputCol",
                    params.get("inputCol").expect("resolved").clone(),
                ),
                ("outputCol", ParamValue::Column(scratch.clone())),
                ("ops", ParamValue::StringList(specs)),
            ],
        )?)?;
        Ok(ImageFeaturizer {
            params,
            pixels,
            network,
            scratch,
        })
    }

    pub fn network(&self) -> &NetworkModel {
        &self.network
    }

    /// The preprocessing half, as a standalone stage.
    pub fn pixels(&self) -> &ImageTransformer {
        &self.pixels
    }
}

transformer_factory!(ImageFeaturizer);

impl Transformer for ImageFeaturizer {
    stage_basics!("ImageFeaturizer");

    fn transform(&self, ds: &Dataset) -> Result<Dataset, Error> {
        let pixels = self.pixels.transform(ds)?;
        let features = self.network.transform(&pixels)?;
        features.drop_columns(&[self.scratch.as_str()])
    }
}

/// Emits every row twice: as is with parity 0 and horizontally flipped with
/// parity 1, both tagged with the row's origin id (a hash of its contents).
pub struct ImageSetAugmenter {
    params: ParamMap,
}

impl ImageSetAugmenter {
    pub fn descriptor() -> StageDescriptor {
        StageDescriptor::new(
            "ImageSetAugmenter",
            StageKind::Transformer,
            "Adds a horizontally flipped copy of every image.",
            vec![
                ParamSpec::new("inputCol", ParamKind::Column, "Image column.")
                    .with_default(ParamValue::Column("image".into())),
                ParamSpec::new("mode", ParamKind::String, "`train` or `score`.")
                    .with_default(ParamValue::String("train".into())),
                ParamSpec::new(
                    "parityCol",
                    ParamKind::Column,
                    "Int64 column, 0 original and 1 flipped.",
                )
                .with_default(ParamValue::Column("parity".into())),
                ParamSpec::new(
                    "originIdCol",
                    ParamKind::Column,
                    "Int64 id shared by both copies.",
                )
                .with_default(ParamValue::Column("originId".into())),
            ],
        )
    }

    pub fn new(params: ParamMap) -> Result<ImageSetAugmenter, Error> {
        match params.str("mode") {
            "train" | "score" => Ok(ImageSetAugmenter { params }),
            other => Err(invalid(
                "mode",
                format!("{other:?} is neither train nor score"),
            )),
        }
    }
}

transformer_factory!(ImageSetAugmenter);

/// The stable id of a row: FNV-1a64 of its canonical encoding.
pub fn origin_id(row: &tundra_core::Row) -> i64 {
    fnv1a64(&row.encode()) as i64
}

impl Transformer for ImageSetAugmenter {
    stage_basics!("ImageSetAugmenter");

    fn transform(&self, ds: &Dataset) -> Result<Dataset, Error> {
        let idx = ds
            .schema()
            .require_typed(self.params.str("inputCol"), &DType::Image)?;
        let schema = ds
            .schema()
            .with(self.params.str("parityCol"), DType::Int64)?
            .with(self.params.str("originIdCol"), DType::Int64)?;
        let flip = ImageOpChain::new(vec![ImageOp::FlipHorizontal]).expect("valid chain");
        Ok(ds.map_partitions(schema, move |_, rows| {
            let mut out = Vec::with_capacity(rows.len() * 2);
            for row in rows {
                let id = Value::Int64(origin_id(&row));
                let img = row.get(idx).as_image().expect("typed column");
                let flipped = flip
                    .apply(img)?
                    .into_image()
                    .expect("flip yields an image")
                    .with_path(img.path());
                let mirrored = row.replaced(idx, Value::image(flipped));
                out.push(row.with(Value::Int64(0)).with(id.clone()));
                out.push(mirrored.with(Value::Int64(1)).with(id));
            }
            Ok(out)
        }))
    }
}
