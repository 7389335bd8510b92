use tundra_core::pipeline::{
    ParamKind, ParamMap, ParamSpec, ParamValue, StageDescriptor, StageKind, Transformer,
};
use tundra_core::{fnv1a64, DType, Dataset, Error, Value};

use crate::{invalid, stage_basics, transformer_factory};

/// Whether `camera` belongs to the test side: FNV-1a64 of the camera id
/// followed by the seed's little-endian bytes, modulo one million, compared
/// against `test_fraction` of a million.
pub fn camera_in_test(camera: &str, seed: u64, test_fraction: f64) -> bool {
    let mut bytes = Vec::with_capacity(camera.len() + 8);
    bytes.extend_from_slice(camera.as_bytes());
    bytes.extend_from_slice(&seed.to_le_bytes());
    ((fnv1a64(&bytes) % 1_000_000) as f64) < test_fraction * 1e6
}

fn check_fraction(f: f64) -> Result<(), Error> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(invalid("testFraction", format!("{f} is not inside (0, 1)")))
    }
}

/// Splits whole cameras into `(train, test)`.
pub fn split_by_camera(
    ds: &Dataset,
    camera_col: &str,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), Error> {
    check_fraction(test_fraction)?;
    let ci = ds.schema().require_typed(camera_col, &DType::String)?;
    let side = move |want_test: bool| {
        move |row: &tundra_core::Row| {
            let cam = row.get(ci).as_str().expect("typed column");
            Ok(camera_in_test(cam, seed, test_fraction) == want_test)
        }
    };
    Ok((ds.filter(side(false)), ds.filter(side(true))))
}

/// Tags every row `train` or `test` by its camera. The two-way split itself
/// is [`split_by_camera`].
pub struct CameraSplitter {
    params: ParamMap,
}

impl CameraSplitter {
    pub fn descriptor() -> StageDescriptor {
        StageDescriptor::new(
            "CameraSplitter",
            StageKind::Transformer,
            "Assigns whole cameras to the train or test side.",
            vec![
                ParamSpec::new("cameraCol", ParamKind::Column, "String camera id column.")
                    .with_default(ParamValue::Column("cameraId".into())),
                ParamSpec::new(
                    "testFraction",
                    ParamKind::Float,
                    "Expected share of test cameras.",
                )
                .with_default(ParamValue::Float(0.2)),
                ParamSpec::new("seed", ParamKind::Int, "Split seed.")
                    .with_default(ParamValue::Int(0)),
                ParamSpec::new(
                    "outputCol",
                    ParamKind::Column,
                    "Column receiving `train` or `test`.",
                )
                .with_default(ParamValue::Column("split".into())),
            ],
        )
    }

    pub fn new(params: ParamMap) -> Result<CameraSplitter, Error> {
        check_fraction(params.float("testFraction"))?;
        Ok(CameraSplitter { params })
    }
}

transformer_factory!(CameraSplitter);

impl Transformer for CameraSplitter {
    stage_basics!("CameraSplitter");

    fn transform(&self, ds: &Dataset) -> Result<Dataset, Error> {
        let ci = ds
            .schema()
            .require_typed(self.params.str("cameraCol"), &DType::String)?;
        let seed = self.params.int("seed") as u64;
        let fraction = self.params.float("testFraction");
        ds.with_column(self.params.str("outputCol"), DType::String, move |row| {
            let cam = row.get(ci).as_str().expect("typed column");
            Ok(Value::string(if camera_in_test(cam, seed, fraction) {
                "test"
            } else {
                "train"
            }))
        })
    }
}
