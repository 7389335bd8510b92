use std::sync::{Arc, OnceLock};

use tundra_core::pipeline::{
    ParamKind, ParamMap, ParamSpec, ParamValue, StageDescriptor, StageKind, Transformer,
};
use tundra_core::{DType, Dataset, Error, Value};

use crate::{boxed, invalid, stage_basics, transformer_factory};

/// Concatenates Float64 and FloatVector columns into one FloatVector.
pub struct VectorAssembler {
    params: ParamMap,
}

impl VectorAssembler {
    pub fn descriptor() -> StageDescriptor {
        StageDescriptor::new(
            "VectorAssembler",
            StageKind::Transformer,
            "Concatenates numeric and vector columns, in the listed order, into one vector.",
            vec![
                ParamSpec::new(
                    "inputCols",
                    ParamKind::StringList,
                    "Float64 or FloatVector columns.",
                ),
                ParamSpec::new("outputCol", ParamKind::Column, "Vector column to append.")
                    .with_default(ParamValue::Column("features".into())),
            ],
        )
    }

    pub fn new(params: ParamMap) -> Result<VectorAssembler, Error> {
        if params.strings("inputCols").is_empty() {
            return Err(invalid("inputCols", "at least one column is required"));
        }
        Ok(VectorAssembler { params })
    }
}

transformer_factory!(VectorAssembler);

#[derive(Clone, Copy)]
enum Part {
    Scalar(usize),
    Vector(usize, usize),
}

impl Transformer for VectorAssembler {
    stage_basics!("VectorAssembler");

    fn transform(&self, ds: &Dataset) -> Result<Dataset, Error> {
        let schema = ds.schema();
        let mut parts = Vec::new();
        let mut vectors = 0;
        for name in self.params.strings("inputCols") {
            let i = schema.require(name)?;
            parts.push(match schema.dtype(i) {
                DType::Float64 => Part::Scalar(i),
                DType::FloatVector => {
                    vectors += 1;
                    Part::Vector(i, vectors - 1)
                }
                other => {
                    return Err(Error::ColumnType {
                        column: name.clone(),
                        expected: "Float64 or FloatVector".into(),
                        actual: other.name().into(),
                    })
                }
            });
        }
        let names: Vec<String> = self.params.strings("inputCols").to_vec();
        // First length seen per vector column, shared by every task.
        let lengths: Arc<Vec<OnceLock<usize>>> =
            Arc::new((0..vectors).map(|_| OnceLock::new()).collect());
        ds.with_column(
            self.params.str("outputCol"),
            DType::FloatVector,
            move |row| {
                let mut total = 0;
                for (k, part) in parts.iter().enumerate() {
                    total += match *part {
                        Part::Scalar(_) => 1,
                        Part::Vector(i, slot) => {
                            let len = row.get(i).as_vector().expect("typed column").len();
                            let first = *lengths[slot].get_or_init(|| len);
                            if first != len {
                                return Err(boxed(Error::RaggedVector {
                                    column: names[k].clone(),
                                    first,
                                    other: len,
                                }));
                            }
                            len
                        }
                    };
                }
                let mut out = Vec::with_capacity(total);
                for part in &parts {
                    match *part {
                        Part::Scalar(i) => {
                            out.push(row.get(i).as_f64().expect("typed column") as f32)
                        }
                        Part::Vector(i, _) => {
                            out.extend_from_slice(row.get(i).as_vector().expect("typed column"))
                        }
                    }
                }
                Ok(Value::vector(out))
            },
        )
    }
}
