//! Binary logistic regression trained by full-batch gradient descent.
//!
//! The objective is the mean log-loss plus `(l2 / 2) * |w|^2`. Per-partition
//! gradient sums are computed on the engine's workers and added up in
//! partition order, so the fitted model depends only on the data, its
//! partitioning and the parameters.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tundra_core::pipeline::{
    Estimator, ParamKind, ParamMap, ParamSpec, ParamValue, Stage, StageDescriptor, StageFactory,
    StageKind, Transformer,
};
use tundra_core::{DType, Dataset, Error, Value};

use crate::{boxed, invalid, stage_basics};

pub const MODEL_MAGIC: &[u8; 4] = b"LRM1";

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Reads a 0/1 label from an Int64, Float64 or Bool cell.
pub fn label_value(v: &Value) -> Result<f64, Error> {
    let x = match v {
        Value::Bool(b) => return Ok(if *b { 1.0 } else { 0.0 }),
        Value::Int64(i) => *i as f64,
        Value::Float64(f) => *f,
        other => {
            return Err(Error::ColumnType {
                column: "label".into(),
                expected: "Int64, Float64 or Bool".into(),
                actual: other.kind_name().into(),
            })
        }
    };
    if x == 0.0 || x == 1.0 {
        Ok(x)
    } else {
        Err(Error::NonBinaryLabel(x))
    }
}

/// Row-major features (kept in f32, as they arrive), labels and row
/// weights. All arithmetic on them is in f64.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub dim: usize,
    pub x: Vec<f32>,
    pub y: Vec<f64>,
    pub weight: Vec<f64>,
}

impl Batch {
    pub fn new(dim: usize) -> Batch {
        Batch {
            dim,
            ..Batch::default()
        }
    }

    pub fn push(&mut self, x: &[f32], y: f64, weight: f64) {
        assert_eq!(x.len(), self.dim);
        self.x.extend_from_slice(x);
        self.y.push(y);
        self.weight.push(weight);
    }

    pub fn total_weight(&self) -> f64 {
        self.weight.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn margin(&self, i: usize, w: &[f64], b: f64) -> f64 {
        let row = &self.x[i * self.dim..(i + 1) * self.dim];
        // Eight independent accumulators so the loop vectorizes.
        let mut lanes = [0.0f64; 8];
        let (xs, xt) = row.split_at(row.len() / 8 * 8);
        let (ws, wt) = w.split_at(xs.len());
        for (xc, wc) in xs.chunks_exact(8).zip(ws.chunks_exact(8)) {
            for k in 0..8 {
                lanes[k] += xc[k] as f64 * wc[k];
            }
        }
        let tail: f64 = xt.iter().zip(wt).map(|(&x, w)| x as f64 * w).sum();
        b + lanes.iter().sum::<f64>() + tail
    }

    /// Summed (unnormalized) log-loss gradient, rows in order.
    pub fn gradient_sum(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let mut gw = vec![0.0; self.dim];
        let mut gb = 0.0;
        for i in 0..self.len() {
            let r = (sigmoid(self.margin(i, w, b)) - self.y[i]) * self.weight[i];
            let row = &self.x[i * self.dim..(i + 1) * self.dim];
            for (g, &x) in gw.iter_mut().zip(row) {
                *g += r * x as f64;
            }
            gb += r;
        }
        (gw, gb)
    }

    /// Summed (unnormalized) log-loss.
    pub fn loss_sum(&self, w: &[f64], b: f64) -> f64 {
        (0..self.len())
            .map(|i| {
                let z = self.margin(i, w, b);
                (softplus(z) - self.y[i] * z) * self.weight[i]
            })
            .sum()
    }
}

/// The regularized objective over a single batch: weighted mean log-loss
/// plus the L2 penalty.
pub fn loss(batch: &Batch, w: &[f64], b: f64, l2: f64) -> f64 {
    let n = batch.total_weight();
    batch.loss_sum(w, b) / n + 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>()
}

/// Analytic gradient of [`loss`].
pub fn gradient(batch: &Batch, w: &[f64], b: f64, l2: f64) -> (Vec<f64>, f64) {
    let n = batch.total_weight();
    let (mut gw, gb) = batch.gradient_sum(w, b);
    for (g, w) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 * w;
    }
    (gw, gb / n)
}

pub struct LogisticRegression {
    params: ParamMap,
}

impl LogisticRegression {
    pub fn descriptor() -> StageDescriptor {
        StageDescriptor::new(
            "LogisticRegression",
            StageKind::Estimator,
            "Binary logistic regression fit by full-batch gradient descent.",
            vec![
                ParamSpec::new("featuresCol", ParamKind::Column, "FloatVector feature column.")
                    .with_default(ParamValue::Column("features".into())),
                ParamSpec::new("labelCol", ParamKind::Column, "0/1 label column.")
                    .with_default(ParamValue::Column("label".into())),
                ParamSpec::new("scoreCol", ParamKind::Column, "Probability column the model appends.")
                    .with_default(ParamValue::Column("score".into())),
                ParamSpec::new(
                    "weightCol",
                    ParamKind::String,
                    "Optional Float64 column of nonnegative row weights; empty means every row weighs 1.",
                )
                .with_default(ParamValue::String(String::new())),
                ParamSpec::new("learningRate", ParamKind::Float, "Step size, positive.")
                    .with_default(ParamValue::Float(0.1)),
                ParamSpec::new("epochs", ParamKind::Int, "Full passes over the data, at least 1.")
                    .with_default(ParamValue::Int(100)),
                ParamSpec::new("l2", ParamKind::Float, "L2 penalty on the weights.")
                    .with_default(ParamValue::Float(1e-4)),
                ParamSpec::new("seed", ParamKind::Int, "Seed for the initial weights.")
                    .with_default(ParamValue::Int(42)),
                ParamSpec::new(
                    "standardize",
                    ParamKind::Bool,
                    "Train on z-scored features; the model is stored in raw feature units.",
                )
                .with_default(ParamValue::Bool(true)),
            ],
        )
    }

    pub fn new(params: ParamMap) -> Result<LogisticRegression, Error> {
        if params.float("learningRate") <= 0.0 {
            return Err(invalid("learningRate", "must be positive"));
        }
        if params.int("epochs") < 1 {
            return Err(invalid("epochs", "must be at least 1"));
        }
        if params.float("l2") < 0.0 {
            return Err(invalid("l2", "must not be negative"));
        }
        Ok(LogisticRegression { params })
    }

    pub fn factory() -> StageFactory {
        StageFactory {
            descriptor: LogisticRegression::descriptor(),
            build: |p| Ok(Stage::Estimator(Arc::new(LogisticRegression::new(p)?))),
            restore: None,
        }
    }

    /// Fits and returns the concrete model.
    pub fn fit_model(&self, ds: &Dataset) -> Result<LogisticRegressionModel, Error> {
        let features = self.params.str("featuresCol");
        let label = self.params.str("labelCol");
        let weight = Some(self.params.str("weightCol")).filter(|w| !w.is_empty());
        let parts = collect_batches(ds, features, label, weight)?;
        let dim = parts.iter().find(|p| !p.is_empty()).map(|p| p.dim);
        let Some(dim) = dim else {
            return Err(Error::Fit("no training rows".into()));
        };
        let total: f64 = parts.iter().map(Batch::total_weight).sum();
        if total <= 0.0 {
            return Err(Error::Fit("row weights sum to zero".into()));
        }
        let (mean, scale) = if self.params.bool("standardize") {
            moments(&parts, dim)
        } else {
            (vec![0.0; dim], vec![1.0; dim])
        };

        // Descent runs on z-scored features, (x - m) / s, without rewriting
        // the data: the standardized model (w, b) is evaluated as raw
        // weights w / s with bias b - sum(m w / s), and raw gradient sums
        // map back as g_j = (G_j - m_j G_b) / s_j.
        let raw = |w: &[f64], b: f64| -> (Vec<f64>, f64) {
            let mut bias = b;
            let weights = w
                .iter()
                .zip(&mean)
                .zip(&scale)
                .map(|((w, m), s)| {
                    let v = w / s;
                    bias -= v * m;
                    v
                })
                .collect();
            (weights, bias)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.params.int("seed") as u64);
        let mut w: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
        let mut b = 0.0;
        let rate = self.params.float("learningRate");
        let l2 = self.params.float("l2");
        let engine = ds.engine();
        for _ in 0..self.params.int("epochs") {
            let (rw, rb) = raw(&w, b);
            let partials = engine.map_indexed(parts.len(), |ctx| {
                Ok(parts[ctx.partition()].gradient_sum(&rw, rb))
            })?;
            let mut gw = vec![0.0; dim];
            let mut gb = 0.0;
            for (pw, pb) in partials {
                for (g, p) in gw.iter_mut().zip(&pw) {
                    *g += p;
                }
                gb += pb;
            }
            for j in 0..dim {
                let g = (gw[j] - mean[j] * gb) / scale[j];
                w[j] -= rate * (g / total + l2 * w[j]);
            }
            b -= rate * gb / total;
        }
        let (w, bias) = raw(&w, b);
        LogisticRegressionModel::from_parts(features, self.params.str("scoreCol"), w, bias)
    }
}

impl Estimator for LogisticRegression {
    stage_basics!("LogisticRegression");

    fn fit(&self, ds: &Dataset) -> Result<Arc<dyn Transformer>, Error> {
        Ok(Arc::new(self.fit_model(ds)?))
    }
}

fn collect_batches(
    ds: &Dataset,
    features: &str,
    label: &str,
    weight: Option<&str>,
) -> Result<Vec<Batch>, Error> {
    let schema = ds.schema();
    schema.require_typed(features, &DType::FloatVector)?;
    let li = schema.require(label)?;
    match schema.dtype(li) {
        DType::Int64 | DType::Float64 | DType::Bool => {}
        other => {
            return Err(Error::ColumnType {
                column: label.into(),
                expected: "Int64, Float64 or Bool".into(),
                actual: other.name().into(),
            })
        }
    }
    let mut cols = vec![features, label];
    if let Some(w) = weight {
        schema.require_typed(w, &DType::Float64)?;
        cols.push(w);
    }
    let parts = ds.select(&cols)?.collect_partitions()?;
    let mut dim = None;
    let mut out = Vec::with_capacity(parts.len());
    for part in parts {
        let mut batch = Batch::new(dim.unwrap_or(0));
        for row in part {
            let x = row.get(0).as_vector().expect("typed column");
            let d = *dim.get_or_insert(x.len());
            if x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: x.len(),
                });
            }
            batch.dim = d;
            let w = match weight {
                Some(name) => {
                    let w = row.get(2).as_f64().expect("typed column");
                    if !(w >= 0.0 && w.is_finite()) {
                        return Err(Error::Invalid(format!(
                            "weight {w} in `{name}` is not a finite nonnegative number"
                        )));
                    }
                    w
                }
                None => 1.0,
            };
            batch.push(x, label_value(row.get(1))?, w);
        }
        out.push(batch);
    }
    let dim = dim.unwrap_or(0);
    for b in &mut out {
        b.dim = dim;
    }
    Ok(out)
}

/// Per-feature mean and standard deviation over all rows; constant
/// features get scale 1.
fn moments(parts: &[Batch], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n: usize = parts.iter().map(Batch::len).sum();
    let mut mean = vec![0.0; dim];
    for p in parts {
        for row in p.x.chunks(dim) {
            for (m, &x) in mean.iter_mut().zip(row) {
                *m += x as f64;
            }
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; dim];
    for p in parts {
        for row in p.x.chunks(dim) {
            for ((v, &x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x as f64 - m) * (x as f64 - m);
            }
        }
    }
    let scale = var
        .iter()
        .map(|v| {
            let s = (v / n as f64).sqrt();
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

/// A fitted logistic regression: appends `sigmoid(w.x + b)` as `scoreCol`.
pub struct LogisticRegressionModel {
    params: ParamMap,
    weights: Arc<[f64]>,
    bias: f64,
}

impl LogisticRegressionModel {
    pub fn descriptor() -> StageDescriptor {
        StageDescriptor::new(
            "LogisticRegressionModel",
            StageKind::Transformer,
            "A fitted logistic regression; restored from a stage file.",
            vec![
                ParamSpec::new(
                    "featuresCol",
                    ParamKind::Column,
                    "FloatVector feature column.",
                )
                .with_default(ParamValue::Column("features".into())),
                ParamSpec::new(
                    "scoreCol",
                    ParamKind::Column,
                    "Probability column to append.",
                )
                .with_default(ParamValue::Column("score".into())),
            ],
        )
    }

    pub fn from_parts(
        features_col: &str,
        score_col: &str,
        weights: Vec<f64>,
        bias: f64,
    ) -> Result<LogisticRegressionModel, Error> {
        let params = crate::param_map(
            &LogisticRegressionModel::descriptor(),
            &[
                ("featuresCol", ParamValue::Column(features_col.into())),
                ("scoreCol", ParamValue::Column(score_col.into())),
            ],
        )?;
        Ok(LogisticRegressionModel {
            params,
            weights: weights.into(),
            bias,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// `sigmoid(w.x + b)`, accumulated in f64 in feature order.
    pub fn score(&self, x: &[f32]) -> Result<f64, Error> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                actual: x.len(),
            });
        }
        let z = x
            .iter()
            .zip(self.weights.iter())
            .fold(self.bias, |acc, (&x, w)| acc + x as f64 * w);
        Ok(sigmoid(z))
    }

    pub fn encode_state(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + 8 * self.weights.len());
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&(self.weights.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.bias.to_le_bytes());
        for w in self.weights.iter() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn restore(params: ParamMap, state: &[u8]) -> Result<LogisticRegressionModel, Error> {
        let corrupt =
            |why: &str| Error::CorruptStageFile(format!("logistic regression state: {why}"));
        let rest = state
            .strip_prefix(MODEL_MAGIC)
            .ok_or_else(|| corrupt("bad magic"))?;
        if rest.len() < 16 {
            return Err(corrupt("truncated header"));
        }
        let word = |i: usize| <[u8; 8]>::try_from(&rest[i..i + 8]).expect("8 bytes");
        let dim = u64::from_le_bytes(word(0));
        let bias = f64::from_le_bytes(word(8));
        let body = &rest[16..];
        if Some(body.len() as u64) != dim.checked_mul(8) {
            return Err(corrupt("weight count does not match the payload"));
        }
        let weights: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(corrupt("non-finite coefficient"));
        }
        Ok(LogisticRegressionModel {
            params,
            weights: weights.into(),
            bias,
        })
    }

    pub fn factory() -> StageFactory {
        StageFactory {
            descriptor: LogisticRegressionModel::descriptor(),
            build: |_| {
                Err(Error::Model(
                    "LogisticRegressionModel is produced by fitting LogisticRegression".into(),
                ))
            },
            restore: Some(|p, state| Ok(Arc::new(LogisticRegressionModel::restore(p, state)?))),
        }
    }
}

impl Transformer for LogisticRegressionModel {
    stage_basics!("LogisticRegressionModel");

    fn transform(&self, ds: &Dataset) -> Result<Dataset, Error> {
        let fi = ds
            .schema()
            .require_typed(self.params.str("featuresCol"), &DType::FloatVector)?;
        let model = LogisticRegressionModel {
            params: self.params.clone(),
            weights: self.weights.clone(),
            bias: self.bias,
        };
        ds.with_column(self.params.str("scoreCol"), DType::Float64, move |row| {
            let x = row.get(fi).as_vector().expect("typed column");
            Ok(Value::Float64(model.score(x).map_err(boxed)?))
        })
    }

    fn state(&self) -> Option<Vec<u8>> {
        Some(self.encode_state())
    }
}
