//! ROC curves, AUC and confusion matrices for binary scores.
//!
//! A score at or above the threshold predicts the positive class.

use serde_json::{json, Value as Json};
use tundra_core::{Dataset, Error};

use crate::lr::label_value;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Scores at or above this value are predicted positive. The first point
    /// of every curve has threshold `+inf`.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

fn check_scores(scores: &[f64], labels: &[bool]) -> Result<(), Error> {
    if scores.len() != labels.len() {
        return Err(Error::Invalid(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Invalid(format!("score {s} is not finite")));
    }
    Ok(())
}

/// Sweeps every distinct score as a threshold, high to low. Equal scores move
/// the curve in one step, so ties contribute a diagonal segment.
pub fn roc(scores: &[f64], labels: &[bool]) -> Result<RocCurve, Error> {
    check_scores(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum::<f64>()
        .clamp(0.0, 1.0);
    Ok(RocCurve { points, auc })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    /// Rows are the actual class (negative, positive), columns the predicted
    /// class; each row sums to 1 unless that class is absent.
    pub normalized: [[f64; 2]; 2],
    /// Set when a class has no rows; its normalized row is all zeros.
    pub degenerate: bool,
}

pub fn confusion(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
) -> Result<ConfusionMatrix, Error> {
    check_scores(scores, labels)?;
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let row = |a: usize, b: usize| {
        let n = a + b;
        if n == 0 {
            [0.0, 0.0]
        } else {
            [a as f64 / n as f64, b as f64 / n as f64]
        }
    };
    Ok(ConfusionMatrix {
        tp,
        fp,
        fn_,
        tn,
        normalized: [row(tn, fp), row(fn_, tp)],
        degenerate: tp + fn_ == 0 || tn + fp == 0,
    })
}

/// Collects `(score, label)` pairs in dataset order.
pub fn scores_and_labels(
    ds: &Dataset,
    score_col: &str,
    label_col: &str,
) -> Result<(Vec<f64>, Vec<bool>), Error> {
    let si = ds
        .schema()
        .require_typed(score_col, &tundra_core::DType::Float64)?;
    let li = ds.schema().require(label_col)?;
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for row in ds.collect()? {
        scores.push(row.get(si).as_f64().expect("typed column"));
        labels.push(label_value(row.get(li))? == 1.0);
    }
    Ok((scores, labels))
}

pub fn compute_roc(ds: &Dataset, score_col: &str, label_col: &str) -> Result<RocCurve, Error> {
    let (s, l) = scores_and_labels(ds, score_col, label_col)?;
    roc(&s, &l)
}

pub fn confusion_matrix(
    ds: &Dataset,
    score_col: &str,
    label_col: &str,
    threshold: f64,
) -> Result<ConfusionMatrix, Error> {
    let (s, l) = scores_and_labels(ds, score_col, label_col)?;
    confusion(&s, &l, threshold)
}

fn finite_or_null(x: f64) -> Json {
    if x.is_finite() {
        json!(x)
    } else {
        Json::Null
    }
}

/// The metrics document: `{auc, rocPoints, confusion, normalized}`.
pub fn metrics_json(curve: &RocCurve, cm: &ConfusionMatrix) -> Json {
    json!({
        "auc": curve.auc,
        "rocPoints": curve.points.iter().map(|p| json!({
            "threshold": finite_or_null(p.threshold),
            "fpr": p.fpr,
            "tpr": p.tpr,
        })).collect::<Vec<_>>(),
        "confusion": {"tp": cm.tp, "fp": cm.fp, "fn": cm.fn_, "tn": cm.tn},
        "normalized": cm.normalized,
        "degenerate": cm.degenerate,
    })
}

/// The curve as CSV `threshold,fpr,tpr`.
pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in &curve.points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
    }
    out
}
