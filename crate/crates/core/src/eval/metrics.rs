use serde::{Deserialize, Serialize};

use crate::data::{argmax, Dataset};
use crate::error::{Error, Result};
use crate::network::ClassifierNet;
use crate::numkit::Matrix;

/// Mean over relevant items of precision at their rank, after a descending
/// sort by score with ties broken by original index.
pub fn average_precision(scores: &[f64], relevant: &[bool]) -> Result<f64> {
    if scores.len() != relevant.len() {
        return Err(Error::shape("average_precision", scores.len(), relevant.len()));
    }
    let total = relevant.iter().filter(|&&r| r).count();
    if total == 0 {
        return Err(Error::invalid("average_precision needs at least one relevant item"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if relevant[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `None` for classes without a positive example.
    pub per_class_ap: Vec<Option<f64>>,
    pub map: f64,
    pub accuracy: f64,
}

/// Scores `scores` (M×K) against binary `labels`: AP per class, their mean,
/// and the fraction of rows whose top score hits the first positive label.
pub fn evaluate_scores(scores: &Matrix, labels: &Matrix) -> Result<EvalReport> {
    labels.expect_shape("evaluate", scores.shape())?;
    if scores.rows() == 0 {
        return Err(Error::invalid("cannot evaluate an empty dataset"));
    }
    let k = scores.cols();
    let mut per_class_ap = Vec::with_capacity(k);
    for c in 0..k {
        let s: Vec<f64> = scores.row_iter().map(|r| r[c]).collect();
        let rel: Vec<bool> = labels.row_iter().map(|r| r[c] == 1.0).collect();
        per_class_ap.push(if rel.contains(&true) {
            Some(average_precision(&s, &rel)?)
        } else {
            None
        });
    }
    let aps: Vec<f64> = per_class_ap.iter().flatten().copied().collect();
    let map = aps.iter().sum::<f64>() / aps.len() as f64;
    let hits = scores
        .row_iter()
        .zip(labels.row_iter())
        .filter(|(s, l)| l[argmax(s)] == 1.0)
        .count();
    Ok(EvalReport {
        per_class_ap,
        map,
        accuracy: hits as f64 / scores.rows() as f64,
    })
}

/// Evaluates `P(z|x)` from `model` against the clean labels of `ds`.
pub fn evaluate(model: &ClassifierNet, ds: &Dataset) -> Result<EvalReport> {
    let clean = ds
        .clean_labels
        .as_ref()
        .ok_or_else(|| Error::invalid("evaluation needs clean labels"))?;
    evaluate_scores(&model.apply(&ds.features)?, clean)
}
