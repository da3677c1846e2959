use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::kmeans::kmeans_binarize;
use crate::data::{argmax, Dataset};
use crate::error::{Error, Result};
use crate::network::{Encoding, ModelParams};
use crate::numkit::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trust {
    #[serde(rename = "T")]
    Trustworthy,
    #[serde(rename = "N")]
    NonTrustworthy,
}

impl Trust {
    pub fn from_cluster(c: usize) -> Self {
        if c == 0 {
            Trust::Trustworthy
        } else {
            Trust::NonTrustworthy
        }
    }
}

/// Latent-to-noisy label transitions, split by quality cluster. Matrices are
/// indexed `[latent][noisy]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub trustworthy: Vec<Vec<u64>>,
    pub non_trustworthy: Vec<Vec<u64>>,
    pub cluster_assignment: Vec<Trust>,
}

impl TransitionReport {
    pub fn total(&self) -> u64 {
        self.trustworthy.iter().chain(&self.non_trustworthy).flatten().sum()
    }

    /// Fraction of a matrix's mass on the diagonal; `None` if it is empty.
    pub fn diagonal_mass(m: &[Vec<u64>]) -> Option<f64> {
        let total: u64 = m.iter().flatten().sum();
        let diag: u64 = (0..m.len()).map(|i| m[i][i]).sum();
        (total > 0).then(|| diag as f64 / total as f64)
    }
}

pub fn transition_counts(
    latent: &[usize],
    noisy: &[usize],
    trust: &[Trust],
    classes: usize,
) -> Result<TransitionReport> {
    if latent.len() != noisy.len() || latent.len() != trust.len() {
        return Err(Error::shape(
            "transition_counts",
            format!("{} latent labels", latent.len()),
            format!("{} noisy, {} clusters", noisy.len(), trust.len()),
        ));
    }
    if let Some(&c) = latent.iter().chain(noisy).find(|&&c| c >= classes) {
        return Err(Error::invalid(format!("class index {c} out of range for K={classes}")));
    }
    let mut report = TransitionReport {
        trustworthy: vec![vec![0; classes]; classes],
        non_trustworthy: vec![vec![0; classes]; classes],
        cluster_assignment: trust.to_vec(),
    };
    for ((&l, &n), &t) in latent.iter().zip(noisy).zip(trust) {
        let m = match t {
            Trust::Trustworthy => &mut report.trustworthy,
            Trust::NonTrustworthy => &mut report.non_trustworthy,
        };
        m[l][n] += 1;
    }
    Ok(report)
}

/// Per-row disagreement bit: 1 when `ŷ` thresholded at 0.5 differs from `y`
/// in any class.
pub fn disagreement(y_hat: &Matrix, y: &Matrix) -> Result<Vec<f64>> {
    y.expect_shape("disagreement", y_hat.shape())?;
    Ok(y_hat
        .row_iter()
        .zip(y.row_iter())
        .map(|(p, t)| {
            let differs = p.iter().zip(t).any(|(&p, &t)| (p >= 0.5) != (t == 1.0));
            f64::from(u8::from(differs))
        })
        .collect())
}

/// Everything the diagnostics are computed from.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub encoding: Encoding,
    pub disagreement: Vec<f64>,
    pub report: TransitionReport,
}

/// Encodes `ds` with its noisy labels, clusters `μ` into trustworthy and
/// non-trustworthy sides and counts argmax transitions in each.
pub fn diagnose(params: &ModelParams, ds: &Dataset, seed: u64) -> Result<Diagnostics> {
    let encoding = params.encode(&ds.features, &ds.noisy_labels)?;
    let dis = disagreement(&encoding.y_hat, &ds.noisy_labels)?;
    let clusters = kmeans_binarize(&encoding.mu, Some(&dis), seed)?;
    let trust: Vec<Trust> = clusters.assignment.iter().map(|&c| Trust::from_cluster(c)).collect();
    let latent: Vec<usize> = encoding.q_z.row_iter().map(argmax).collect();
    let noisy: Vec<usize> = ds.noisy_labels.row_iter().map(argmax).collect();
    let report = transition_counts(&latent, &noisy, &trust, ds.classes())?;
    Ok(Diagnostics {
        encoding,
        disagreement: dis,
        report,
    })
}

pub fn transition_report(params: &ModelParams, ds: &Dataset, seed: u64) -> Result<TransitionReport> {
    Ok(diagnose(params, ds, seed)?.report)
}

fn write_matrix(path: &Path, m: &[Vec<u64>]) -> Result<()> {
    let k = m.len();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["latent".to_string()];
    header.extend((0..k).map(|c| format!("c{c}")));
    w.write_record(&header)?;
    for (i, row) in m.iter().enumerate() {
        let mut rec = vec![format!("c{i}")];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}{i}"))
}

/// Writes `embeddings.csv` (μ, cluster, disagreement), `posteriors.csv`
/// (y, ŷ, q_z) and the two transition matrices into `out_dir`.
pub fn export_diagnostics(params: &ModelParams, ds: &Dataset, out_dir: &Path, seed: u64) -> Result<TransitionReport> {
    let d = diagnose(params, ds, seed)?;
    fs::create_dir_all(out_dir)?;
    let k = ds.classes();
    let dim = d.encoding.mu.cols();

    let mut w = csv::Writer::from_path(out_dir.join("embeddings.csv"))?;
    let mut header: Vec<String> = numbered("mu", dim).collect();
    header.extend(["cluster".to_string(), "disagree".to_string()]);
    w.write_record(&header)?;
    for (i, mu) in d.encoding.mu.row_iter().enumerate() {
        let mut rec: Vec<String> = mu.iter().map(f64::to_string).collect();
        let cluster = match d.report.cluster_assignment[i] {
            Trust::Trustworthy => "T",
            Trust::NonTrustworthy => "N",
        };
        rec.push(cluster.to_string());
        rec.push((d.disagreement[i] as u8).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out_dir.join("posteriors.csv"))?;
    let header: Vec<String> = numbered("y", k)
        .chain(numbered("yhat", k))
        .chain(numbered("q", k))
        .collect();
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let rec: Vec<String> = ds
            .noisy_labels
            .row(i)
            .iter()
            .chain(d.encoding.y_hat.row(i))
            .chain(d.encoding.q_z.row(i))
            .map(f64::to_string)
            .collect();
        w.write_record(&rec)?;
    }
    w.flush()?;

    write_matrix(&out_dir.join("transition_trustworthy.csv"), &d.report.trustworthy)?;
    write_matrix(
        &out_dir.join("transition_non_trustworthy.csv"),
        &d.report.non_trustworthy,
    )?;
    Ok(d.report)
}
