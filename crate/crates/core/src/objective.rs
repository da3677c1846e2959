//! The minimization objective: a Monte-Carlo reconstruction term plus
//! closed-form KL-with-entropy terms for the latent label and the quality
//! variable. All losses are summed over the batch.
//!
//! Constants are anchored so that `bernoulli_kl_mi` is 0 at `q = P, λ = 0`
//! and `gaussian_kl_mi` is 0 at `μ = 0, σ² = 1, λ = 0`. Neither constant
//! carries gradient.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::ForwardRecord;
use crate::numkit::Matrix;
use crate::samplers::{clamp_prob, clamp_prob_grad};

/// Default weight of the mutual-information regularizer.
pub const DEFAULT_LAMBDA: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub recon: f64,
    pub kl_z: f64,
    pub kl_s: f64,
    pub total: f64,
    pub aux_ce: f64,
    pub batch: usize,
}

impl LossBreakdown {
    /// Per-item averages.
    pub fn per_item(&self) -> LossBreakdown {
        let n = self.batch.max(1) as f64;
        LossBreakdown {
            recon: self.recon / n,
            kl_z: self.kl_z / n,
            kl_s: self.kl_s / n,
            total: self.total / n,
            aux_ce: self.aux_ce / n,
            batch: self.batch,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.recon, self.kl_z, self.kl_s, self.total, self.aux_ce]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// One row of the per-step loss log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: u64,
    pub recon: f64,
    pub kl_z: f64,
    pub kl_s: f64,
    pub total: f64,
    pub aux_ce: f64,
    pub tau: f64,
    pub rho: f64,
    pub lr: f64,
}

/// Writes `log` as CSV with columns `step,recon,kl_z,kl_s,total,aux_ce,tau,rho,lr`.
pub fn write_loss_log(path: &Path, log: &[LossRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if log.is_empty() {
        w.write_record(["step", "recon", "kl_z", "kl_s", "total", "aux_ce", "tau", "rho", "lr"])?;
    }
    for r in log {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_loss_log(path: &Path) -> Result<Vec<LossRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn check_binary(op: &'static str, y: &Matrix) -> Result<()> {
    if let Some(v) = y.as_slice().iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid(format!("{op}: labels must be 0/1, found {v}")));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("λ must be finite and >= 0, got {lambda}")));
    }
    Ok(())
}

/// Per-item `Σ_k [y ln p + (1−y) ln(1−p)]` with `p` clamped.
pub fn bernoulli_loglik(p_y: &Matrix, y: &Matrix) -> Result<Vec<f64>> {
    y.expect_shape("bernoulli_loglik", p_y.shape())?;
    check_binary("bernoulli_loglik", y)?;
    Ok(p_y
        .row_iter()
        .zip(y.row_iter())
        .map(|(p, t)| {
            p.iter()
                .zip(t)
                .map(|(&p, &t)| {
                    let p = clamp_prob(p);
                    t * p.ln() + (1.0 - t) * (1.0 - p).ln()
                })
                .sum()
        })
        .collect())
}

/// `−Σ_m Σ_k [y ln p + (1−y) ln(1−p)]`.
pub fn aux_cross_entropy(p: &Matrix, y: &Matrix) -> Result<f64> {
    Ok(-bernoulli_loglik(p, y)?.iter().sum::<f64>())
}

/// Gradient of [`aux_cross_entropy`] (and of the reconstruction term) w.r.t. `p`.
pub fn cross_entropy_grad(p: &Matrix, y: &Matrix) -> Result<Matrix> {
    p.zip_map(y, |p, t| {
        let pc = clamp_prob(p);
        -clamp_prob_grad(p) * (t / pc - (1.0 - t) / (1.0 - pc))
    })
}

/// `Σ_m Σ_k Σ_{v∈{0,1}} q_v ln(q_v^{1−λ} / P_v)`: KL between the latent-label
/// posterior and the classifier, plus `λ` times the posterior entropy.
pub fn bernoulli_kl_mi(q_z: &Matrix, p_z: &Matrix, lambda: f64) -> Result<f64> {
    q_z.expect_shape("bernoulli_kl_mi", p_z.shape())?;
    check_lambda(lambda)?;
    let a = 1.0 - lambda;
    Ok(q_z
        .as_slice()
        .iter()
        .zip(p_z.as_slice())
        .map(|(&q, &p)| {
            let (q, p) = (clamp_prob(q), clamp_prob(p));
            let (q0, p0) = (1.0 - q, 1.0 - p);
            q * (a * q.ln() - p.ln()) + q0 * (a * q0.ln() - p0.ln())
        })
        .sum())
}

/// `∂ bernoulli_kl_mi / ∂q = ln[q^{1−λ}(1−P) / ((1−q)^{1−λ} P)]`.
pub fn bernoulli_kl_mi_grad_q(q_z: &Matrix, p_z: &Matrix, lambda: f64) -> Result<Matrix> {
    let a = 1.0 - lambda;
    q_z.zip_map(p_z, |q_raw, p| {
        let (q, p) = (clamp_prob(q_raw), clamp_prob(p));
        clamp_prob_grad(q_raw) * (a * (q.ln() - (1.0 - q).ln()) - p.ln() + (1.0 - p).ln())
    })
}

/// `∂ bernoulli_kl_mi / ∂P = (P − q) / (P(1 − P))`, `q` held fixed.
pub fn bernoulli_kl_mi_grad_p(q_z: &Matrix, p_z: &Matrix) -> Result<Matrix> {
    q_z.zip_map(p_z, |q, p_raw| {
        let (q, p) = (clamp_prob(q), clamp_prob(p_raw));
        clamp_prob_grad(p_raw) * (p - q) / (p * (1.0 - p))
    })
}

/// `Σ_m ½ Σ_d (σ² + μ² − 1 − (1−λ) ln σ²)` against a standard-normal prior.
///
/// At `λ = 0` this is exactly `KL(N(μ, σ²) ‖ N(0, I))`; for `λ > 0` it equals
/// `KL − λ·E_q[ln q]` minus the constant `λ·D·(1 + ln 2π)/2` per item.
pub fn gaussian_kl_mi(mu: &Matrix, logvar: &Matrix, lambda: f64) -> Result<f64> {
    logvar.expect_shape("gaussian_kl_mi", mu.shape())?;
    check_lambda(lambda)?;
    let a = 1.0 - lambda;
    Ok(mu
        .as_slice()
        .iter()
        .zip(logvar.as_slice())
        .map(|(&m, &lv)| 0.5 * (lv.exp() + m * m - 1.0 - a * lv))
        .sum())
}

/// Gradients of [`gaussian_kl_mi`] w.r.t. `(μ, logσ²)`.
pub fn gaussian_kl_mi_grads(mu: &Matrix, logvar: &Matrix, lambda: f64) -> (Matrix, Matrix) {
    let a = 1.0 - lambda;
    (mu.clone(), logvar.map(|lv| 0.5 * (lv.exp() - a)))
}

/// Full objective for one stochastic pass; `aux_ce` scores the classifier
/// against the noisy labels and is not part of `total`.
pub fn total_loss(record: &ForwardRecord, y: &Matrix, lambda: f64) -> Result<LossBreakdown> {
    let recon = -bernoulli_loglik(&record.p_y, y)?.iter().sum::<f64>();
    let kl_z = bernoulli_kl_mi(&record.q_z, &record.p_z, lambda)?;
    let kl_s = gaussian_kl_mi(&record.mu, &record.logvar, lambda)?;
    let aux_ce = aux_cross_entropy(&record.p_z, y)?;
    Ok(LossBreakdown {
        recon,
        kl_z,
        kl_s,
        total: recon + kl_z + kl_s,
        aux_ce,
        batch: y.rows(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn loss_log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("loss.csv");
        let rec = LossRecord {
            step: 3,
            recon: 1.5,
            kl_z: 0.25,
            kl_s: 0.1,
            total: 1.85,
            aux_ce: 2.0,
            tau: 0.9,
            rho: 0.8,
            lr: 0.01,
        };
        write_loss_log(&p, &[rec]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("step,recon,kl_z,kl_s,total,aux_ce,tau,rho,lr\n"));
        assert_eq!(read_loss_log(&p).unwrap(), vec![rec]);
    }

    #[test]
    fn loglik_at_half() {
        let ll = bernoulli_loglik(&m(&[&[0.5, 0.5]]), &m(&[&[1.0, 0.0]])).unwrap();
        assert!((ll[0] - 2.0 * 0.5f64.ln()).abs() < 1e-12);
        assert!((ll[0] + 1.3863).abs() < 1e-4);
    }

    #[test]
    fn loglik_perfect_reconstruction() {
        let y = m(&[&[1.0, 0.0, 1.0]]);
        let ll = bernoulli_loglik(&y, &y).unwrap();
        assert!(ll[0].abs() < 1e-6);
    }

    #[test]
    fn loglik_rejects_non_binary() {
        assert!(bernoulli_loglik(&m(&[&[0.5]]), &m(&[&[0.3]])).is_err());
    }

    #[test]
    fn bernoulli_kl_cases() {
        let half = m(&[&[0.5]]);
        assert_eq!(bernoulli_kl_mi(&half, &half, 0.0).unwrap(), 0.0);
        let v = bernoulli_kl_mi(&m(&[&[0.9]]), &half, 0.0).unwrap();
        assert!((v - 0.36807).abs() < 1e-5, "{v}");
        let ce = bernoulli_kl_mi(&half, &half, 1.0).unwrap();
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-12, "{ce}");
    }

    #[test]
    fn gaussian_kl_cases() {
        for lambda in [0.0, 0.3, 2.0] {
            assert_eq!(gaussian_kl_mi(&m(&[&[0.0]]), &m(&[&[0.0]]), lambda).unwrap(), 0.0);
        }
        let v = gaussian_kl_mi(&m(&[&[1.0]]), &m(&[&[2.0f64.ln()]]), 0.0).unwrap();
        assert!((v - 0.65343).abs() < 1e-5, "{v}");
    }

    #[test]
    fn aux_ce_cases() {
        let y = m(&[&[1.0, 0.0]]);
        assert!(aux_cross_entropy(&y, &y).unwrap().abs() < 1e-6);
        let v = aux_cross_entropy(&m(&[&[0.5, 0.5]]), &y).unwrap();
        assert!((v - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn negative_lambda_rejected() {
        let half = m(&[&[0.5]]);
        assert!(bernoulli_kl_mi(&half, &half, -0.1).is_err());
        assert!(gaussian_kl_mi(&half, &half, -0.1).is_err());
    }

    #[test]
    fn closed_form_gradients_match_differences() {
        let h = 1e-6;
        let q = m(&[&[0.3, 0.8]]);
        let p = m(&[&[0.6, 0.45]]);
        let lambda = 0.3;
        let gq = bernoulli_kl_mi_grad_q(&q, &p, lambda).unwrap();
        let gp = bernoulli_kl_mi_grad_p(&q, &p).unwrap();
        for i in 0..2 {
            let bump = |base: &Matrix, d: f64| {
                let mut b = base.clone();
                b.as_mut_slice()[i] += d;
                b
            };
            let fq = (bernoulli_kl_mi(&bump(&q, h), &p, lambda).unwrap()
                - bernoulli_kl_mi(&bump(&q, -h), &p, lambda).unwrap())
                / (2.0 * h);
            let fp = (bernoulli_kl_mi(&q, &bump(&p, h), lambda).unwrap()
                - bernoulli_kl_mi(&q, &bump(&p, -h), lambda).unwrap())
                / (2.0 * h);
            assert!((fq - gq.as_slice()[i]).abs() < 1e-7);
            assert!((fp - gp.as_slice()[i]).abs() < 1e-7);
        }

        let mu = m(&[&[0.4, -1.1]]);
        let lv = m(&[&[-0.3, 0.9]]);
        let (gm, gl) = gaussian_kl_mi_grads(&mu, &lv, lambda);
        for i in 0..2 {
            let mut a = lv.clone();
            let mut b = lv.clone();
            a.as_mut_slice()[i] += h;
            b.as_mut_slice()[i] -= h;
            let fd = (gaussian_kl_mi(&mu, &a, lambda).unwrap() - gaussian_kl_mi(&mu, &b, lambda).unwrap()) / (2.0 * h);
            assert!((fd - gl.as_slice()[i]).abs() < 1e-7);
            assert_eq!(gm.as_slice()[i], mu.as_slice()[i]);
        }
    }
}
