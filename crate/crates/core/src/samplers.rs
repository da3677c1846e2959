//! Reparameterized draws for the binary latent label (Gumbel-softmax) and the
//! Gaussian quality variable, plus the decay schedules for temperature and
//! annealing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{sigmoid, Matrix, RandomSource};

/// Probabilities are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Derivative of [`clamp_prob`]: 1 inside the clamp band, 0 outside.
#[inline]
pub(crate) fn clamp_prob_grad(p: f64) -> f64 {
    if (PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
        1.0
    } else {
        0.0
    }
}

/// Standard-Gumbel noise for the "off" (`g0`) and "on" (`g1`) state of every
/// class, batch×K each.
#[derive(Debug, Clone, PartialEq)]
pub struct GumbelPair {
    pub g0: Matrix,
    pub g1: Matrix,
}

impl GumbelPair {
    pub fn draw(rng: &mut RandomSource, batch: usize, classes: usize) -> Self {
        let g0 = Matrix::from_fn(batch, classes, |_, _| rng.gumbel());
        let g1 = Matrix::from_fn(batch, classes, |_, _| rng.gumbel());
        GumbelPair { g0, g1 }
    }

    /// Noise for which the relaxed sample equals the probability at `τ = 1`.
    pub fn zeros(batch: usize, classes: usize) -> Self {
        GumbelPair {
            g0: Matrix::zeros(batch, classes),
            g1: Matrix::zeros(batch, classes),
        }
    }
}

/// Standard-normal noise for the quality variable, batch×D.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussNoise {
    pub zeta: Matrix,
}

impl GaussNoise {
    pub fn draw(rng: &mut RandomSource, batch: usize, dim: usize) -> Self {
        GaussNoise {
            zeta: Matrix::from_fn(batch, dim, |_, _| rng.gaussian()),
        }
    }

    pub fn zeros(batch: usize, dim: usize) -> Self {
        GaussNoise {
            zeta: Matrix::zeros(batch, dim),
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("temperature must be > 0, got {tau}")));
    }
    Ok(())
}

/// Binary Gumbel-softmax relaxation of a Bernoulli(`q1`) draw.
///
/// Equivalent to `exp((ln q1 + γ1)/τ) / Σ_v exp((ln q_v + γ_v)/τ)`, evaluated
/// as a logistic of the log-odds difference so it cannot overflow.
pub fn gumbel_softmax_binary(q1: f64, g0: f64, g1: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(relaxed_bit(q1, g0, g1, tau))
}

#[inline]
fn relaxed_bit(q1: f64, g0: f64, g1: f64, tau: f64) -> f64 {
    let q = clamp_prob(q1);
    let on = q.ln() + g1;
    let off = (1.0 - q).ln() + g0;
    sigmoid((on - off) / tau)
}

/// Derivative of the relaxed bit w.r.t. `q1` for fixed noise.
#[inline]
pub fn gumbel_softmax_binary_grad(q1: f64, g0: f64, g1: f64, tau: f64) -> f64 {
    let z = relaxed_bit(q1, g0, g1, tau);
    let q = clamp_prob(q1);
    clamp_prob_grad(q1) * z * (1.0 - z) / tau * (1.0 / q + 1.0 / (1.0 - q))
}

/// Batched relaxed sample: `z[b,k]` from `q[b,k]` and the matching noise.
pub fn relaxed_bernoulli(q: &Matrix, noise: &GumbelPair, tau: f64) -> Result<Matrix> {
    check_tau(tau)?;
    noise.g0.expect_shape("relaxed_bernoulli", q.shape())?;
    noise.g1.expect_shape("relaxed_bernoulli", q.shape())?;
    let mut z = Matrix::zeros(q.rows(), q.cols());
    for (i, out) in z.as_mut_slice().iter_mut().enumerate() {
        *out = relaxed_bit(q.as_slice()[i], noise.g0.as_slice()[i], noise.g1.as_slice()[i], tau);
    }
    Ok(z)
}

/// `s = μ + exp(½·logσ²) ⊙ ζ`, i.e. standard-deviation scaling of the noise.
pub fn gaussian_reparam(mu: &[f64], logvar: &[f64], zeta: &[f64]) -> Result<Vec<f64>> {
    if mu.len() != logvar.len() || mu.len() != zeta.len() {
        return Err(Error::shape(
            "gaussian_reparam",
            format!("three vectors of length {}", mu.len()),
            format!("{}/{}/{}", mu.len(), logvar.len(), zeta.len()),
        ));
    }
    Ok(mu
        .iter()
        .zip(logvar)
        .zip(zeta)
        .map(|((m, lv), z)| m + (0.5 * lv).exp() * z)
        .collect())
}

/// Batched [`gaussian_reparam`].
pub fn gaussian_reparam_batch(mu: &Matrix, logvar: &Matrix, noise: &GaussNoise) -> Result<Matrix> {
    logvar.expect_shape("gaussian_reparam", mu.shape())?;
    noise.zeta.expect_shape("gaussian_reparam", mu.shape())?;
    let mut s = Matrix::zeros(mu.rows(), mu.cols());
    for r in 0..mu.rows() {
        let row = gaussian_reparam(mu.row(r), logvar.row(r), noise.zeta.row(r))?;
        s.row_mut(r).copy_from_slice(&row);
    }
    Ok(s)
}

/// `max(floor, exp(-scale · step))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecaySchedule {
    pub scale: f64,
    pub floor: f64,
}

impl Default for DecaySchedule {
    fn default() -> Self {
        DecaySchedule {
            scale: 3e-5,
            floor: 0.5,
        }
    }
}

impl DecaySchedule {
    pub fn new(scale: f64, floor: f64) -> Result<Self> {
        let s = DecaySchedule { scale, floor };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::invalid(format!(
                "schedule scale must be > 0, got {}",
                self.scale
            )));
        }
        if !(0.0..=1.0).contains(&self.floor) {
            return Err(Error::invalid(format!(
                "schedule floor must be in [0, 1], got {}",
                self.floor
            )));
        }
        Ok(())
    }

    pub fn value(&self, step: u64) -> f64 {
        self.floor.max((-self.scale * step as f64).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_noise_at_half() {
        for tau in [0.1, 1.0, 7.0] {
            let z = gumbel_softmax_binary(0.5, 0.3, 0.3, tau).unwrap();
            assert!((z - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn equal_noise_unit_temperature_returns_probability() {
        let z = gumbel_softmax_binary(0.8, -1.2, -1.2, 1.0).unwrap();
        assert!((z - 0.8).abs() < 1e-12, "{z}");
    }

    #[test]
    fn non_positive_temperature_rejected() {
        assert!(gumbel_softmax_binary(0.5, 0.0, 0.0, 0.0).is_err());
        assert!(gumbel_softmax_binary(0.5, 0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn low_temperature_is_nearly_binary() {
        let mut rng = RandomSource::new(2);
        for _ in 0..1000 {
            let (q, g0, g1) = (rng.uniform01(), rng.gumbel(), rng.gumbel());
            let z = gumbel_softmax_binary(q, g0, g1, 1e-3).unwrap();
            let gap = clamp_prob(q).ln() + g1 - (1.0 - clamp_prob(q)).ln() - g0;
            // near-ties (|gap| ~ τ) have vanishing probability
            if gap.abs() > 0.01 {
                assert!((z - z.round()).abs() < 1e-3, "z={z} gap={gap}");
            }
        }
    }

    #[test]
    fn grad_matches_central_difference() {
        let h = 1e-6;
        for &(q, g0, g1, tau) in &[(0.3, 0.1, -0.4, 0.7), (0.9, 1.0, 0.2, 2.0), (0.05, -0.5, 0.5, 1.0)] {
            let fd = (relaxed_bit(q + h, g0, g1, tau) - relaxed_bit(q - h, g0, g1, tau)) / (2.0 * h);
            let an = gumbel_softmax_binary_grad(q, g0, g1, tau);
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{fd} vs {an}");
        }
    }

    #[test]
    fn gaussian_reparam_cases() {
        assert_eq!(gaussian_reparam(&[1.5], &[0.7], &[0.0]).unwrap(), vec![1.5]);
        let s = gaussian_reparam(&[2.0], &[4.0f64.ln()], &[1.0]).unwrap();
        assert!((s[0] - 4.0).abs() < 1e-12);
        assert!(gaussian_reparam(&[0.0], &[0.0, 1.0], &[0.0]).is_err());
    }

    #[test]
    fn schedule_values() {
        let s = DecaySchedule::default();
        assert_eq!(s.value(0), 1.0);
        assert_eq!(s.value(u64::MAX), 0.5);
        assert_eq!(s.value(23_105), 0.5);
        assert!(s.value(23_100) > 0.5);
        assert!(DecaySchedule::new(0.0, 0.5).is_err());
        assert!(DecaySchedule::new(1.0, 1.5).is_err());
    }
}
