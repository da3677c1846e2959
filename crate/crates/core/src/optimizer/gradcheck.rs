//! Central finite differences against the analytic backward pass, with the
//! sampling noise held fixed.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::network::{model_forward_with_noise, ForwardRecord, ModelParams, NetworkConfig, ParamGroup, SampleNoise};
use crate::numkit::{Matrix, RandomSource};
use crate::objective::total_loss;

use super::backward::{backward_full, GradientBundle};

/// Denominator floor for the relative error, so that entries where both
/// gradients are essentially zero do not blow up.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub network: NetworkConfig,
    pub batch: usize,
    pub tau: f64,
    pub lambda: f64,
    pub step: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            network: NetworkConfig {
                features: 3,
                classes: 3,
                quality_dim: 2,
                backbone_hidden: vec![5],
                contrastive_hidden: 4,
                additive_hidden: 4,
                decoder_hidden: vec![5, 4],
            },
            batch: 4,
            tau: 0.7,
            lambda: 0.3,
            step: 1e-5,
            seed: 0,
        }
    }
}

impl GradCheckConfig {
    pub fn with_seed(seed: u64) -> Self {
        GradCheckConfig {
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCheck {
    pub group: ParamGroup,
    pub params: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub groups: Vec<GroupCheck>,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

pub fn gradient_check(cfg: &GradCheckConfig, tolerance: f64) -> Result<GradCheckReport> {
    gradient_check_with(cfg, tolerance, backward_full)
}

/// Like [`gradient_check`] with a caller-supplied backward pass.
pub fn gradient_check_with<B>(cfg: &GradCheckConfig, tolerance: f64, backward: B) -> Result<GradCheckReport>
where
    B: Fn(&ModelParams, &ForwardRecord, &Matrix, f64) -> Result<GradientBundle>,
{
    let net = &cfg.network;
    let mut params = ModelParams::new(net.clone(), cfg.seed)?;
    let mut rng = RandomSource::new(cfg.seed).fork(3);
    // zero biases put dead rows exactly on a ReLU kink
    for layer in params.all_layers_mut() {
        layer.bias_mut().iter_mut().for_each(|b| *b = 0.1 * rng.gaussian());
    }
    let x = Matrix::from_fn(cfg.batch, net.features, |_, _| rng.gaussian());
    let y = Matrix::from_fn(
        cfg.batch,
        net.classes,
        |_, _| if rng.bernoulli(0.5) { 1.0 } else { 0.0 },
    );
    let noise = SampleNoise::draw(&mut rng, cfg.batch, net.classes, net.quality_dim);

    let record = model_forward_with_noise(&mut params, &x, &y, cfg.tau, noise.clone())?;
    let analytic = backward(&params, &record, &y, cfg.lambda)?;

    let loss_at = |p: &mut ModelParams| -> Result<f64> {
        let r = model_forward_with_noise(p, &x, &y, cfg.tau, noise.clone())?;
        Ok(total_loss(&r, &y, cfg.lambda)?.total)
    };

    let mut groups = Vec::new();
    for g in ParamGroup::ALL {
        let grads: Vec<f64> = analytic.values(g).collect();
        let mut check = GroupCheck {
            group: g,
            params: grads.len(),
            max_rel_error: 0.0,
            max_abs_error: 0.0,
        };
        let mut flat = 0;
        for li in 0..params.layers(g).len() {
            for j in 0..params.layers(g)[li].param_count() {
                let orig = params.layers(g)[li].values().nth(j).expect("index in range");
                let set = |p: &mut ModelParams, v: f64| {
                    *p.layers_mut(g)
                        .swap_remove(li)
                        .values_mut()
                        .nth(j)
                        .expect("index in range") = v;
                };
                set(&mut params, orig + cfg.step);
                let up = loss_at(&mut params)?;
                set(&mut params, orig - cfg.step);
                let down = loss_at(&mut params)?;
                set(&mut params, orig);
                let numeric = (up - down) / (2.0 * cfg.step);
                let a = grads[flat];
                check.max_abs_error = check.max_abs_error.max((a - numeric).abs());
                check.max_rel_error = check.max_rel_error.max(relative_error(a, numeric));
                flat += 1;
            }
        }
        groups.push(check);
    }
    let passed = groups.iter().all(|g| g.max_rel_error < tolerance);
    Ok(GradCheckReport {
        groups,
        tolerance,
        passed,
    })
}
