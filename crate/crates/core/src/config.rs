use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkConfig;
use crate::objective::DEFAULT_LAMBDA;
use crate::samplers::DecaySchedule;

/// Hidden widths and quality dimension; input/output sizes come from data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub quality_dim: usize,
    pub backbone_hidden: Vec<usize>,
    pub contrastive_hidden: usize,
    pub additive_hidden: usize,
    pub decoder_hidden: Vec<usize>,
}

impl Default for ArchConfig {
    fn default() -> Self {
        let n = NetworkConfig::new(1, 1);
        ArchConfig {
            quality_dim: n.quality_dim,
            backbone_hidden: n.backbone_hidden,
            contrastive_hidden: n.contrastive_hidden,
            additive_hidden: n.additive_hidden,
            decoder_hidden: n.decoder_hidden,
        }
    }
}

impl ArchConfig {
    pub fn network(&self, features: usize, classes: usize) -> NetworkConfig {
        NetworkConfig {
            features,
            classes,
            quality_dim: self.quality_dim,
            backbone_hidden: self.backbone_hidden.clone(),
            contrastive_hidden: self.contrastive_hidden,
            additive_hidden: self.additive_hidden,
            decoder_hidden: self.decoder_hidden.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Weight of the mutual-information regularizer.
    pub lambda: f64,
    /// Monte-Carlo samples per item.
    pub samples: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub base_lr: f64,
    /// Learning rate is divided by `lr_decay_factor` every this many epochs.
    pub lr_decay_every: usize,
    pub lr_decay_factor: f64,
    /// Gumbel-softmax temperature schedule.
    pub tau: DecaySchedule,
    /// Weight of the cross-entropy gradient in the classifier update.
    pub rho: DecaySchedule,
    pub seed: u64,
    pub arch: ArchConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            lambda: DEFAULT_LAMBDA,
            samples: 1,
            batch_size: 50,
            epochs: 90,
            base_lr: 0.01,
            lr_decay_every: 30,
            lr_decay_factor: 10.0,
            tau: DecaySchedule::default(),
            rho: DecaySchedule::default(),
            seed: 0,
            arch: ArchConfig::default(),
        }
    }
}

impl TrainingConfig {
    /// Shorter runs with schedules compressed to match: 30 epochs, and the
    /// temperature and annealing weight reach their floor after roughly
    /// 230 steps instead of 23 000.
    pub fn desk() -> Self {
        TrainingConfig {
            epochs: 30,
            tau: DecaySchedule {
                scale: 3e-3,
                floor: 0.5,
            },
            rho: DecaySchedule {
                scale: 3e-3,
                floor: 0.5,
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.samples == 0 || self.batch_size == 0 {
            return Err(Error::invalid("samples and batch_size must be >= 1"));
        }
        if !(self.base_lr >= 0.0 && self.base_lr.is_finite()) {
            return Err(Error::invalid(format!("base_lr must be >= 0, got {}", self.base_lr)));
        }
        if self.lr_decay_every == 0 || self.lr_decay_factor.is_nan() || self.lr_decay_factor <= 0.0 {
            return Err(Error::invalid("lr decay period and factor must be positive"));
        }
        self.tau.validate()?;
        self.rho.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reference_setup() {
        let c = TrainingConfig::default();
        assert_eq!(c.lambda, 0.3);
        assert_eq!(c.batch_size, 50);
        assert_eq!(c.epochs, 90);
        assert_eq!(c.base_lr, 0.01);
        assert_eq!(c.samples, 1);
        assert_eq!(
            c.tau,
            DecaySchedule {
                scale: 3e-5,
                floor: 0.5
            }
        );
        c.validate().unwrap();
        TrainingConfig::desk().validate().unwrap();
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            TrainingConfig {
                lambda: -1.0,
                ..Default::default()
            },
            TrainingConfig {
                samples: 0,
                ..Default::default()
            },
            TrainingConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainingConfig {
                lr_decay_every: 0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn serde_round_trip() {
        let c = TrainingConfig::desk();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<TrainingConfig>(&s).unwrap(), c);
    }
}
