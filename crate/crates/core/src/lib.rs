//! Noisy-label learning with a contrastive-additive noise network.
//!
//! The model explains each observed label vector through a latent clean
//! label `z` (additive head) and a continuous quality embedding `s`
//! (contrastive head). Training maximizes an ELBO with a mutual-information
//! regularizer; the classifier `P(z|x)` is what gets deployed.
//!
//! ```no_run
//! use noisycan_core::{corrupt_labels, evaluate, gen_synthetic, split, train, NoiseConfig, TrainingConfig};
//!
//! let clean = gen_synthetic(4, 8, 250, 0.8, 0)?;
//! let noisy = corrupt_labels(&clean, NoiseConfig { p_noise: 0.4, seed: 1 })?;
//! let (train_set, test_set) = split(&noisy, 0.75, 2)?;
//! let out = train(&train_set, &TrainingConfig::desk())?;
//! println!("mAP {:.3}", evaluate(&out.params.classifier, &test_set)?.map);
//! # Ok::<(), noisycan_core::Error>(())
//! ```

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod network;
pub mod numkit;
pub mod objective;
pub mod optimizer;
pub mod samplers;

pub use config::{ArchConfig, TrainingConfig};
pub use data::{corrupt_labels, gen_synthetic, inject_pair_flips, read_csv, split, write_csv, Dataset, NoiseConfig};
pub use error::{Error, Result};
pub use eval::{evaluate, export_diagnostics, kmeans_binarize, transition_report, EvalReport, TransitionReport};
pub use network::{load_checkpoint, save_checkpoint, ModelParams, NetworkConfig, ParamGroup};
pub use numkit::{Matrix, RandomSource};
pub use objective::{total_loss, LossBreakdown, LossRecord};
pub use optimizer::{gradient_check, train, train_baseline, GradCheckConfig, GradCheckReport};
pub use samplers::DecaySchedule;
