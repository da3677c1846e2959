use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use noisycan_core::TrainingConfig;

/// λ values compared in the reference λ ablation.
pub const LAMBDA_PRESET: [f64; 7] = [0.0, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0];

#[derive(Debug, Parser)]
#[command(
    name = "noisycan",
    version,
    about = "Train and inspect contrastive-additive noise networks"
)]
pub struct Cli {
    /// Root for run directories when `--out` is not given.
    #[arg(long, global = true, env = "NOISYCAN_OUT", default_value = "runs")]
    pub out_root: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset, optionally with shuffled labels.
    GenData(GenDataArgs),
    /// Train a CAN model.
    Train(TrainArgs),
    /// Train the plain cross-entropy classifier.
    TrainBaseline(TrainArgs),
    /// Score a trained classifier against clean labels.
    Eval(EvalArgs),
    /// Compare the analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Train CAN and the baseline over a grid of noise levels and seeds.
    SweepNoise(SweepArgs),
    /// Write embeddings, posteriors and transition matrices of a run.
    ExportDiag(ExportDiagArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Reference constants: 90 epochs, schedules decaying over ~23k steps.
    Reference,
    /// 30 epochs with schedules compressed to match.
    Desk,
}

impl Preset {
    pub fn config(self) -> TrainingConfig {
        match self {
            Preset::Reference => TrainingConfig::default(),
            Preset::Desk => TrainingConfig::desk(),
        }
    }
}

/// Training hyperparameters. Unset flags fall back to `--preset`.
#[derive(Debug, Clone, Default, Args)]
pub struct TrainingFlags {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub base_lr: Option<f64>,
    #[arg(long)]
    pub lr_decay_every: Option<usize>,
    #[arg(long)]
    pub lr_decay_factor: Option<f64>,
    #[arg(long)]
    pub tau_scale: Option<f64>,
    #[arg(long)]
    pub tau_floor: Option<f64>,
    #[arg(long)]
    pub rho_scale: Option<f64>,
    #[arg(long)]
    pub rho_floor: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub quality_dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub backbone_hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub contrastive_hidden: Option<usize>,
    #[arg(long)]
    pub additive_hidden: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub decoder_hidden: Option<Vec<usize>>,
}

impl TrainingFlags {
    pub fn resolve(&self, default_preset: Preset) -> TrainingConfig {
        let mut c = self.preset.unwrap_or(default_preset).config();
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { c.$($field).+ = v; })*
            };
        }
        set!(
            lambda => lambda,
            samples => samples,
            batch_size => batch_size,
            epochs => epochs,
            base_lr => base_lr,
            lr_decay_every => lr_decay_every,
            lr_decay_factor => lr_decay_factor,
            tau_scale => tau.scale,
            tau_floor => tau.floor,
            rho_scale => rho.scale,
            rho_floor => rho.floor,
            seed => seed,
            quality_dim => arch.quality_dim,
            backbone_hidden => arch.backbone_hidden,
            contrastive_hidden => arch.contrastive_hidden,
            additive_hidden => arch.additive_hidden,
            decoder_hidden => arch.decoder_hidden,
        );
        c
    }
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 4)]
    pub features: usize,
    #[arg(long, default_value_t = 250)]
    pub per_class: usize,
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    /// Positive classes per row (1 or 2).
    #[arg(long, default_value_t = 1)]
    pub labels_per_row: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Probability that a training row has its labels shuffled.
    #[arg(long, default_value_t = 0.0)]
    pub p_noise: f64,
    /// Fraction held out as a clean test split; 0 writes a single `data.csv`.
    #[arg(long, default_value_t = 0.0)]
    pub test_fraction: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training CSV.
    #[arg(long, required_unless_present = "config")]
    pub data: Option<PathBuf>,
    /// Optional held-out CSV with clean labels for metrics.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Replay a persisted `config.json`; other flags are ignored.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for the diagnostics K-means initialization.
    #[arg(long, default_value_t = 0)]
    pub diag_seed: u64,
    #[command(flatten)]
    pub training: TrainingFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Run directory holding a checkpoint.
    #[arg(long)]
    pub run: PathBuf,
    /// CSV with clean labels.
    #[arg(long)]
    pub data: PathBuf,
    /// Metrics CSV destination; defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8,1.0")]
    pub pnoise: Vec<f64>,
    /// Seeds 0..N per noise level.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    /// λ values to sweep; overrides `--lambda`.
    #[arg(long, value_delimiter = ',', conflicts_with = "lambda_preset")]
    pub lambdas: Option<Vec<f64>>,
    /// Sweep λ over 0,0.2,0.5,1,2,5,10.
    #[arg(long)]
    pub lambda_preset: bool,
    #[arg(long, default_value_t = 4)]
    pub classes: usize,
    #[arg(long, default_value_t = 4)]
    pub features: usize,
    #[arg(long, default_value_t = 1.0)]
    pub spread: f64,
    #[arg(long, default_value_t = 1000)]
    pub train_rows: usize,
    #[arg(long, default_value_t = 400)]
    pub test_rows: usize,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub training: TrainingFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SweepArgs {
    pub fn lambda_grid(&self, cfg: &TrainingConfig) -> Vec<f64> {
        match (&self.lambdas, self.lambda_preset) {
            (Some(l), _) => l.clone(),
            (None, true) => LAMBDA_PRESET.to_vec(),
            (None, false) => vec![cfg.lambda],
        }
    }
}

#[derive(Debug, Args)]
pub struct ExportDiagArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// CSV to diagnose; defaults to the run's training data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; defaults to `<run>/diagnostics`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
