use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, EvalReport};
use crate::config::TrainingConfig;
use crate::data::{corrupt_labels, gen_synthetic, split, Dataset, NoiseConfig};
use crate::error::{Error, Result};
use crate::optimizer::{train, train_baseline};

/// Synthetic data used by a controlled-noise sweep. Training labels are
/// corrupted; test labels stay clean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepData {
    pub classes: usize,
    pub features: usize,
    pub spread: f64,
    pub train_rows: usize,
    pub test_rows: usize,
}

impl Default for SweepData {
    fn default() -> Self {
        SweepData {
            classes: 4,
            features: 4,
            spread: 1.0,
            train_rows: 1000,
            test_rows: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub p_noise: f64,
    pub seed: u64,
    pub can: EvalReport,
    pub baseline: EvalReport,
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p_noise: f64,
    pub seed: u64,
    pub model: String,
    pub map: f64,
    pub accuracy: f64,
}

impl CellResult {
    pub fn rows(&self) -> [SweepRow; 2] {
        let row = |model: &str, r: &EvalReport| SweepRow {
            p_noise: self.p_noise,
            seed: self.seed,
            model: model.to_string(),
            map: r.map,
            accuracy: r.accuracy,
        };
        [row("can", &self.can), row("baseline", &self.baseline)]
    }
}

/// Generates data from `seed` and splits it; the training side is corrupted
/// at `p_noise`, the test side keeps clean labels.
pub fn cell_data(data: &SweepData, p_noise: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let total = data.train_rows + data.test_rows;
    if data.classes == 0 || total % data.classes != 0 {
        return Err(Error::invalid(format!(
            "train + test rows ({total}) must be a multiple of K={}",
            data.classes
        )));
    }
    let ds = gen_synthetic(data.classes, data.features, total / data.classes, data.spread, seed)?;
    let (train_set, test_set) = split(&ds, data.train_rows as f64 / total as f64, seed.wrapping_add(100))?;
    let train_set = corrupt_labels(
        &train_set,
        NoiseConfig {
            p_noise,
            seed: seed.wrapping_add(200),
        },
    )?;
    Ok((train_set, test_set))
}

/// Trains CAN and the plain baseline on [`cell_data`] with `cfg` (its seed
/// replaced by `seed`) and scores both on the clean test side.
pub fn run_cell(data: &SweepData, p_noise: f64, seed: u64, cfg: &TrainingConfig) -> Result<CellResult> {
    let (train_set, test_set) = cell_data(data, p_noise, seed)?;
    let run = TrainingConfig { seed, ..cfg.clone() };
    let can = evaluate(&train(&train_set, &run)?.params.classifier, &test_set)?;
    let baseline = evaluate(&train_baseline(&train_set, &run)?.classifier, &test_set)?;
    Ok(CellResult {
        p_noise,
        seed,
        can,
        baseline,
    })
}
