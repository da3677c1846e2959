//! Synthetic data, the label-corruption protocol, splits and CSV IO.

mod io;

use serde::{Deserialize, Serialize};

pub use io::{read_csv, write_csv, write_manifest};

use crate::error::{Error, Result};
use crate::numkit::{Matrix, RandomSource};

/// Distance of every class mean from the origin.
pub const MEAN_SCALE: f64 = 2.0;

/// Features with noisy multi-hot labels, plus optional clean labels and
/// per-row corruption flags for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub noisy_labels: Matrix,
    pub clean_labels: Option<Matrix>,
    pub corruption_flags: Option<Vec<bool>>,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        noisy_labels: Matrix,
        clean_labels: Option<Matrix>,
        corruption_flags: Option<Vec<bool>>,
    ) -> Result<Self> {
        let ds = Dataset {
            features,
            noisy_labels,
            clean_labels,
            corruption_flags,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.features.rows();
        let k = self.noisy_labels.cols();
        if self.noisy_labels.rows() != m {
            return Err(Error::shape(
                "Dataset",
                format!("{m} label rows"),
                self.noisy_labels.rows(),
            ));
        }
        binary("noisy labels", &self.noisy_labels)?;
        if let Some(clean) = &self.clean_labels {
            clean.expect_shape("Dataset (clean labels)", (m, k))?;
            binary("clean labels", clean)?;
            if let Some(r) = clean.row_iter().position(|row| row.iter().all(|&v| v == 0.0)) {
                return Err(Error::invalid(format!("clean label row {r} has no positive class")));
            }
        }
        if let Some(flags) = &self.corruption_flags {
            if flags.len() != m {
                return Err(Error::shape("Dataset (flags)", m, flags.len()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn classes(&self) -> usize {
        self.noisy_labels.cols()
    }

    /// Clean labels when present, the noisy ones otherwise.
    pub fn reference_labels(&self) -> &Matrix {
        self.clean_labels.as_ref().unwrap_or(&self.noisy_labels)
    }

    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            noisy_labels: self.noisy_labels.select_rows(idx),
            clean_labels: self.clean_labels.as_ref().map(|c| c.select_rows(idx)),
            corruption_flags: self
                .corruption_flags
                .as_ref()
                .map(|f| idx.iter().map(|&i| f[i]).collect()),
        }
    }
}

fn binary(what: &str, m: &Matrix) -> Result<()> {
    if let Some(v) = m.as_slice().iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid(format!("{what} must be 0/1, found {v}")));
    }
    Ok(())
}

/// Index of the first maximum of `row`.
pub fn argmax(row: &[f64]) -> usize {
    row.iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
        )
        .0
}

/// Generation parameters, echoed next to generated files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub features: usize,
    pub per_class: usize,
    pub spread: f64,
    pub seed: u64,
    /// Positive classes per row: 1 for one-hot, 2 for the two-hot variant.
    #[serde(default = "one")]
    pub labels_per_row: usize,
}

fn one() -> usize {
    1
}

impl SyntheticSpec {
    pub fn generate(&self) -> Result<Dataset> {
        match self.labels_per_row {
            1 => gen_synthetic(self.classes, self.features, self.per_class, self.spread, self.seed),
            2 => gen_synthetic_two_hot(
                self.classes,
                self.features,
                self.per_class * self.classes,
                self.spread,
                self.seed,
            ),
            n => Err(Error::invalid(format!("labels_per_row must be 1 or 2, got {n}"))),
        }
    }
}

/// Mean of class `k`: a scaled unit vector when `K ≤ F`, otherwise a point on
/// a circle in the first two feature dimensions.
pub fn class_mean(k: usize, classes: usize, features: usize) -> Vec<f64> {
    let mut mean = vec![0.0; features];
    if classes <= features {
        mean[k] = MEAN_SCALE;
    } else {
        let angle = 2.0 * std::f64::consts::PI * k as f64 / classes as f64;
        mean[0] = MEAN_SCALE * angle.cos();
        mean[1] = MEAN_SCALE * angle.sin();
    }
    mean
}

fn check_gen_args(classes: usize, features: usize, spread: f64) -> Result<()> {
    if classes < 2 || features < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 classes and 2 features, got K={classes}, F={features}"
        )));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::invalid(format!("spread must be >= 0, got {spread}")));
    }
    Ok(())
}

/// `K` isotropic Gaussian clusters with one-hot clean labels, rows grouped by
/// class. Noisy labels start out equal to the clean ones.
pub fn gen_synthetic(classes: usize, features: usize, per_class: usize, spread: f64, seed: u64) -> Result<Dataset> {
    check_gen_args(classes, features, spread)?;
    if per_class == 0 {
        return Err(Error::invalid("per_class must be >= 1"));
    }
    let mut rng = RandomSource::new(seed);
    let m = classes * per_class;
    let mut x = Matrix::zeros(m, features);
    let mut y = Matrix::zeros(m, classes);
    for k in 0..classes {
        let mean = class_mean(k, classes, features);
        for i in 0..per_class {
            let r = k * per_class + i;
            for (v, mu) in x.row_mut(r).iter_mut().zip(&mean) {
                *v = mu + spread * rng.gaussian();
            }
            y[(r, k)] = 1.0;
        }
    }
    Dataset::new(x, y.clone(), Some(y), None)
}

/// Multi-label variant: each row has two distinct positive classes and
/// features centred on the sum of their means.
pub fn gen_synthetic_two_hot(classes: usize, features: usize, rows: usize, spread: f64, seed: u64) -> Result<Dataset> {
    check_gen_args(classes, features, spread)?;
    if rows == 0 {
        return Err(Error::invalid("rows must be >= 1"));
    }
    let mut rng = RandomSource::new(seed);
    let means: Vec<_> = (0..classes).map(|k| class_mean(k, classes, features)).collect();
    let mut x = Matrix::zeros(rows, features);
    let mut y = Matrix::zeros(rows, classes);
    for r in 0..rows {
        let a = rng.index(classes);
        let b = (a + 1 + rng.index(classes - 1)) % classes;
        for (f, v) in x.row_mut(r).iter_mut().enumerate() {
            *v = means[a][f] + means[b][f] + spread * rng.gaussian();
        }
        y[(r, a)] = 1.0;
        y[(r, b)] = 1.0;
    }
    Dataset::new(x, y.clone(), Some(y), None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub p_noise: f64,
    pub seed: u64,
}

impl NoiseConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_noise) {
            return Err(Error::invalid(format!(
                "p_noise must lie in [0, 1], got {}",
                self.p_noise
            )));
        }
        Ok(())
    }
}

/// With probability `p_noise` per row, replaces the noisy label vector by a
/// uniformly random permutation of the clean one. The identity permutation
/// may be drawn; such rows keep their labels but are still flagged.
pub fn corrupt_labels(ds: &Dataset, cfg: NoiseConfig) -> Result<Dataset> {
    cfg.validate()?;
    let clean = ds
        .clean_labels
        .as_ref()
        .ok_or_else(|| Error::invalid("corrupt_labels needs clean labels"))?;
    let mut rng = RandomSource::new(cfg.seed);
    let mut noisy = clean.clone();
    let mut flags = vec![false; ds.len()];
    for (r, flag) in flags.iter_mut().enumerate() {
        if rng.bernoulli(cfg.p_noise) {
            *flag = true;
            rng.shuffle(noisy.row_mut(r));
        }
    }
    Ok(Dataset {
        noisy_labels: noisy,
        corruption_flags: Some(flags),
        ..ds.clone()
    })
}

/// The same protocol restricted to the label entries of classes `a` and `b`:
/// every row with a positive in either class is flagged with probability
/// `p`, and a flagged row has its `(a, b)` entries shuffled, which swaps them
/// half of the time.
pub fn inject_pair_flips(ds: &Dataset, a: usize, b: usize, p: f64, seed: u64) -> Result<Dataset> {
    NoiseConfig { p_noise: p, seed }.validate()?;
    let k = ds.classes();
    if a >= k || b >= k || a == b {
        return Err(Error::invalid(format!(
            "need two distinct classes below {k}, got {a}, {b}"
        )));
    }
    let clean = ds
        .clean_labels
        .as_ref()
        .ok_or_else(|| Error::invalid("inject_pair_flips needs clean labels"))?;
    let mut rng = RandomSource::new(seed);
    let mut noisy = clean.clone();
    let mut flags = vec![false; ds.len()];
    for (r, flag) in flags.iter_mut().enumerate() {
        let row = noisy.row_mut(r);
        if row[a] == 0.0 && row[b] == 0.0 {
            continue;
        }
        if rng.bernoulli(p) {
            *flag = true;
            let mut pair = [row[a], row[b]];
            rng.shuffle(&mut pair);
            row[a] = pair[0];
            row[b] = pair[1];
        }
    }
    Ok(Dataset {
        noisy_labels: noisy,
        corruption_flags: Some(flags),
        ..ds.clone()
    })
}

/// Seeded shuffle, then the first `round(M·ratio)` rows go to the training
/// side.
pub fn split(ds: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let n_train = (ds.len() as f64 * ratio).round() as usize;
    if n_train == 0 || n_train == ds.len() {
        return Err(Error::invalid(format!(
            "split of {} rows at ratio {ratio} leaves one side empty",
            ds.len()
        )));
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    RandomSource::new(seed).shuffle(&mut idx);
    let (train, test) = idx.split_at(n_train);
    Ok((ds.select(train), ds.select(test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_shape_and_one_hot() {
        let ds = gen_synthetic(4, 6, 250, 0.5, 1).unwrap();
        assert_eq!(ds.len(), 1000);
        assert_eq!(ds.classes(), 4);
        for row in ds.noisy_labels.row_iter() {
            assert_eq!(row.iter().sum::<f64>(), 1.0);
        }
        assert_eq!(ds.noisy_labels, *ds.clean_labels.as_ref().unwrap());
    }

    #[test]
    fn zero_spread_gives_means() {
        for (k, f) in [(3, 5), (6, 2)] {
            let ds = gen_synthetic(k, f, 3, 0.0, 9).unwrap();
            for r in 0..ds.len() {
                let c = argmax(ds.noisy_labels.row(r));
                assert_eq!(ds.features.row(r), class_mean(c, k, f).as_slice());
            }
        }
    }

    #[test]
    fn invalid_generation_args() {
        assert!(gen_synthetic(1, 4, 10, 0.1, 0).is_err());
        assert!(gen_synthetic(3, 1, 10, 0.1, 0).is_err());
        assert!(gen_synthetic(3, 3, 0, 0.1, 0).is_err());
        assert!(gen_synthetic(3, 3, 10, -1.0, 0).is_err());
    }

    #[test]
    fn two_hot_rows() {
        let ds = gen_synthetic_two_hot(5, 6, 200, 0.3, 2).unwrap();
        for row in ds.noisy_labels.row_iter() {
            assert_eq!(row.iter().sum::<f64>(), 2.0);
        }
    }

    #[test]
    fn corruption_extremes() {
        let ds = gen_synthetic(4, 4, 50, 0.3, 3).unwrap();
        let none = corrupt_labels(&ds, NoiseConfig { p_noise: 0.0, seed: 1 }).unwrap();
        assert_eq!(none.noisy_labels, ds.noisy_labels);
        assert!(none.corruption_flags.unwrap().iter().all(|&f| !f));
        let all = corrupt_labels(&ds, NoiseConfig { p_noise: 1.0, seed: 1 }).unwrap();
        assert!(all.corruption_flags.unwrap().iter().all(|&f| f));
        assert!(corrupt_labels(&ds, NoiseConfig { p_noise: 1.2, seed: 1 }).is_err());
    }

    #[test]
    fn corruption_needs_clean_labels() {
        let mut ds = gen_synthetic(3, 3, 5, 0.3, 3).unwrap();
        ds.clean_labels = None;
        assert!(corrupt_labels(&ds, NoiseConfig { p_noise: 0.5, seed: 0 }).is_err());
    }

    #[test]
    fn pair_flips_touch_only_the_pair() {
        let ds = gen_synthetic(4, 4, 200, 0.3, 4).unwrap();
        let noisy = inject_pair_flips(&ds, 0, 1, 0.5, 7).unwrap();
        let clean = ds.clean_labels.as_ref().unwrap();
        let flags = noisy.corruption_flags.as_ref().unwrap();
        let mut swapped = 0;
        for (r, &flag) in flags.iter().enumerate() {
            let c = argmax(clean.row(r));
            let n = argmax(noisy.noisy_labels.row(r));
            if c >= 2 {
                assert_eq!(c, n);
                assert!(!flag);
            } else if c != n {
                assert!(flag);
                swapped += 1;
            }
        }
        // 400 rows in the pair, flagged w.p. 0.5 then swapped w.p. 0.5
        assert!((50..150).contains(&swapped), "{swapped}");
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ds = gen_synthetic(3, 3, 279, 0.3, 5).unwrap();
        assert_eq!(ds.len(), 837);
        let (tr, te) = split(&ds, 0.75, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (628, 209));
        let (tr2, _) = split(&ds, 0.75, 1).unwrap();
        assert_eq!(tr, tr2);
        assert!(split(&ds, 0.0, 1).is_err());
        assert!(split(&ds, 0.9999, 1).is_err());
    }

    #[test]
    fn split_is_a_partition() {
        let ds = gen_synthetic(2, 2, 20, 1.0, 8).unwrap();
        let (a, b) = split(&ds, 0.3, 2).unwrap();
        let key = |r: &[f64]| r.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        let mut all: Vec<_> = a.features.row_iter().chain(b.features.row_iter()).map(key).collect();
        let mut orig: Vec<_> = ds.features.row_iter().map(key).collect();
        all.sort();
        orig.sort();
        assert_eq!(all, orig);
    }

    #[test]
    fn dataset_validation() {
        let x = Matrix::zeros(2, 2);
        assert!(Dataset::new(x.clone(), Matrix::zeros(3, 2), None, None).is_err());
        assert!(Dataset::new(x.clone(), Matrix::filled(2, 2, 0.5), None, None).is_err());
        assert!(Dataset::new(x.clone(), Matrix::zeros(2, 2), Some(Matrix::zeros(2, 2)), None).is_err());
        assert!(Dataset::new(x, Matrix::zeros(2, 2), None, Some(vec![true])).is_err());
    }
}
