use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Lower/upper clamp applied to uniforms before the Gumbel double log.
pub const GUMBEL_CLAMP: f64 = 1e-12;

/// Kinds of draw supported by [`RandomSource::draw`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrawKind {
    Uniform01,
    Gaussian,
    Gumbel,
}

/// Seeded, portable random source (ChaCha8).
///
/// Independent sub-streams are obtained with [`fork`](Self::fork), so that
/// e.g. initialization and batch shuffling never share a sequence.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// A fresh source on sub-stream `stream` of the same seed.
    pub fn fork(&self, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        RandomSource { seed: self.seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform01(&mut self) -> f64 {
        self.rng.sample(Open01)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform01()
    }

    pub fn gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn gumbel(&mut self) -> f64 {
        gumbel_from_uniform(self.uniform01())
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform01() < p
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    pub fn draw(&mut self, kind: DrawKind, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| match kind {
                DrawKind::Uniform01 => self.uniform01(),
                DrawKind::Gaussian => self.gaussian(),
                DrawKind::Gumbel => self.gumbel(),
            })
            .collect()
    }
}

/// Standard Gumbel variate `-ln(-ln u)` with `u` clamped away from 0 and 1.
pub fn gumbel_from_uniform(u: f64) -> f64 {
    let u = u.clamp(GUMBEL_CLAMP, 1.0 - GUMBEL_CLAMP);
    -(-u.ln()).ln()
}
