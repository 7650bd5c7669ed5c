//! Reproducible random streams keyed by `(master_seed, path_index, tag)`.
//!
//! Each stream is a ChaCha8 generator whose key comes from the master seed
//! and whose 64-bit stream id encodes the path index and purpose tag, so a
//! path draws the same numbers no matter which worker runs it or in what
//! order. Gaussians use `rand_distr::StandardNormal` (ziggurat).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamTag {
    Brownian,
    MeasurementNoise,
}

impl StreamTag {
    fn bit(self) -> u64 {
        match self {
            StreamTag::Brownian => 0,
            StreamTag::MeasurementNoise => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub path_index: u64,
    pub tag: StreamTag,
}

impl SeedSpec {
    pub fn new(master_seed: u64, path_index: u64, tag: StreamTag) -> Self {
        SeedSpec {
            master_seed,
            path_index,
            tag,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        debug_assert!(self.path_index < 1 << 63);
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream((self.path_index << 1) | self.tag.bit());
        rng
    }
}

/// Brownian increments `dW(t_j) = W(t_{j+1}) - W(t_j)`, `j = 0..N_t-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSeries {
    pub ht: f64,
    pub values: Vec<f64>,
}

impl IncrementSeries {
    /// The constant series `dW_j = ht`, which turns the stochastic scheme into
    /// a deterministic one with forcing `f g`.
    pub fn deterministic(nt: usize, ht: f64) -> Self {
        IncrementSeries {
            ht,
            values: vec![ht; nt],
        }
    }

    pub fn zeros(nt: usize, ht: f64) -> Self {
        IncrementSeries {
            ht,
            values: vec![0.0; nt],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn brownian_increments(seed: SeedSpec, nt: usize, ht: f64) -> Result<IncrementSeries> {
    if nt == 0 {
        return invalid("N_t must be at least 1");
    }
    if !(ht > 0.0) {
        return invalid("time step must be positive");
    }
    let sd = ht.sqrt();
    let mut rng = seed.rng();
    let values = (0..nt)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(IncrementSeries { ht, values })
}

/// I.i.d. draws from the uniform distribution on `[-1, 1]`.
pub fn uniform_noise(seed: SeedSpec, count: usize) -> Vec<f64> {
    let mut rng = seed.rng();
    (0..count).map(|_| rng.random_range(-1.0..=1.0)).collect()
}
