//! Mini-batch index sampling: each iteration draws a uniform size-B subset
//! of [n] without replacement.
//!
//! Index sets come from a counter-based stream: the generator for iteration
//! k is seeded by (seed, k) alone, so `indices(k)` is a pure function and
//! paired trainers replay bit-identical subsampling sequences by sharing a
//! seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SgnError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SamplerSequence {
    seed: u64,
    n: usize,
    batch: usize,
}

impl SamplerSequence {
    pub fn new(seed: u64, n: usize, batch: usize) -> Result<Self> {
        if n == 0 {
            return Err(SgnError::EmptyDataset);
        }
        if batch == 0 || batch > n {
            return Err(SgnError::InvalidParameter(format!(
                "batch size {batch} must lie in [1, {n}]"
            )));
        }
        Ok(SamplerSequence { seed, n, batch })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// The index set I_k: B distinct indices drawn by partial Fisher-Yates.
    pub fn indices(&self, k: usize) -> Vec<usize> {
        let mut rng = self.stream_rng(k);
        let mut pool: Vec<usize> = (0..self.n).collect();
        for i in 0..self.batch {
            let j = rng.random_range(i..self.n);
            pool.swap(i, j);
        }
        pool.truncate(self.batch);
        pool
    }

    fn stream_rng(&self, k: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        // stream 0 is left to the default; iteration k uses stream k + 1
        rng.set_stream((k as u64).wrapping_add(1).into());
        rng
    }
}
