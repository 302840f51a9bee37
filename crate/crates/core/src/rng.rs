//! Deterministic, stream-addressable randomness and index sampling.
//!
//! Every random draw in a solver comes from a stream derived from
//! `(seed, purpose, iteration, component, ...)`, so the draws for one component
//! never depend on how many draws another component consumed. This is what
//! makes replays bit-exact and keeps per-component fan-out order-independent.

use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Stream tags used by the solvers.
pub(crate) mod tag {
    pub const TRACKER_INIT: u64 = 1;
    pub const COMPONENTS: u64 = 2;
    pub const VALUE_BATCH: u64 = 3;
    pub const VJP_BATCH: u64 = 4;
    pub const ADDITIVE_BATCH: u64 = 5;
    pub const OUTPUT_INDEX: u64 = 6;
    pub const DUAL_INIT: u64 = 7;
    pub const PROBLEM_DATA: u64 = 8;
    pub const INNER_RUN: u64 = 9;
}

#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        SeededRng { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh generator on a child stream addressed by `path`. The parent's
    /// position is irrelevant: only `(seed, stream, path)` matter.
    pub fn derive(&self, path: &[u64]) -> SeededRng {
        let mut s = splitmix64(self.stream);
        for &p in path {
            s = splitmix64(s ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019)));
        }
        SeededRng::new(self.seed, s)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Standard normal draw (Box-Muller).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn index_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        self.inner.random_range(lo..=hi)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn sample_subset(rng: &mut SeededRng, population: usize, amount: usize, what: &str) -> Result<Vec<usize>> {
    if amount == 0 || amount > population {
        return Err(Error::config(alloc::format!(
            "{what} batch size {amount} must lie in [1, {population}]"
        )));
    }
    if amount == population {
        return Ok((0..population).collect());
    }
    let mut picked = index::sample(rng, population, amount).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Uniform subset of `{0, .., n-1}` of size `batch`, without replacement, in
/// ascending order.
pub fn sample_components(rng: &mut SeededRng, n: usize, batch: usize) -> Result<Vec<usize>> {
    sample_subset(rng, n, batch, "component")
}

/// Uniform subset of a finite data population, without replacement, in
/// ascending order.
pub fn sample_data_batch(rng: &mut SeededRng, population: usize, batch: usize) -> Result<Vec<usize>> {
    sample_subset(rng, population, batch, "data")
}
