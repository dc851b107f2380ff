//! Addressable Gaussian noise.
//!
//! Every mutation draw is addressed by `(generation, slot, parameter)`. The
//! value at an address is a pure function of the stream seed and the address,
//! so populations can be stepped in any slot order or on any number of threads
//! and still reproduce bit-for-bit. Two populations sharing a seed also share
//! every draw, which is what the coupled lineage trials rely on.
//!
//! Addressing scheme: the seed, generation and slot are absorbed into a 64-bit
//! key with the SplitMix64 finalizer. That key seeds a SplitMix64 sequence, and
//! parameter `i` is the `i`-th standard normal sampled from it with the
//! ziggurat sampler from `rand_distr`.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn absorb(state: u64, word: u64) -> u64 {
    mix64(state ^ mix64(word.wrapping_add(GOLDEN_GAMMA)))
}

/// SplitMix64 generator. Small, fast and fully specified, so draws do not
/// depend on the `rand` version's choice of default generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }
}

impl RngCore for SplitMix64 {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// Source of raw (unscaled) standard-normal mutation noise.
pub trait NoiseSource: Sync {
    /// Writes the draws for parameters `0..out.len()` of `slot` at `generation`.
    fn fill(&self, generation: u64, slot: usize, out: &mut [f64]);
}

/// Counter-addressed standard-normal stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    seed: u64,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn slot_rng(&self, generation: u64, slot: usize) -> SplitMix64 {
        let key = absorb(absorb(mix64(self.seed), generation), slot as u64);
        SplitMix64::new(key)
    }

    /// The draw at a single address. `fill` is cheaper for whole genomes.
    pub fn draw(&self, generation: u64, slot: usize, param: usize) -> f64 {
        let mut rng = self.slot_rng(generation, slot);
        let mut value = 0.0;
        for _ in 0..=param {
            value = StandardNormal.sample(&mut rng);
        }
        value
    }
}

impl NoiseSource for NoiseStream {
    #[inline]
    fn fill(&self, generation: u64, slot: usize, out: &mut [f64]) {
        let mut rng = self.slot_rng(generation, slot);
        for v in out.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
    }
}

/// All draws are zero. Turns the engine into its deterministic skeleton.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn fill(&self, _generation: u64, _slot: usize, out: &mut [f64]) {
        out.fill(0.0);
    }
}
