//! Counter-based uniform streams.
//!
//! Every uniform draw is a pure function of `(seed, stream, index)`, so Monte
//! Carlo chunks can be evaluated in any order or on any thread and still
//! reproduce bit-identical results. Agent `i` of a simulation reads stream
//! `i`; sample `s` reads index `s`, which gives common random numbers across
//! mechanisms evaluated with the same seed.

use rand_core::{impls, RngCore};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_GAMMA: u64 = 0xD1B5_4A32_D192_ED03;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Maps 64 random bits to the open interval (0, 1).
#[inline]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Key of sub-stream `stream` under `seed`.
#[inline]
pub fn stream_key(seed: u64, stream: u64) -> u64 {
    mix64(mix64(seed ^ 0x6A09_E667_F3BC_C909) ^ stream.wrapping_mul(STREAM_GAMMA))
}

/// The `index`-th uniform of the stream with the given key.
#[inline]
pub fn uniform_at(key: u64, index: u64) -> f64 {
    open_unit(mix64(key.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))))
}

/// A [`RngCore`] view over one counter-based stream.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self::at(seed, stream, 0)
    }

    /// Positions the stream at `index`, so the next draw equals
    /// `uniform_at(stream_key(seed, stream), index)`.
    pub fn at(seed: u64, stream: u64, index: u64) -> Self {
        Self {
            key: stream_key(seed, stream),
            counter: index,
        }
    }

    pub fn next_open01(&mut self) -> f64 {
        open_unit(self.next_u64())
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        impls::fill_bytes_via_next(self, dst)
    }
}
