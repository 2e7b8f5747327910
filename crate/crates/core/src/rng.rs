//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, stream_id, lane, position)`. The seed and
//! lane form the ChaCha8 key, the stream id selects the ChaCha stream and the
//! position is the word offset. Trial `t` can therefore be regenerated without
//! touching trials `0..t`, and coefficient `n` of a sample does not depend on the
//! truncation degree.
//!
//! Uniforms are turned into standard complex Gaussians by Box–Muller:
//! `ζ = sqrt(-ln u1) · e^{2πi u2}` with `u1 ∈ (0, 1]`, `u2 ∈ [0, 1)`, so that
//! `|ζ|²` is exactly Exp(1) and the phase is uniform.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

/// Lane for the coefficients `ζ_n` of a sampled series.
pub const LANE_COEFFS: u64 = 0;
/// Lanes for the two independent sequences of the splitting `G = G1 + G2`.
pub const LANE_SPLIT_G1: u64 = 1;
pub const LANE_SPLIT_G2: u64 = 2;
/// Tail block of the tilted estimator.
pub const LANE_TILT_TAIL: u64 = 3;
/// Correlated Gaussian vectors for moment checks.
pub const LANE_VECTOR: u64 = 4;
/// Scalar draws for Monte Carlo checks.
pub const LANE_SCALAR: u64 = 5;
/// Base lane for the Gaussian coupling; component `n` uses `LANE_COUPLING + n`.
pub const LANE_COUPLING: u64 = 1 << 32;

const KEY_TAG: u64 = 0x6761_6668_6f6c_6531; // "gafhole1"

/// Number of ChaCha 32-bit words consumed by one complex Gaussian.
const WORDS_PER_GAUSSIAN: u128 = 4;

#[derive(Clone, Debug)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64, stream_id: u64, lane: u64) -> Self {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&lane.to_le_bytes());
        key[16..24].copy_from_slice(&KEY_TAG.to_le_bytes());
        key[24..32].copy_from_slice(&(!KEY_TAG).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream_id);
        Stream { rng }
    }

    /// Stream positioned so that the next complex Gaussian is the one with index `index`.
    pub fn at_gaussian(seed: u64, stream_id: u64, lane: u64, index: u64) -> Self {
        let mut s = Stream::new(seed, stream_id, lane);
        s.rng.set_word_pos(index as u128 * WORDS_PER_GAUSSIAN);
        s
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform_open_low(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard complex Gaussian (density `e^{-|z|²}/π`).
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let u1 = self.uniform_open_low();
        let u2 = self.uniform();
        let radius = (-u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        Complex64::new(radius * c, radius * s)
    }

    /// Standard real Gaussian N(0, 1).
    pub fn real_gaussian(&mut self) -> f64 {
        std::f64::consts::SQRT_2 * self.complex_gaussian().re
    }
}
