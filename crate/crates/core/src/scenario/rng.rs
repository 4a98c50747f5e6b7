//! Seeded random streams.
//!
//! Each stream is ChaCha20 keyed by the experiment seed (little-endian in
//! the first 8 key bytes, remaining key bytes zero) with the 64-bit ChaCha
//! stream id selecting the stream. Stream 0 drives node placement; stream
//! `1 + i * n_ids + k` drives the fading matrix from ID `k` to AP `i`.
//! Uniforms take the top 53 bits of a `u64` draw; complex Gaussians use the
//! Box-Muller transform. Nothing here depends on platform-specific
//! floating-point behaviour beyond IEEE `ln`, `sqrt`, `sin` and `cos`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

pub const POSITION_STREAM: u64 = 0;

pub fn channel_stream(ap: usize, id: usize, n_ids: usize) -> u64 {
    1 + (ap * n_ids + id) as u64
}

pub struct Stream {
    rng: ChaCha20Rng,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(stream);
        Self { rng }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Circularly-symmetric complex Gaussian with unit variance.
    pub fn complex_normal(&mut self) -> Complex64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        Complex64::new(r * c, r * s)
    }

    /// Uniform point in the disc of the given radius centred at the origin.
    pub fn point_in_disc(&mut self, radius: f64) -> [f64; 2] {
        let r = radius * self.uniform().sqrt();
        let (s, c) = (2.0 * PI * self.uniform()).sin_cos();
        [r * c, r * s]
    }
}
