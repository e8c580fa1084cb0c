//! Seeded random streams and deterministic sub-seed derivation.
//!
//! Every stochastic component in the crate draws from a [`Stream`] derived
//! from a root seed plus a purpose tag, so independent consumers never share
//! or reorder each other's draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The one PRNG used everywhere.
pub type Stream = ChaCha8Rng;

/// Purpose tags keep sub-streams of one seed independent of each other.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub enum Purpose {
    SceneGen = 1,
    TargetSurface = 2,
    SceneCloud = 3,
    ActionNoise = 4,
    Init = 5,
    Shuffle = 6,
    EpisodeSeed = 7,
}

/// SplitMix64 finalizer; good bit diffusion for combining seed material.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a sub-seed from a root seed and up to two lane indices plus a purpose.
#[inline]
pub fn derive_seed(root: u64, purpose: Purpose, a: u64, b: u64) -> u64 {
    mix64(mix64(mix64(root ^ (purpose as u64).wrapping_mul(0xA24B_AED4_963E_E407)) ^ a) ^ b)
}

/// Stream for `(root, purpose, a, b)`.
#[inline]
pub fn stream(root: u64, purpose: Purpose, a: u64, b: u64) -> Stream {
    Stream::seed_from_u64(derive_seed(root, purpose, a, b))
}

/// Uniform in `[lo, hi)`.
#[inline]
pub fn uniform(rng: &mut Stream, lo: f32, hi: f32) -> f32 {
    lo + (hi - lo) * rng.gen::<f32>()
}

/// Standard normal via Box-Muller; two uniform draws per sample.
#[inline]
pub fn standard_normal(rng: &mut Stream) -> f32 {
    let u1: f32 = rng.gen::<f32>().max(1e-12);
    let u2: f32 = rng.gen::<f32>();
    (-2.0 * u1.ln()).sqrt() * (std::f32::consts::TAU * u2).cos()
}
