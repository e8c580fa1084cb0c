//! Frozen point-cloud encoder: a per-point MLP max-pooled over points.
//!
//! Weights are drawn once from a declared seed and never trained; the
//! parameter hash is pinned by tests so any accidental mutation shows up.

use crate::math::Vec3;
use crate::nn::{elu, gemm, orthogonal};
use crate::rng;

/// Declared seed of the project-wide frozen encoder.
pub const ENCODER_SEED: u64 = 2024;

pub const POINT_DIM: usize = 3;
pub const ENC_HIDDEN: usize = 64;
pub const ENC_OUT: usize = 128;

#[derive(Clone, Debug)]
pub struct FrozenEncoder {
    pub seed: u64,
    w0: Vec<f32>, // [3, 64]
    b0: Vec<f32>,
    w1: Vec<f32>, // [64, 128]
    b1: Vec<f32>,
}

impl FrozenEncoder {
    pub fn new(seed: u64) -> Self {
        let mut s = rng::stream(seed, rng::Purpose::Init, 0, 0);
        FrozenEncoder {
            seed,
            w0: orthogonal(POINT_DIM, ENC_HIDDEN, 1.0, &mut s),
            b0: vec![0.0; ENC_HIDDEN],
            w1: orthogonal(ENC_HIDDEN, ENC_OUT, 1.0, &mut s),
            b1: vec![0.0; ENC_OUT],
        }
    }

    /// Permutation-invariant features: channelwise max over per-point outputs.
    pub fn encode(&self, points: &[Vec3]) -> Vec<f32> {
        assert!(!points.is_empty(), "encode called on an empty cloud");
        let n = points.len();
        let mut flat = Vec::with_capacity(n * POINT_DIM);
        for p in points {
            flat.push(p.x);
            flat.push(p.y);
            flat.push(p.z);
        }
        let mut h = vec![0.0f32; n * ENC_HIDDEN];
        gemm(n, POINT_DIM, ENC_HIDDEN, &flat, &self.w0, &mut h);
        for i in 0..n {
            for j in 0..ENC_HIDDEN {
                h[i * ENC_HIDDEN + j] = elu(h[i * ENC_HIDDEN + j] + self.b0[j]);
            }
        }
        let mut f = vec![0.0f32; n * ENC_OUT];
        gemm(n, ENC_HIDDEN, ENC_OUT, &h, &self.w1, &mut f);
        let mut out = vec![f32::NEG_INFINITY; ENC_OUT];
        for i in 0..n {
            for j in 0..ENC_OUT {
                let v = f[i * ENC_OUT + j] + self.b1[j];
                if v > out[j] {
                    out[j] = v;
                }
            }
        }
        out
    }

    /// Fingerprint over every weight, in a fixed order.
    pub fn params_hash(&self) -> u64 {
        let mut h = crate::io::Fnv::new();
        for part in [&self.w0, &self.b0, &self.w1, &self.b1] {
            for v in part {
                h.write_u32(v.to_bits());
            }
        }
        h.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(n: usize, seed: u64) -> Vec<Vec3> {
        let mut s = rng::stream(seed, rng::Purpose::SceneCloud, 0, 0);
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng::uniform(&mut s, -0.2, 0.2),
                    rng::uniform(&mut s, -0.2, 0.2),
                    rng::uniform(&mut s, 0.0, 0.1),
                )
            })
            .collect()
    }

    #[test]
    fn output_width_128() {
        let enc = FrozenEncoder::new(ENCODER_SEED);
        assert_eq!(enc.encode(&cloud(50, 1)).len(), 128);
    }

    #[test]
    fn permutation_invariant() {
        let enc = FrozenEncoder::new(ENCODER_SEED);
        let pts = cloud(64, 2);
        let a = enc.encode(&pts);
        let mut rev: Vec<Vec3> = pts.clone();
        rev.reverse();
        let b = enc.encode(&rev);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn repeated_point_equals_per_point_output() {
        let enc = FrozenEncoder::new(ENCODER_SEED);
        let p = Vec3::new(0.05, -0.02, 0.03);
        let single = enc.encode(&[p]);
        let repeated = enc.encode(&vec![p; 17]);
        for (a, b) in single.iter().zip(repeated.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn dominated_point_ignored() {
        let enc = FrozenEncoder::new(ENCODER_SEED);
        let base = cloud(32, 3);
        let feats = enc.encode(&base);
        // Find a point whose per-point features are below the pooled max in
        // every channel, then verify dropping it changes nothing.
        'outer: for drop_idx in 0..base.len() {
            let solo = enc.encode(&[base[drop_idx]]);
            for j in 0..ENC_OUT {
                if solo[j] >= feats[j] {
                    continue 'outer;
                }
            }
            let mut without: Vec<Vec3> = base.clone();
            without.remove(drop_idx);
            let f2 = enc.encode(&without);
            for (a, b) in feats.iter().zip(f2.iter()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            return;
        }
        panic!("no fully dominated point in the test cloud; pick a new seed");
    }

    #[test]
    fn seed_pins_parameters() {
        let a = FrozenEncoder::new(ENCODER_SEED);
        let b = FrozenEncoder::new(ENCODER_SEED);
        assert_eq!(a.params_hash(), b.params_hash());
        let c = FrozenEncoder::new(ENCODER_SEED + 1);
        assert_ne!(a.params_hash(), c.params_hash());
    }

    #[test]
    #[should_panic(expected = "empty cloud")]
    fn empty_cloud_rejected() {
        FrozenEncoder::new(ENCODER_SEED).encode(&[]);
    }
}
