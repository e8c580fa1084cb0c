//! Seeded parameter initialization.
//!
//! Weight matrices get an orthogonal-style init: a Gaussian draw is
//! Gram-Schmidt orthonormalized along its smaller dimension (in f64) and
//! scaled by a gain. Fixed draw order per layer keeps checkpoints
//! reproducible across runs.

use crate::rng::{standard_normal, Stream};

/// Orthogonal-style [rows, cols] matrix, row-major, scaled by `gain`.
pub fn orthogonal(rows: usize, cols: usize, gain: f32, stream: &mut Stream) -> Vec<f32> {
    let (r, c, transpose) = if rows >= cols {
        (rows, cols, false)
    } else {
        (cols, rows, true)
    };
    // r >= c: orthonormalize the c column vectors of an r x c Gaussian draw.
    let mut a = vec![0.0f64; r * c];
    for v in a.iter_mut() {
        *v = standard_normal(stream) as f64;
    }
    for j in 0..c {
        for prev in 0..j {
            let mut dot = 0.0f64;
            for i in 0..r {
                dot += a[i * c + j] * a[i * c + prev];
            }
            for i in 0..r {
                a[i * c + j] -= dot * a[i * c + prev];
            }
        }
        let mut norm = 0.0f64;
        for i in 0..r {
            norm += a[i * c + j] * a[i * c + j];
        }
        let norm = norm.sqrt().max(1e-12);
        for i in 0..r {
            a[i * c + j] /= norm;
        }
    }
    let mut out = vec![0.0f32; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let v = if transpose { a[j * c + i] } else { a[i * c + j] };
            out[i * cols + j] = (gain as f64 * v) as f32;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn columns_orthonormal() {
        let mut s = rng::stream(3, rng::Purpose::Init, 0, 0);
        let (rows, cols) = (64, 16);
        let w = orthogonal(rows, cols, 1.0, &mut s);
        for j in 0..cols {
            for k in j..cols {
                let mut dot = 0.0f64;
                for i in 0..rows {
                    dot += w[i * cols + j] as f64 * w[i * cols + k] as f64;
                }
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-5, "col {j} . col {k} = {dot}");
            }
        }
    }

    #[test]
    fn wide_matrix_rows_orthonormal() {
        let mut s = rng::stream(4, rng::Purpose::Init, 0, 0);
        let (rows, cols) = (8, 32);
        let w = orthogonal(rows, cols, 1.0, &mut s);
        for i in 0..rows {
            let mut dot = 0.0f64;
            for j in 0..cols {
                dot += w[i * cols + j] as f64 * w[i * cols + j] as f64;
            }
            assert!((dot - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn deterministic_by_seed() {
        let mut a = rng::stream(9, rng::Purpose::Init, 0, 0);
        let mut b = rng::stream(9, rng::Purpose::Init, 0, 0);
        let wa = orthogonal(16, 8, 0.01, &mut a);
        let wb = orthogonal(16, 8, 0.01, &mut b);
        assert_eq!(wa, wb);
    }
}
