//! Row-major f32 tensors and the three matmul kernels everything runs on.
//!
//! All kernels accumulate along fixed index orders, so a given output row is
//! bitwise identical no matter how the batch is sliced or which thread runs
//! it. That property is what makes stored log-probs reproduce exactly when a
//! minibatch is re-run through the same network.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Dense tensor; `grad` is allocated for trainable parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
    pub grad: Option<Vec<f32>>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
            grad: None,
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data mismatch");
        Tensor {
            shape: shape.to_vec(),
            data,
            grad: None,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn with_grad(mut self) -> Self {
        self.grad = Some(vec![0.0; self.data.len()]);
        self
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.fill(0.0);
        }
    }
}

/// Rows below this count run serially; above it, rows split across threads.
const PAR_ROWS: usize = 64;

/// out[m,n] = a[m,k] x b[k,n]. Each output row accumulates in k order.
pub fn gemm(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], out: &mut [f32]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    let row = |ar: &[f32], or: &mut [f32]| {
        or.fill(0.0);
        for (kk, &av) in ar.iter().enumerate() {
            let br = &b[kk * n..kk * n + n];
            for j in 0..n {
                or[j] += av * br[j];
            }
        }
    };
    if m >= PAR_ROWS {
        out.par_chunks_mut(n)
            .zip(a.par_chunks(k))
            .for_each(|(or, ar)| row(ar, or));
    } else {
        for i in 0..m {
            row(&a[i * k..i * k + k], &mut out[i * n..i * n + n]);
        }
    }
}

/// da[m,k] += dc[m,n] x b[k,n]^T (contiguous row dot products).
pub fn gemm_bt(m: usize, n: usize, k: usize, dc: &[f32], b: &[f32], da: &mut [f32]) {
    debug_assert_eq!(dc.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(da.len(), m * k);
    let row = |dcr: &[f32], dar: &mut [f32]| {
        for kk in 0..k {
            let br = &b[kk * n..kk * n + n];
            let mut acc = 0.0f32;
            for j in 0..n {
                acc += dcr[j] * br[j];
            }
            dar[kk] += acc;
        }
    };
    if m >= PAR_ROWS {
        da.par_chunks_mut(k)
            .zip(dc.par_chunks(n))
            .for_each(|(dar, dcr)| row(dcr, dar));
    } else {
        for i in 0..m {
            row(&dc[i * n..i * n + n], &mut da[i * k..i * k + k]);
        }
    }
}

/// dw[k,n] += a[m,k]^T x dc[m,n] (axpy over contiguous dw rows).
pub fn gemm_at(m: usize, k: usize, n: usize, a: &[f32], dc: &[f32], dw: &mut [f32]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(dc.len(), m * n);
    debug_assert_eq!(dw.len(), k * n);
    for i in 0..m {
        let dcr = &dc[i * n..i * n + n];
        let ar = &a[i * k..i * k + k];
        for (kk, &av) in ar.iter().enumerate() {
            let dwr = &mut dw[kk * n..kk * n + n];
            for j in 0..n {
                dwr[j] += av * dcr[j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_naive() {
        let (m, k, n) = (3, 4, 5);
        let a: Vec<f32> = (0..m * k).map(|i| (i as f32) * 0.3 - 1.0).collect();
        let b: Vec<f32> = (0..k * n).map(|i| (i as f32) * 0.1 - 0.7).collect();
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, &a, &b, &mut out);
        for i in 0..m {
            for j in 0..n {
                let mut want = 0.0f64;
                for kk in 0..k {
                    want += a[i * k + kk] as f64 * b[kk * n + j] as f64;
                }
                assert!((out[i * n + j] as f64 - want).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn gemm_rows_independent_of_batch_split() {
        // The same row must come out bitwise identical whether it is computed
        // inside a large batch or alone.
        let (k, n) = (17, 9);
        let a: Vec<f32> = (0..100 * k).map(|i| ((i * 37 % 101) as f32) * 0.013 - 0.5).collect();
        let b: Vec<f32> = (0..k * n).map(|i| ((i * 53 % 97) as f32) * 0.021 - 0.9).collect();
        let mut big = vec![0.0; 100 * n];
        gemm(100, k, n, &a, &b, &mut big);
        for row in [0usize, 7, 63, 99] {
            let mut one = vec![0.0; n];
            gemm(1, k, n, &a[row * k..(row + 1) * k], &b, &mut one);
            for j in 0..n {
                assert_eq!(one[j].to_bits(), big[row * n + j].to_bits());
            }
        }
    }
}
