//! Minimal dense-network stack: tensors, reverse-mode autodiff on a flat
//! tape, the actor-critic MLP with a Gaussian head, Adam, and the checkpoint
//! format.

mod adam;
mod checkpoint;
mod init;
mod policy;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{
    params_hash, tensor_from, CheckpointError, CheckpointMeta, PolicyCheckpoint, TensorData,
    FORMAT_VERSION, MAGIC,
};
pub use init::orthogonal;
pub use policy::{gaussian_log_prob, gaussian_log_prob_tape, MlpPolicy, HIDDEN};
pub use tape::{elu, elu_grad_from_output, NodeId, ParamId, ParamStore, Tape};
pub use tensor::{gemm, gemm_at, gemm_bt, Tensor};

#[cfg(test)]
mod gradcheck {
    use super::*;
    use crate::rng;

    /// Central finite differences against the taped backward across every
    /// parameter of a small two-layer net.
    #[test]
    fn backward_matches_central_differences() {
        let mut s = rng::stream(21, rng::Purpose::Init, 0, 0);
        let mut store = ParamStore::new();
        let (din, dh, dout, batch) = (5, 7, 3, 4);
        let w0 = store.add(
            "w0",
            Tensor::from_vec(&[din, dh], orthogonal(din, dh, 1.0, &mut s)),
        );
        let b0 = store.add("b0", Tensor::from_vec(&[1, dh], vec![0.05; dh]));
        let w1 = store.add(
            "w1",
            Tensor::from_vec(&[dh, dout], orthogonal(dh, dout, 1.0, &mut s)),
        );
        let b1 = store.add("b1", Tensor::from_vec(&[1, dout], vec![-0.02; dout]));

        let obs: Vec<f32> = (0..batch * din)
            .map(|i| ((i * 29 % 17) as f32) * 0.07 - 0.5)
            .collect();
        let target: Vec<f32> = (0..batch * dout)
            .map(|i| ((i * 31 % 13) as f32) * 0.09 - 0.6)
            .collect();

        // Independent f64 oracle: naive per-element forward, no tape code.
        let loss_of = |store: &ParamStore| -> f64 {
            let gw0: Vec<f64> = store.get(w0).data.iter().map(|&v| v as f64).collect();
            let gb0: Vec<f64> = store.get(b0).data.iter().map(|&v| v as f64).collect();
            let gw1: Vec<f64> = store.get(w1).data.iter().map(|&v| v as f64).collect();
            let gb1: Vec<f64> = store.get(b1).data.iter().map(|&v| v as f64).collect();
            let mut acc = 0.0f64;
            for r in 0..batch {
                let x: Vec<f64> = obs[r * din..(r + 1) * din]
                    .iter()
                    .map(|&v| v as f64)
                    .collect();
                let mut h = vec![0.0f64; dh];
                for j in 0..dh {
                    let mut z = gb0[j];
                    for i in 0..din {
                        z += x[i] * gw0[i * dh + j];
                    }
                    h[j] = if z > 0.0 { z } else { z.exp() - 1.0 };
                }
                for j in 0..dout {
                    let mut z = gb1[j];
                    for i in 0..dh {
                        z += h[i] * gw1[i * dout + j];
                    }
                    let d = z - target[r * dout + j] as f64;
                    acc += d * d;
                }
            }
            acc / (batch * dout) as f64
        };

        // Analytic gradients.
        store.zero_grads();
        {
            let mut tape = Tape::new();
            let x = tape.input(batch, din, obs.clone());
            let h = tape.linear(&store, x, w0, b0);
            let a = tape.elu(h);
            let y = tape.linear(&store, a, w1, b1);
            let t = tape.input(batch, dout, target.clone());
            let d = tape.sub(y, t);
            let sq = tape.mul(d, d);
            let loss = tape.mean(sq);
            tape.backward(loss, &mut store);
        }

        let h_step = 1e-3f32;
        let mut max_rel = 0.0f64;
        for id in 0..store.len() {
            for i in 0..store.get(id).len() {
                let orig = store.get(id).data[i];
                store.get_mut(id).data[i] = orig + h_step;
                let lp = loss_of(&store);
                store.get_mut(id).data[i] = orig - h_step;
                let lm = loss_of(&store);
                store.get_mut(id).data[i] = orig;
                let numeric = (lp - lm) / (2.0 * h_step as f64);
                let analytic = store.get(id).grad.as_ref().unwrap()[i] as f64;
                let denom = analytic.abs().max(numeric.abs()).max(1e-4);
                let rel = (analytic - numeric).abs() / denom;
                max_rel = max_rel.max(rel);
                assert!(
                    rel < 1e-3,
                    "param {} [{i}]: analytic {analytic} vs numeric {numeric} (rel {rel})",
                    store.name(id)
                );
            }
        }
        eprintln!("gradcheck max relative error: {max_rel:.3e}");
    }
}
