//! Actor-critic MLP with a state-independent Gaussian head.
//!
//! Actor and critic are [in -> 256 -> 256 -> out] ELU stacks. The same matmul
//! kernels back both the taped training pass and the plain inference pass, so
//! a log-prob stored at rollout time reproduces bitwise when the observation
//! batch is re-run during the update.

use super::init::orthogonal;
use super::tape::{elu, NodeId, ParamStore, Tape};
use super::tensor::{gemm, Tensor};
use crate::rng::{standard_normal, Stream};

pub const HIDDEN: usize = 256;
const LOG2PI: f32 = 1.837_877_1_f32; // ln(2*pi)

/// Parameter ids of one MLP stack.
#[derive(Clone, Debug)]
struct StackIds {
    w: [usize; 3],
    b: [usize; 3],
}

/// Actor-critic policy over a fixed observation width.
#[derive(Clone, Debug)]
pub struct MlpPolicy {
    pub store: ParamStore,
    pub input_dim: usize,
    pub action_dim: usize,
    actor: StackIds,
    critic: StackIds,
    log_std: usize,
}

impl MlpPolicy {
    /// Fresh policy; hidden layers gain 1.0, output layers gain 0.01,
    /// log_std constant at -1.0. Layer draw order is fixed.
    pub fn new(input_dim: usize, action_dim: usize, stream: &mut Stream) -> Self {
        let mut store = ParamStore::new();
        let stack = |store: &mut ParamStore, prefix: &str, out_dim: usize, s: &mut Stream| {
            let dims = [(input_dim, HIDDEN), (HIDDEN, HIDDEN), (HIDDEN, out_dim)];
            let mut w = [0usize; 3];
            let mut b = [0usize; 3];
            for (i, (din, dout)) in dims.iter().enumerate() {
                let gain = if i == 2 { 0.01 } else { 1.0 };
                w[i] = store.add(
                    &format!("{prefix}.w{i}"),
                    Tensor::from_vec(&[*din, *dout], orthogonal(*din, *dout, gain, s)),
                );
                b[i] = store.add(&format!("{prefix}.b{i}"), Tensor::zeros(&[1, *dout]));
            }
            StackIds { w, b }
        };
        let actor = stack(&mut store, "actor", action_dim, stream);
        let critic = stack(&mut store, "critic", 1, stream);
        let log_std = store.add(
            "actor.log_std",
            Tensor::from_vec(&[1, action_dim], vec![-1.0; action_dim]),
        );
        MlpPolicy {
            store,
            input_dim,
            action_dim,
            actor,
            critic,
            log_std,
        }
    }

    pub fn log_std(&self) -> &[f32] {
        &self.store.get(self.log_std).data
    }

    pub fn log_std_id(&self) -> usize {
        self.log_std
    }

    fn stack_tape(&self, tape: &mut Tape, x: NodeId, ids: &StackIds) -> NodeId {
        let h0 = tape.linear(&self.store, x, ids.w[0], ids.b[0]);
        let a0 = tape.elu(h0);
        let h1 = tape.linear(&self.store, a0, ids.w[1], ids.b[1]);
        let a1 = tape.elu(h1);
        tape.linear(&self.store, a1, ids.w[2], ids.b[2])
    }

    /// Taped forward: (action mean node, broadcast log_std node, value node).
    pub fn forward_tape(&self, tape: &mut Tape, obs: NodeId) -> (NodeId, NodeId, NodeId) {
        let (rows, cols) = tape.shape(obs);
        assert_eq!(cols, self.input_dim, "observation width mismatch");
        let mean = self.stack_tape(tape, obs, &self.actor);
        let ls = tape.param(&self.store, self.log_std);
        let ls_b = tape.broadcast_row(ls, rows);
        let value = self.stack_tape(tape, obs, &self.critic);
        (mean, ls_b, value)
    }

    fn stack_inference(&self, obs: &[f32], rows: usize, ids: &StackIds, out_dim: usize) -> Vec<f32> {
        let mut h = vec![0.0f32; rows * HIDDEN];
        let mut h2 = vec![0.0f32; rows * HIDDEN];
        let w0 = &self.store.get(ids.w[0]).data;
        let b0 = &self.store.get(ids.b[0]).data;
        gemm(rows, self.input_dim, HIDDEN, obs, w0, &mut h);
        for i in 0..rows {
            for j in 0..HIDDEN {
                h[i * HIDDEN + j] = elu(h[i * HIDDEN + j] + b0[j]);
            }
        }
        let w1 = &self.store.get(ids.w[1]).data;
        let b1 = &self.store.get(ids.b[1]).data;
        gemm(rows, HIDDEN, HIDDEN, &h, w1, &mut h2);
        for i in 0..rows {
            for j in 0..HIDDEN {
                h2[i * HIDDEN + j] = elu(h2[i * HIDDEN + j] + b1[j]);
            }
        }
        let w2 = &self.store.get(ids.w[2]).data;
        let b2 = &self.store.get(ids.b[2]).data;
        let mut out = vec![0.0f32; rows * out_dim];
        gemm(rows, HIDDEN, out_dim, &h2, w2, &mut out);
        for i in 0..rows {
            for j in 0..out_dim {
                out[i * out_dim + j] += b2[j];
            }
        }
        out
    }

    /// Plain forward for rollouts and evaluation: (means [rows*act], values [rows]).
    pub fn forward(&self, obs: &[f32], rows: usize) -> (Vec<f32>, Vec<f32>) {
        assert_eq!(obs.len(), rows * self.input_dim, "observation batch shape");
        let mean = self.stack_inference(obs, rows, &self.actor, self.action_dim);
        let value = self.stack_inference(obs, rows, &self.critic, 1);
        (mean, value)
    }

    /// Actor-only forward (used at evaluation time).
    pub fn act_mean(&self, obs: &[f32], rows: usize) -> Vec<f32> {
        self.stack_inference(obs, rows, &self.actor, self.action_dim)
    }

    /// Sample an action from the Gaussian head; returns (action, log_prob).
    pub fn sample(&self, mean_row: &[f32], stream: &mut Stream) -> (Vec<f32>, f32) {
        let ls = self.log_std();
        let mut action = vec![0.0f32; self.action_dim];
        for d in 0..self.action_dim {
            let std = ls[d].exp();
            action[d] = mean_row[d] + std * standard_normal(stream);
        }
        let logp = gaussian_log_prob(mean_row, ls, &action);
        (action, logp)
    }
}

/// Log density of `action` under the diagonal Gaussian (mean, exp(log_std)).
///
/// The arithmetic sequence mirrors the taped composition exactly: squared
/// z-scores summed left to right, then -(0.5*s + sum(log_std)) - D/2*ln(2pi).
pub fn gaussian_log_prob(mean: &[f32], log_std: &[f32], action: &[f32]) -> f32 {
    let d = mean.len();
    let mut s = 0.0f32;
    let mut sl = 0.0f32;
    for i in 0..d {
        let inv = (-log_std[i]).exp();
        let z = (action[i] - mean[i]) * inv;
        s += z * z;
        sl += log_std[i];
    }
    (0.5 * s + sl) * -1.0 + -(d as f32 * 0.5 * LOG2PI)
}

/// Taped log-prob of given actions under (mean, log_std) nodes.
/// Returns a [rows, 1] node.
pub fn gaussian_log_prob_tape(
    tape: &mut Tape,
    mean: NodeId,
    log_std_b: NodeId,
    actions: NodeId,
) -> NodeId {
    let (_, d) = tape.shape(mean);
    let diff = tape.sub(actions, mean);
    let neg_ls = tape.scale(log_std_b, -1.0);
    let inv_std = tape.exp(neg_ls);
    let z = tape.mul(diff, inv_std);
    let z2 = tape.mul(z, z);
    let s = tape.sum_rows(z2);
    let sl = tape.sum_rows(log_std_b);
    let half_s = tape.scale(s, 0.5);
    let t = tape.add(half_s, sl);
    let neg = tape.scale(t, -1.0);
    tape.add_const(neg, -(d as f32 * 0.5 * LOG2PI))
}
