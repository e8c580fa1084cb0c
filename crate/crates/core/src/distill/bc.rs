//! Behavior cloning of the vision-based student from teacher episodes.

use super::dataset::DistillDataset;
use crate::env::{ObsMode, ACTION_DIM};
use crate::nn::{Adam, AdamConfig, CheckpointMeta, MlpPolicy, PolicyCheckpoint, Tape};
use crate::rng::{self, Purpose};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BcConfig {
    pub epochs: u32,
    /// Trajectories per optimizer step.
    pub batch_trajectories: usize,
    pub lr: f32,
    /// Fraction of episodes held out for model selection.
    pub holdout_fraction: f64,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            epochs: 200,
            batch_trajectories: 12,
            lr: 1e-4,
            holdout_fraction: 0.1,
        }
    }
}

#[derive(Debug, Error)]
pub enum BcError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("non-finite loss at epoch {0}; training aborted")]
    NanLoss(u32),
}

/// Training outcome: the final policy plus the held-out-best checkpoint and
/// both loss curves (index 0 is the pre-training holdout loss).
pub struct BcResult {
    pub final_policy: MlpPolicy,
    pub final_checkpoint: PolicyCheckpoint,
    pub best_checkpoint: PolicyCheckpoint,
    pub best_epoch: u32,
    pub train_losses: Vec<f64>,
    pub holdout_losses: Vec<f64>,
}

fn mse_forward(policy: &MlpPolicy, obs: &[f32], target: &[f32], rows: usize) -> f64 {
    let mean = policy.act_mean(obs, rows);
    let mut acc = 0.0f64;
    for (m, t) in mean.iter().zip(target.iter()) {
        let d = (*m - *t) as f64;
        acc += d * d;
    }
    acc / (rows * ACTION_DIM) as f64
}

/// Minimize mean squared error between the student's action mean and the
/// teacher action over all steps of sampled trajectories. The encoder is
/// frozen by construction: its features are already baked into the stored
/// observations and no gradient path reaches it.
pub fn bc_train(
    dataset: &DistillDataset,
    cfg: &BcConfig,
    seed: u64,
    config_hash: u64,
) -> Result<BcResult, BcError> {
    if dataset.episodes.is_empty() {
        return Err(BcError::EmptyDataset);
    }
    let mut init_stream = rng::stream(seed, Purpose::Init, 0, 0);
    let mut policy = MlpPolicy::new(ObsMode::Student.dim(), ACTION_DIM, &mut init_stream);
    let mut adam = Adam::new(
        &policy.store,
        AdamConfig {
            lr: cfg.lr,
            ..Default::default()
        },
    );

    // Episode split: shuffled once, at least one training episode.
    let n = dataset.episodes.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffle = rng::stream(seed, Purpose::Shuffle, 0, 0);
    for i in (1..n).rev() {
        let j = (rng::uniform(&mut shuffle, 0.0, (i + 1) as f32) as usize).min(i);
        order.swap(i, j);
    }
    let n_holdout = ((n as f64 * cfg.holdout_fraction).round() as usize).min(n - 1);
    let (holdout_idx, train_idx) = order.split_at(n_holdout);

    let eval_holdout = |policy: &MlpPolicy| -> f64 {
        if holdout_idx.is_empty() {
            return f64::NAN;
        }
        let mut acc = 0.0f64;
        let mut steps = 0usize;
        for &i in holdout_idx {
            let ep = &dataset.episodes[i];
            acc += mse_forward(policy, &ep.observations, &ep.actions, ep.steps)
                * (ep.steps * ACTION_DIM) as f64;
            steps += ep.steps * ACTION_DIM;
        }
        acc / steps as f64
    };

    let meta = CheckpointMeta {
        parent_hash: None,
        config_hash,
        seed,
    };
    let mut holdout_losses = vec![eval_holdout(&policy)];
    let mut train_losses = Vec::with_capacity(cfg.epochs as usize);
    let mut best_checkpoint = policy.to_checkpoint(&meta);
    let mut best_loss = holdout_losses[0];
    let mut best_epoch = 0u32;

    for epoch in 1..=cfg.epochs {
        let mut ep_order = train_idx.to_vec();
        for i in (1..ep_order.len()).rev() {
            let j = (rng::uniform(&mut shuffle, 0.0, (i + 1) as f32) as usize).min(i);
            ep_order.swap(i, j);
        }
        let mut epoch_loss = 0.0f64;
        let mut epoch_steps = 0usize;
        for chunk in ep_order.chunks(cfg.batch_trajectories) {
            let rows: usize = chunk.iter().map(|&i| dataset.episodes[i].steps).sum();
            let mut obs = Vec::with_capacity(rows * ObsMode::Student.dim());
            let mut target = Vec::with_capacity(rows * ACTION_DIM);
            for &i in chunk {
                obs.extend_from_slice(&dataset.episodes[i].observations);
                target.extend_from_slice(&dataset.episodes[i].actions);
            }
            let mut tape = Tape::new();
            let x = tape.input(rows, ObsMode::Student.dim(), obs);
            let (mean, _, _) = policy.forward_tape(&mut tape, x);
            let t = tape.input(rows, ACTION_DIM, target);
            let diff = tape.sub(mean, t);
            let sq = tape.mul(diff, diff);
            let loss = tape.mean(sq);
            let loss_v = tape.value(loss)[0];
            if !loss_v.is_finite() {
                return Err(BcError::NanLoss(epoch));
            }
            epoch_loss += loss_v as f64 * (rows * ACTION_DIM) as f64;
            epoch_steps += rows * ACTION_DIM;
            policy.store.zero_grads();
            tape.backward(loss, &mut policy.store);
            adam.step(&mut policy.store);
        }
        train_losses.push(epoch_loss / epoch_steps.max(1) as f64);
        let hl = eval_holdout(&policy);
        holdout_losses.push(hl);
        if hl.is_finite() && (!best_loss.is_finite() || hl < best_loss) {
            best_loss = hl;
            best_epoch = epoch;
            best_checkpoint = policy.to_checkpoint(&meta);
        }
    }

    let final_checkpoint = policy.to_checkpoint(&meta);
    Ok(BcResult {
        final_policy: policy,
        final_checkpoint,
        best_checkpoint,
        best_epoch,
        train_losses,
        holdout_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distill::dataset::{DatasetStats, Episode};
    use crate::env::RewardBranch;
    use crate::scenegen::{TaskFamily, TaskSpec};

    /// Synthetic dataset: observations and actions linked by a fixed linear
    /// map, several short trajectories.
    fn synthetic_dataset(episodes: usize, steps: usize) -> DistillDataset {
        let dim = ObsMode::Student.dim();
        let mut s = rng::stream(5, Purpose::SceneGen, 0, 0);
        let eps: Vec<Episode> = (0..episodes)
            .map(|k| {
                let mut observations = Vec::with_capacity(steps * dim);
                let mut actions = Vec::with_capacity(steps * ACTION_DIM);
                for _ in 0..steps {
                    let mut row = vec![0.0f32; dim];
                    for v in row.iter_mut().take(16) {
                        *v = rng::uniform(&mut s, -1.0, 1.0);
                    }
                    let mut act = vec![0.0f32; ACTION_DIM];
                    for (j, a) in act.iter_mut().enumerate() {
                        *a = 0.4 * row[j % 16] - 0.1 * row[(j + 3) % 16];
                    }
                    observations.extend_from_slice(&row);
                    actions.extend_from_slice(&act);
                }
                Episode {
                    task: TaskSpec::new(TaskFamily::Dense, 4, k as u64),
                    steps,
                    success: true,
                    flagged: false,
                    observations,
                    actions: actions.clone(),
                    applied_actions: actions,
                    breakdowns: vec![
                        crate::env::RewardBreakdown {
                            palm: 0.0,
                            joint: 0.0,
                            fingertip: 0.0,
                            lift: 0.0,
                            goal: 0.0,
                            singulation: 0.0,
                            bonus: 0.0,
                            branch: RewardBranch::Approach,
                            d_palm: 1.0,
                            d_link: 1.0,
                            total: 0.0,
                        };
                        steps
                    ],
                }
            })
            .collect();
        DistillDataset {
            stats: DatasetStats {
                total_episodes: eps.len(),
                counts: vec![],
                flagged: 0,
                total_steps: eps.iter().map(|e| e.steps).sum(),
                seed: 5,
            },
            episodes: eps,
        }
    }

    #[test]
    fn zero_epochs_returns_init() {
        let ds = synthetic_dataset(4, 6);
        let cfg = BcConfig {
            epochs: 0,
            ..Default::default()
        };
        let result = bc_train(&ds, &cfg, 7, 0).unwrap();
        let mut s = rng::stream(7, Purpose::Init, 0, 0);
        let fresh = MlpPolicy::new(ObsMode::Student.dim(), ACTION_DIM, &mut s);
        assert_eq!(
            fresh.store.params_hash(),
            result.final_policy.store.params_hash()
        );
    }

    #[test]
    fn loss_decreases_on_learnable_data() {
        let ds = synthetic_dataset(6, 10);
        let cfg = BcConfig {
            epochs: 40,
            batch_trajectories: 3,
            lr: 1e-3,
            holdout_fraction: 0.2,
        };
        let result = bc_train(&ds, &cfg, 11, 0).unwrap();
        let first = result.train_losses[0];
        let last = *result.train_losses.last().unwrap();
        assert!(
            last < 0.5 * first,
            "train loss should at least halve: {first} -> {last}"
        );
    }

    #[test]
    fn deterministic_loss_curves() {
        let ds = synthetic_dataset(5, 8);
        let cfg = BcConfig {
            epochs: 5,
            batch_trajectories: 2,
            ..Default::default()
        };
        let a = bc_train(&ds, &cfg, 3, 0).unwrap();
        let b = bc_train(&ds, &cfg, 3, 0).unwrap();
        assert_eq!(a.train_losses, b.train_losses);
        assert_eq!(a.holdout_losses, b.holdout_losses);
    }

    #[test]
    fn empty_dataset_rejected() {
        let ds = DistillDataset {
            episodes: vec![],
            stats: DatasetStats {
                total_episodes: 0,
                counts: vec![],
                flagged: 0,
                total_steps: 0,
                seed: 0,
            },
        };
        assert!(matches!(
            bc_train(&ds, &BcConfig::default(), 0, 0),
            Err(BcError::EmptyDataset)
        ));
    }
}
