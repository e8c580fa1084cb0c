//! PPO trainer: vectorized rollout collection, GAE, clipped surrogate
//! updates, and the best-checkpoint training loop.

mod gae;

pub use gae::{compute_gae, compute_gae_f64, gae_oracle};

use crate::env::{Action, Env, EnvConfig, ObsMode, ACTION_DIM};
use crate::nn::{
    gaussian_log_prob_tape, Adam, AdamConfig, CheckpointMeta, MlpPolicy, ParamStore,
    PolicyCheckpoint, Tape,
};
use crate::rng::{self, Purpose, Stream};
use crate::scenegen::{SceneError, TaskSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub lr: f32,
    /// Parallel environments. Desk default 64; the full-scale profile uses 1000.
    pub envs: usize,
    /// Training iterations. Desk default 500; full scale 10000.
    pub iterations: u32,
    /// Rollout horizon per iteration.
    pub horizon: usize,
    pub epochs: u32,
    pub minibatches: usize,
    pub gamma: f32,
    pub gae_lambda: f32,
    pub clip: f32,
    pub value_coef: f32,
    pub entropy_coef: f32,
    /// Global gradient-norm clip applied before each Adam step.
    pub max_grad_norm: f32,
    /// Stop the epoch sweep early once the mean approximate KL of an epoch
    /// exceeds this; 0 disables the stop.
    pub target_kl: f32,
    /// Exploration noise is held for this many steps per env before being
    /// redrawn. The per-step action distribution stays the Gaussian head;
    /// holding only correlates noise across time so that maneuvers persist
    /// long enough to be discovered.
    pub noise_hold_steps: u32,
    /// Evaluate every this many iterations (and at iteration 0).
    pub eval_interval: u32,
    /// Episodes per in-training evaluation.
    pub eval_episodes: u32,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            lr: 3e-4,
            envs: 64,
            iterations: 500,
            horizon: 32,
            epochs: 4,
            minibatches: 4,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: 1.0,
            target_kl: 0.02,
            noise_hold_steps: 8,
            eval_interval: 25,
            eval_episodes: 50,
        }
    }
}

/// Flat [H, E, .] rollout storage.
#[derive(Clone, Debug)]
pub struct RolloutBuffer {
    pub horizon: usize,
    pub envs: usize,
    pub obs_dim: usize,
    pub obs: Vec<f32>,
    pub actions: Vec<f32>,
    pub log_probs: Vec<f32>,
    pub values: Vec<f32>,
    pub rewards: Vec<f32>,
    pub dones: Vec<f32>,
    /// Time-limit style bootstrap added to boundary rewards at update time:
    /// gamma * V(final state) for episodes that ended this step. Both
    /// timeouts and successes truncate rather than terminate; neither final
    /// state is an absorbing zero-value state, so hitting the goal must not
    /// read as a value cliff.
    pub boundary_bootstrap: Vec<f32>,
}

impl RolloutBuffer {
    fn new(horizon: usize, envs: usize, obs_dim: usize) -> Self {
        RolloutBuffer {
            horizon,
            envs,
            obs_dim,
            obs: vec![0.0; horizon * envs * obs_dim],
            actions: vec![0.0; horizon * envs * ACTION_DIM],
            log_probs: vec![0.0; horizon * envs],
            values: vec![0.0; horizon * envs],
            rewards: vec![0.0; horizon * envs],
            dones: vec![0.0; horizon * envs],
            boundary_bootstrap: vec![0.0; horizon * envs],
        }
    }

    /// Rewards with the truncation bootstrap folded in (training view).
    pub fn patched_rewards(&self) -> Vec<f32> {
        self.rewards
            .iter()
            .zip(self.boundary_bootstrap.iter())
            .map(|(r, b)| r + b)
            .collect()
    }

    pub fn steps(&self) -> usize {
        self.horizon * self.envs
    }
}

/// A set of isolated environments stepped in lockstep, with auto-reset.
/// Episode k of env i draws its scene seed from (base_seed, i, k).
pub struct VecEnv {
    pub envs: Vec<Env>,
    pub base_seed: u64,
    episode_index: Vec<u64>,
    /// Running return of the in-flight episode, per env.
    episode_return: Vec<f64>,
    /// Returns of episodes completed during the last `step_batch`.
    pub finished_returns: Vec<f64>,
    pub finished_successes: u64,
    pub finished_episodes: u64,
    /// Diagnostics since the last counter reset.
    pub grasp_branch_steps: u64,
    pub total_steps: u64,
    pub attach_events: u64,
    /// Held exploration noise per env, with its age in steps.
    noise_eps: Vec<[f32; ACTION_DIM]>,
    noise_age: Vec<u32>,
}

impl VecEnv {
    pub fn new(task: TaskSpec, cfg: &EnvConfig, n_envs: usize, base_seed: u64) -> Result<Self, SceneError> {
        let mut envs = Vec::with_capacity(n_envs);
        for i in 0..n_envs {
            let seed = rng::derive_seed(base_seed, Purpose::EpisodeSeed, i as u64, 0);
            envs.push(Env::new(TaskSpec { seed, ..task }, cfg.clone())?);
        }
        Ok(VecEnv {
            envs,
            base_seed,
            episode_index: vec![0; n_envs],
            episode_return: vec![0.0; n_envs],
            finished_returns: Vec::new(),
            finished_successes: 0,
            finished_episodes: 0,
            grasp_branch_steps: 0,
            total_steps: 0,
            attach_events: 0,
            noise_eps: vec![[0.0; ACTION_DIM]; n_envs],
            noise_age: vec![u32::MAX; n_envs],
        })
    }

    pub fn obs_dim(&self) -> usize {
        ObsMode::Teacher.dim()
    }

    /// Teacher observations of every env, row-major [E, obs_dim].
    pub fn observe_batch(&self) -> Vec<f32> {
        let dim = self.obs_dim();
        let mut out = vec![0.0f32; self.envs.len() * dim];
        out.par_chunks_mut(dim)
            .zip(self.envs.par_iter())
            .for_each(|(row, env)| {
                let o = env.observe(ObsMode::Teacher, None);
                row.copy_from_slice(&o.data);
            });
        out
    }

    /// Step every env; returns (rewards, dones, final observations of any
    /// episode that ended this step, captured before the reset). Finished
    /// envs reset to a new episode immediately.
    pub fn step_batch(&mut self, actions: &[Action]) -> (Vec<f32>, Vec<f32>, Vec<Option<Vec<f32>>>) {
        assert_eq!(actions.len(), self.envs.len());
        let results: Vec<(f32, bool, bool, bool, bool, Option<Vec<f32>>)> = self
            .envs
            .par_iter_mut()
            .zip(actions.par_iter())
            .map(|(env, action)| {
                let was_attached = env.world.attached;
                let (_, breakdown, done, info) = env.step(action);
                let grasp_branch = breakdown.branch == crate::env::RewardBranch::Grasp;
                let attached_now = env.world.attached && !was_attached;
                let final_obs = if done {
                    Some(env.observe_final(ObsMode::Teacher, None).data)
                } else {
                    None
                };
                (breakdown.total, done, info.success, grasp_branch, attached_now, final_obs)
            })
            .collect();
        let mut rewards = Vec::with_capacity(results.len());
        let mut dones = Vec::with_capacity(results.len());
        let mut finals = Vec::with_capacity(results.len());
        self.finished_returns.clear();
        for (i, (r, done, success, grasp_branch, attached_now, final_obs)) in
            results.into_iter().enumerate()
        {
            let (r, done, success, grasp_branch, attached_now) =
                (&r, &done, &success, &grasp_branch, &attached_now);
            finals.push(final_obs);
            self.total_steps += 1;
            if *grasp_branch {
                self.grasp_branch_steps += 1;
            }
            if *attached_now {
                self.attach_events += 1;
            }
            rewards.push(*r);
            dones.push(if *done { 1.0 } else { 0.0 });
            self.episode_return[i] += *r as f64;
            if *done {
                self.finished_returns.push(self.episode_return[i]);
                self.episode_return[i] = 0.0;
                self.finished_episodes += 1;
                if *success {
                    self.finished_successes += 1;
                }
                self.episode_index[i] += 1;
                let seed = rng::derive_seed(
                    self.base_seed,
                    Purpose::EpisodeSeed,
                    i as u64,
                    self.episode_index[i],
                );
                self.envs[i]
                    .reset_with_seed(seed)
                    .expect("episode reset failed");
                self.noise_age[i] = u32::MAX; // force a fresh noise draw
            }
        }
        (rewards, dones, finals)
    }
}

/// Sample actions for a whole observation batch; one noise stream per env.
/// Each env's noise vector is redrawn every `hold` steps and otherwise held,
/// so exploration excursions persist across steps.
fn sample_actions(
    policy: &MlpPolicy,
    obs: &[f32],
    streams: &mut [Stream],
    vec_env: &mut VecEnv,
    hold: u32,
) -> (Vec<Action>, Vec<f32>, Vec<f32>) {
    let rows = streams.len();
    let (means, values) = policy.forward(obs, rows);
    let log_std = policy.log_std().to_vec();
    let mut actions = Vec::with_capacity(rows);
    let mut log_probs = Vec::with_capacity(rows);
    for i in 0..rows {
        if vec_env.noise_age[i] >= hold.max(1) {
            for e in vec_env.noise_eps[i].iter_mut() {
                *e = crate::rng::standard_normal(&mut streams[i]);
            }
            vec_env.noise_age[i] = 0;
        }
        vec_env.noise_age[i] += 1;
        let mean_row = &means[i * ACTION_DIM..(i + 1) * ACTION_DIM];
        let mut arr = [0.0f32; ACTION_DIM];
        for d in 0..ACTION_DIM {
            arr[d] = mean_row[d] + log_std[d].exp() * vec_env.noise_eps[i][d];
        }
        let lp = crate::nn::gaussian_log_prob(mean_row, &log_std, &arr);
        actions.push(Action(arr));
        log_probs.push(lp);
    }
    (actions, log_probs, values)
}

/// Collect `horizon` steps from every env under the sampling policy.
pub fn collect_rollout(
    policy: &MlpPolicy,
    vec_env: &mut VecEnv,
    horizon: usize,
    streams: &mut [Stream],
    noise_hold: u32,
    gamma: f32,
) -> RolloutBuffer {
    let envs = vec_env.envs.len();
    let obs_dim = vec_env.obs_dim();
    assert_eq!(streams.len(), envs, "one noise stream per env");
    let mut buf = RolloutBuffer::new(horizon, envs, obs_dim);
    for t in 0..horizon {
        let obs = vec_env.observe_batch();
        let (actions, log_probs, values) = sample_actions(policy, &obs, streams, vec_env, noise_hold);
        let (rewards, dones, finals) = vec_env.step_batch(&actions);

        buf.obs[t * envs * obs_dim..(t + 1) * envs * obs_dim].copy_from_slice(&obs);
        for e in 0..envs {
            let ai = (t * envs + e) * ACTION_DIM;
            buf.actions[ai..ai + ACTION_DIM].copy_from_slice(&actions[e].0);
        }
        buf.log_probs[t * envs..(t + 1) * envs].copy_from_slice(&log_probs);
        buf.values[t * envs..(t + 1) * envs].copy_from_slice(&values);
        buf.rewards[t * envs..(t + 1) * envs].copy_from_slice(&rewards);
        buf.dones[t * envs..(t + 1) * envs].copy_from_slice(&dones);

        // Truncation bootstrap: credit gamma * V(final state) at boundaries.
        let ended: Vec<(usize, &Vec<f32>)> = finals
            .iter()
            .enumerate()
            .filter_map(|(e, o)| o.as_ref().map(|v| (e, v)))
            .collect();
        if !ended.is_empty() {
            let mut batch = Vec::with_capacity(ended.len() * obs_dim);
            for (_, o) in &ended {
                batch.extend_from_slice(o);
            }
            let (_, final_values) = policy.forward(&batch, ended.len());
            for (k, (e, _)) in ended.iter().enumerate() {
                buf.boundary_bootstrap[t * envs + e] = gamma * final_values[k];
            }
        }
    }
    buf
}

/// Scale all gradients so their global L2 norm stays within `max_norm`.
fn clip_grad_norm(store: &mut ParamStore, max_norm: f32) {
    if max_norm <= 0.0 {
        return;
    }
    let mut sq = 0.0f64;
    for id in 0..store.len() {
        if let Some(g) = &store.get(id).grad {
            for v in g {
                sq += (*v as f64) * (*v as f64);
            }
        }
    }
    let norm = sq.sqrt() as f32;
    if norm > max_norm {
        let scale = max_norm / norm;
        for id in 0..store.len() {
            if let Some(g) = &mut store.get_mut(id).grad {
                for v in g.iter_mut() {
                    *v *= scale;
                }
            }
        }
    }
}

/// Per-update statistics.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct PpoStats {
    pub policy_loss: f32,
    pub value_loss: f32,
    pub kl: f32,
    pub clip_frac: f32,
    pub nan_aborted: bool,
}

/// Clipped-surrogate PPO update: `epochs` passes over the buffer split into
/// `minibatches` shuffled slices, one Adam step per slice. Advantages are
/// normalized over the whole buffer (mean 0, std 1). A non-finite loss aborts
/// the update and restores the pre-update parameters.
pub fn ppo_update(
    policy: &mut MlpPolicy,
    buf: &RolloutBuffer,
    advantages: &[f32],
    returns: &[f32],
    cfg: &PpoConfig,
    adam: &mut Adam,
    shuffle: &mut Stream,
) -> PpoStats {
    let n = buf.steps();
    assert_eq!(advantages.len(), n);
    assert_eq!(returns.len(), n);

    // Normalize advantages in f64 so the batch statistics are tight.
    let mean: f64 = advantages.iter().map(|&a| a as f64).sum::<f64>() / n as f64;
    let var: f64 = advantages
        .iter()
        .map(|&a| (a as f64 - mean) * (a as f64 - mean))
        .sum::<f64>()
        / n as f64;
    let std = var.sqrt();
    let norm_adv: Vec<f32> = advantages
        .iter()
        .map(|&a| ((a as f64 - mean) / (std + 1e-8)) as f32)
        .collect();

    let snapshot: Vec<Vec<f32>> = (0..policy.store.len())
        .map(|i| policy.store.get(i).data.clone())
        .collect();

    let mut stats = PpoStats::default();
    let mut batches = 0u32;
    let mb_size = n / cfg.minibatches;

    'epochs: for _epoch in 0..cfg.epochs {
        let mut epoch_kl = 0.0f32;
        let mut epoch_batches = 0u32;
        let mut order: Vec<usize> = (0..n).collect();
        // Fisher-Yates with the caller's stream.
        for i in (1..n).rev() {
            let j = (rng::uniform(shuffle, 0.0, (i + 1) as f32) as usize).min(i);
            order.swap(i, j);
        }
        for mb in 0..cfg.minibatches {
            let idx = &order[mb * mb_size..(mb + 1) * mb_size];
            let m = idx.len();
            let mut mb_obs = vec![0.0f32; m * buf.obs_dim];
            let mut mb_act = vec![0.0f32; m * ACTION_DIM];
            let mut mb_old = vec![0.0f32; m];
            let mut mb_adv = vec![0.0f32; m];
            let mut mb_ret = vec![0.0f32; m];
            for (row, &i) in idx.iter().enumerate() {
                mb_obs[row * buf.obs_dim..(row + 1) * buf.obs_dim]
                    .copy_from_slice(&buf.obs[i * buf.obs_dim..(i + 1) * buf.obs_dim]);
                mb_act[row * ACTION_DIM..(row + 1) * ACTION_DIM]
                    .copy_from_slice(&buf.actions[i * ACTION_DIM..(i + 1) * ACTION_DIM]);
                mb_old[row] = buf.log_probs[i];
                mb_adv[row] = norm_adv[i];
                mb_ret[row] = returns[i];
            }

            let mut tape = Tape::new();
            let obs_node = tape.input(m, buf.obs_dim, mb_obs);
            let (mean_node, ls_node, value_node) = policy.forward_tape(&mut tape, obs_node);
            let act_node = tape.input(m, ACTION_DIM, mb_act);
            let new_lp = gaussian_log_prob_tape(&mut tape, mean_node, ls_node, act_node);
            let old_lp = tape.input(m, 1, mb_old.clone());
            let adv_node = tape.input(m, 1, mb_adv);
            let ret_node = tape.input(m, 1, mb_ret);

            let diff = tape.sub(new_lp, old_lp);
            let ratio = tape.exp(diff);
            let surr1 = tape.mul(ratio, adv_node);
            let clipped = tape.clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
            let surr2 = tape.mul(clipped, adv_node);
            let surr = tape.min_elem(surr1, surr2);
            let mean_surr = tape.mean(surr);
            let policy_loss = tape.scale(mean_surr, -1.0);

            let verr = tape.sub(value_node, ret_node);
            let vsq = tape.mul(verr, verr);
            let value_loss = tape.mean(vsq);

            let v_scaled = tape.scale(value_loss, cfg.value_coef);
            let mut total = tape.add(policy_loss, v_scaled);
            if cfg.entropy_coef != 0.0 {
                // Diagonal Gaussian entropy: sum(log_std) + D/2 (1 + ln 2pi).
                let ls = tape.param(&policy.store, policy.log_std_id());
                let sls = tape.sum_rows(ls);
                let d = ACTION_DIM as f32;
                let ent = tape.add_const(sls, 0.5 * d * (1.0 + std::f32::consts::TAU.ln()));
                let ent_term = tape.scale(ent, -cfg.entropy_coef);
                total = tape.add(total, ent_term);
            }

            let loss_v = tape.value(total)[0];
            if !loss_v.is_finite() {
                for (i, data) in snapshot.into_iter().enumerate() {
                    policy.store.get_mut(i).data = data;
                }
                stats.nan_aborted = true;
                return stats;
            }

            policy.store.zero_grads();
            tape.backward(total, &mut policy.store);
            clip_grad_norm(&mut policy.store, cfg.max_grad_norm);
            adam.step(&mut policy.store);

            // Diagnostics from this minibatch.
            let ratios = tape.value(ratio);
            let clip_hits = ratios
                .iter()
                .filter(|&&r| (r - 1.0).abs() > cfg.clip)
                .count();
            let new_lps = tape.value(new_lp);
            let kl: f32 = mb_old
                .iter()
                .zip(new_lps.iter())
                .map(|(o, n)| o - n)
                .sum::<f32>()
                / m as f32;
            stats.policy_loss += tape.value(policy_loss)[0];
            stats.value_loss += tape.value(value_loss)[0];
            stats.kl += kl;
            stats.clip_frac += clip_hits as f32 / m as f32;
            batches += 1;
            epoch_kl += kl;
            epoch_batches += 1;
        }
        if cfg.target_kl > 0.0 && epoch_kl / epoch_batches.max(1) as f32 > cfg.target_kl {
            break 'epochs;
        }
    }
    if batches > 0 {
        stats.policy_loss /= batches as f32;
        stats.value_loss /= batches as f32;
        stats.kl /= batches as f32;
        stats.clip_frac /= batches as f32;
    }
    stats
}

/// One history record per iteration; the metrics log stores these as JSON lines.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: u32,
    pub mean_reward: f32,
    /// Mean return of episodes that finished during this iteration, if any.
    pub mean_episode_return: Option<f64>,
    pub sr: Option<f64>,
    pub policy_loss: f32,
    pub value_loss: f32,
    pub kl: f32,
    pub clip_frac: f32,
    /// Fraction of rollout steps spent in the grasp reward branch.
    pub grasp_frac: f32,
    /// Attachment events during the rollout window.
    pub attach_events: u64,
    /// Mean of the policy's log standard deviation (exploration level).
    pub mean_log_std: f32,
    /// Episodes finished and episodes finished successfully in this window.
    pub episodes_done: u64,
    pub episodes_succeeded: u64,
}

/// Outcome of one training run.
pub struct TrainResult {
    pub best_checkpoint: PolicyCheckpoint,
    pub best_sr: f64,
    pub best_iter: u32,
    pub init_sr: f64,
    pub final_policy: MlpPolicy,
    pub history: Vec<IterRecord>,
}

/// Training hook: called once per iteration with the fresh record; return
/// false to stop the run early (the best checkpoint so far is returned).
pub type IterHook<'a> = dyn FnMut(&IterRecord) -> bool + 'a;

/// PPO training on one task. Evaluates with deterministic-mean actions every
/// `eval_interval` iterations (plus iteration 0) and returns the checkpoint
/// with the highest success rate, ties broken toward the earliest iteration.
#[allow(clippy::too_many_arguments)]
pub fn train(
    task: TaskSpec,
    init: Option<&PolicyCheckpoint>,
    cfg: &PpoConfig,
    env_cfg: &EnvConfig,
    train_seed: u64,
    config_hash: u64,
    mut hook: Option<&mut IterHook<'_>>,
) -> Result<TrainResult, SceneError> {
    let mut policy = match init {
        Some(ckpt) => MlpPolicy::from_checkpoint(ckpt).expect("init checkpoint loads"),
        None => {
            let mut s = rng::stream(train_seed, Purpose::Init, 0, 0);
            MlpPolicy::new(ObsMode::Teacher.dim(), ACTION_DIM, &mut s)
        }
    };
    let parent_hash = init.map(|c| c.hash());
    let mut adam = Adam::new(
        &policy.store,
        AdamConfig {
            lr: cfg.lr,
            ..Default::default()
        },
    );
    let mut vec_env = VecEnv::new(task, env_cfg, cfg.envs, train_seed)?;
    let mut streams: Vec<Stream> = (0..cfg.envs)
        .map(|i| rng::stream(train_seed, Purpose::ActionNoise, i as u64, 0))
        .collect();
    let mut shuffle = rng::stream(train_seed, Purpose::Shuffle, 0, 0);

    let meta = |parent: Option<u64>| CheckpointMeta {
        parent_hash: parent,
        config_hash,
        seed: train_seed,
    };

    let eval_sr = |policy: &MlpPolicy| -> f64 {
        let report = crate::evalbench::evaluate(
            policy,
            task,
            crate::evalbench::EvalOptions {
                n_envs: 10,
                episodes_per_env: (cfg.eval_episodes as usize).div_ceil(10),
                seed: rng::derive_seed(train_seed, Purpose::EpisodeSeed, u64::MAX, 0),
            },
            env_cfg,
        );
        report.sr
    };

    let init_sr = eval_sr(&policy);
    let mut best_sr = init_sr;
    let mut best_iter = 0u32;
    let mut best_checkpoint = policy.to_checkpoint(&meta(parent_hash));
    let mut history = Vec::with_capacity(cfg.iterations as usize);

    for iter in 1..=cfg.iterations {
        vec_env.grasp_branch_steps = 0;
        vec_env.total_steps = 0;
        vec_env.attach_events = 0;
        let done_before = vec_env.finished_episodes;
        let succ_before = vec_env.finished_successes;
        let buf = collect_rollout(
            &policy,
            &mut vec_env,
            cfg.horizon,
            &mut streams,
            cfg.noise_hold_steps,
            cfg.gamma,
        );
        let final_obs = vec_env.observe_batch();
        let (_, bootstrap) = policy.forward(&final_obs, cfg.envs);
        let train_rewards = buf.patched_rewards();
        let (adv, ret) = compute_gae(
            &train_rewards,
            &buf.values,
            &buf.dones,
            &bootstrap,
            cfg.gamma,
            cfg.gae_lambda,
            cfg.horizon,
            cfg.envs,
        );
        let stats = ppo_update(&mut policy, &buf, &adv, &ret, cfg, &mut adam, &mut shuffle);

        let mean_reward = buf.rewards.iter().sum::<f32>() / buf.steps() as f32;
        let mean_episode_return = if vec_env.finished_returns.is_empty() {
            None
        } else {
            Some(
                vec_env.finished_returns.iter().sum::<f64>()
                    / vec_env.finished_returns.len() as f64,
            )
        };

        let sr = if iter % cfg.eval_interval == 0 || iter == cfg.iterations {
            let sr = eval_sr(&policy);
            if sr > best_sr {
                best_sr = sr;
                best_iter = iter;
                best_checkpoint = policy.to_checkpoint(&meta(parent_hash));
            }
            Some(sr)
        } else {
            None
        };

        let record = IterRecord {
            iter,
            mean_reward,
            mean_episode_return,
            sr,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            kl: stats.kl,
            clip_frac: stats.clip_frac,
            grasp_frac: vec_env.grasp_branch_steps as f32 / vec_env.total_steps.max(1) as f32,
            attach_events: vec_env.attach_events,
            mean_log_std: {
                let ls = policy.log_std();
                ls.iter().sum::<f32>() / ls.len() as f32
            },
            episodes_done: vec_env.finished_episodes - done_before,
            episodes_succeeded: vec_env.finished_successes - succ_before,
        };
        let keep_going = match hook.as_deref_mut() {
            Some(h) => h(&record),
            None => true,
        };
        history.push(record);
        if !keep_going {
            break;
        }
    }

    Ok(TrainResult {
        best_checkpoint,
        best_sr,
        best_iter,
        init_sr,
        final_policy: policy,
        history,
    })
}
