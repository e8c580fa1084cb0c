//! Metrics (SR, AS), the two baselines, and benchmark report generation.

mod baselines;
mod report;

pub use baselines::{
    baseline_grasp_only, baseline_multistage, train_singulation_policy, MultiStageController,
    MultiStagePolicy,
};
pub use report::{bench_report, parse_results, BenchReport, PolicyResults};

use crate::distill::FrozenEncoder;
use crate::env::{Action, Env, EnvConfig, ObsMode, ACTION_DIM};
use crate::nn::MlpPolicy;
use crate::rng::{self, Purpose};
use crate::scenegen::TaskSpec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Something that maps environment state to an action, deterministically.
pub trait Controller: Clone + Send + Sync {
    /// Called once at episode start.
    fn reset(&mut self, env: &Env);
    fn act(&mut self, env: &Env) -> Action;
}

/// State-based policy driven by the teacher observation's action mean.
#[derive(Clone)]
pub struct TeacherController<'a> {
    pub policy: &'a MlpPolicy,
}

impl Controller for TeacherController<'_> {
    fn reset(&mut self, _env: &Env) {}
    fn act(&mut self, env: &Env) -> Action {
        let obs = env.observe(ObsMode::Teacher, None);
        let mean = self.policy.act_mean(&obs.data, 1);
        let mut a = [0.0f32; ACTION_DIM];
        a.copy_from_slice(&mean);
        Action(a)
    }
}

/// Vision-based policy over the student observation.
#[derive(Clone)]
pub struct StudentController<'a> {
    pub policy: &'a MlpPolicy,
    pub encoder: &'a FrozenEncoder,
}

impl Controller for StudentController<'_> {
    fn reset(&mut self, _env: &Env) {}
    fn act(&mut self, env: &Env) -> Action {
        let obs = env.observe(ObsMode::Student, Some(self.encoder));
        let mean = self.policy.act_mean(&obs.data, 1);
        let mut a = [0.0f32; ACTION_DIM];
        a.copy_from_slice(&mean);
        Action(a)
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EvalOptions {
    pub n_envs: usize,
    pub episodes_per_env: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            n_envs: 10,
            episodes_per_env: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub success: bool,
    pub steps: u32,
    pub total_reward: f64,
}

/// Per-task evaluation summary plus the per-episode records it was computed
/// from. SR is successes/episodes exactly; AS averages steps over successes
/// only and is absent when nothing succeeded.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EvalReport {
    pub task: String,
    pub episodes: usize,
    pub successes: usize,
    pub sr: f64,
    pub avg_steps: Option<f64>,
    pub mean_episode_reward: f64,
    pub records: Vec<EpisodeRecord>,
}

impl EvalReport {
    /// Recompute SR and AS from the records (the metrics contract).
    pub fn recompute(&self) -> (f64, Option<f64>) {
        let succ: Vec<&EpisodeRecord> = self.records.iter().filter(|r| r.success).collect();
        let sr = succ.len() as f64 / self.records.len() as f64;
        let avg = if succ.is_empty() {
            None
        } else {
            Some(succ.iter().map(|r| r.steps as f64).sum::<f64>() / succ.len() as f64)
        };
        (sr, avg)
    }
}

/// Run one episode under a controller; returns its record.
fn run_episode<C: Controller>(
    controller: &mut C,
    task: TaskSpec,
    env_cfg: &EnvConfig,
) -> EpisodeRecord {
    let mut env = Env::new(task, env_cfg.clone()).expect("scene generation");
    controller.reset(&env);
    let mut total_reward = 0.0f64;
    while !env.done {
        let action = controller.act(&env);
        let (_, breakdown, _, _) = env.step(&action);
        total_reward += breakdown.total as f64;
    }
    EpisodeRecord {
        seed: task.seed,
        success: env.success,
        steps: env.t,
        total_reward,
    }
}

/// Evaluate a controller over `n_envs x episodes_per_env` deterministic
/// episodes. Episodes run in parallel; records come back in (env, episode)
/// order regardless of scheduling.
pub fn evaluate_controller<C: Controller>(
    controller: &C,
    task: TaskSpec,
    opts: EvalOptions,
    env_cfg: &EnvConfig,
) -> EvalReport {
    let mut slots: Vec<(usize, usize)> = Vec::new();
    for e in 0..opts.n_envs {
        for k in 0..opts.episodes_per_env {
            slots.push((e, k));
        }
    }
    let records: Vec<EpisodeRecord> = slots
        .par_iter()
        .map(|&(e, k)| {
            let seed = rng::derive_seed(opts.seed, Purpose::EpisodeSeed, e as u64, k as u64);
            let mut c = controller.clone();
            run_episode(&mut c, TaskSpec { seed, ..task }, env_cfg)
        })
        .collect();
    let successes = records.iter().filter(|r| r.success).count();
    let sr = successes as f64 / records.len() as f64;
    let avg_steps = if successes == 0 {
        None
    } else {
        Some(
            records
                .iter()
                .filter(|r| r.success)
                .map(|r| r.steps as f64)
                .sum::<f64>()
                / successes as f64,
        )
    };
    let mean_episode_reward =
        records.iter().map(|r| r.total_reward).sum::<f64>() / records.len() as f64;
    EvalReport {
        task: task.name(),
        episodes: records.len(),
        successes,
        sr,
        avg_steps,
        mean_episode_reward,
        records,
    }
}

/// Evaluate a state-based policy with deterministic mean actions.
pub fn evaluate(
    policy: &MlpPolicy,
    task: TaskSpec,
    opts: EvalOptions,
    env_cfg: &EnvConfig,
) -> EvalReport {
    evaluate_controller(&TeacherController { policy }, task, opts, env_cfg)
}
