//! The two baselines: grasp-reward-only training and the multi-stage
//! singulation-then-grasp controller.

use super::{Controller, EvalOptions};
use crate::env::{Action, Env, EnvConfig, ObsMode, RewardMode, ACTION_DIM};
use crate::nn::{MlpPolicy, PolicyCheckpoint};
use crate::rl::{train, PpoConfig, TrainResult};
use crate::scenegen::{SceneError, TaskFamily, TaskSpec};

/// Train the grasp-reward-only baseline: single-object scenes with the
/// singulation term forced to zero.
pub fn baseline_grasp_only(
    cfg: &PpoConfig,
    env_cfg: &EnvConfig,
    seed: u64,
    config_hash: u64,
) -> Result<TrainResult, SceneError> {
    let mut env_cfg = env_cfg.clone();
    env_cfg.reward.mode = RewardMode::GraspOnly;
    let task = TaskSpec::new(TaskFamily::SO, 0, seed);
    train(task, None, cfg, &env_cfg, seed, config_hash, None)
}

/// Train the separate singulation policy: approach-branch reward only plus a
/// one-time bonus when the switch criterion first holds.
pub fn train_singulation_policy(
    task: TaskSpec,
    cfg: &PpoConfig,
    env_cfg: &EnvConfig,
    seed: u64,
    config_hash: u64,
    singulation_bonus: f32,
) -> Result<TrainResult, SceneError> {
    let mut env_cfg = env_cfg.clone();
    env_cfg.reward.mode = RewardMode::ApproachOnly { singulation_bonus };
    train(task, None, cfg, &env_cfg, seed, config_hash, None)
}

/// Two-stage controller: run the singulation policy until the mean
/// target-obstacle separation strictly exceeds the threshold, then switch
/// permanently to the grasping policy. Single-object scenes start directly in
/// the grasp stage.
pub struct MultiStagePolicy {
    pub singulation: MlpPolicy,
    pub grasp: MlpPolicy,
    pub threshold: f32,
}

impl MultiStagePolicy {
    pub fn new(singulation: MlpPolicy, grasp: MlpPolicy, threshold: f32) -> Self {
        MultiStagePolicy {
            singulation,
            grasp,
            threshold,
        }
    }

    pub fn from_checkpoints(
        singulation: &PolicyCheckpoint,
        grasp: &PolicyCheckpoint,
        threshold: f32,
    ) -> Result<Self, crate::nn::CheckpointError> {
        Ok(MultiStagePolicy {
            singulation: MlpPolicy::from_checkpoint(singulation)?,
            grasp: MlpPolicy::from_checkpoint(grasp)?,
            threshold,
        })
    }

    pub fn controller(&self) -> MultiStageController<'_> {
        MultiStageController {
            policy: self,
            switched: false,
        }
    }

    pub fn evaluate(
        &self,
        task: TaskSpec,
        opts: EvalOptions,
        env_cfg: &EnvConfig,
    ) -> super::EvalReport {
        super::evaluate_controller(&self.controller(), task, opts, env_cfg)
    }
}

#[derive(Clone)]
pub struct MultiStageController<'a> {
    policy: &'a MultiStagePolicy,
    switched: bool,
}

impl MultiStageController<'_> {
    pub fn switched(&self) -> bool {
        self.switched
    }

    /// Strict inequality: a separation exactly at the threshold stays in the
    /// singulation stage.
    fn update_switch(&mut self, env: &Env) {
        if self.switched {
            return;
        }
        match env.mean_obstacle_separation() {
            None => self.switched = true, // no obstacles: grasp from the start
            Some(sep) => {
                if sep > self.policy.threshold {
                    self.switched = true;
                }
            }
        }
    }
}

impl Controller for MultiStageController<'_> {
    fn reset(&mut self, env: &Env) {
        self.switched = false;
        self.update_switch(env);
    }

    fn act(&mut self, env: &Env) -> Action {
        self.update_switch(env);
        let obs = env.observe(ObsMode::Teacher, None);
        let net = if self.switched {
            &self.policy.grasp
        } else {
            &self.policy.singulation
        };
        let mean = net.act_mean(&obs.data, 1);
        let mut a = [0.0f32; ACTION_DIM];
        a.copy_from_slice(&mean);
        Action(a)
    }
}

/// Assemble the multi-stage baseline from its two trained parts.
pub fn baseline_multistage(
    singulation: MlpPolicy,
    grasp: MlpPolicy,
    threshold: f32,
) -> MultiStagePolicy {
    MultiStagePolicy::new(singulation, grasp, threshold)
}
