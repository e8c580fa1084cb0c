//! The RL environment: action handling, the unified piecewise reward,
//! observation assembly, and episode lifecycle.

mod observation;
mod reward;

pub use observation::{
    build_observation, student_layout, teacher_layout, ObsMode, Observation, STUDENT_DIM,
    TEACHER_DIM,
};
pub use reward::{compute_reward, RewardBranch, RewardBreakdown, RewardConfig, RewardMode};

use crate::distill::FrozenEncoder;
use crate::math::Vec3;
use crate::physics::{sample_target_surface, step_world, PhysicsConfig, WorldState};
use crate::rng::{self, Purpose};
use crate::scenegen::{self, TaskSpec};
use serde::{Deserialize, Serialize};

pub const ACTION_DIM: usize = 22;

/// Normalized policy action: 6 palm pose deltas plus 16 finger joint targets,
/// each in [-1, 1] before scaling to the physical clamps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action(pub [f32; ACTION_DIM]);

impl Action {
    pub const ZERO: Action = Action([0.0; ACTION_DIM]);

    #[inline]
    pub fn clamped(&self) -> Action {
        let mut out = *self;
        for v in out.0.iter_mut() {
            *v = v.clamp(-1.0, 1.0);
        }
        out
    }

    /// Component 2: the +z palm translation driving the lifting reward.
    #[inline]
    pub fn palm_z(&self) -> f32 {
        self.0[2]
    }

    #[inline]
    pub fn fingers(&self) -> &[f32] {
        &self.0[6..22]
    }
}

/// Linear smoothing of the finger targets; the palm delta passes through.
pub fn smooth_action(raw: &Action, prev: &Action, lambda: f32) -> Action {
    assert!(lambda > 0.0 && lambda <= 1.0, "lambda must be in (0, 1]");
    let mut out = *raw;
    for i in 6..ACTION_DIM {
        out.0[i] = lambda * raw.0[i] + (1.0 - lambda) * prev.0[i];
    }
    out
}

/// Everything the environment needs beyond the physics constants.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub physics: PhysicsConfig,
    pub reward: RewardConfig,
    /// Episode length T_max.
    pub horizon: u32,
    /// Finger smoothing factor.
    pub finger_smoothing: f32,
    /// Target surface samples p for hand-object distances and reward terms.
    pub target_surface_samples: usize,
    /// Scene point-cloud budget for the student observation.
    pub cloud_points: usize,
    /// Success distance to goal, meters (strict inequality).
    pub success_dist: f32,
    /// Goal height above the table for every episode.
    pub goal_height: f32,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            physics: PhysicsConfig::default(),
            reward: RewardConfig::default(),
            horizon: 300,
            finger_smoothing: 0.5,
            target_surface_samples: 64,
            cloud_points: 1024,
            success_dist: 0.05,
            goal_height: scenegen::GOAL_HEIGHT,
        }
    }
}

/// True iff the target sits strictly within `success_dist` of the goal.
pub fn is_success(world: &WorldState, goal: Vec3, success_dist: f32) -> bool {
    world.target().position().dist(goal) < success_dist
}

/// Per-step metadata surfaced alongside the reward.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct StepInfo {
    pub success: bool,
    pub step: u32,
}

/// One environment instance; single-owner, stepped by value-internal state.
#[derive(Clone, Debug)]
pub struct Env {
    pub cfg: EnvConfig,
    pub task: TaskSpec,
    pub world: WorldState,
    pub goal: Vec3,
    pub prev_action: Action,
    pub t: u32,
    pub done: bool,
    pub success: bool,
    /// Fired flag for the multi-stage singulation bonus (ApproachOnly mode).
    singulation_bonus_fired: bool,
}

impl Env {
    /// Generate the scene for `task` and reset the episode state.
    pub fn new(task: TaskSpec, cfg: EnvConfig) -> Result<Self, scenegen::SceneError> {
        let world = scenegen::generate_with_retries(&task, &cfg.physics, 8)?;
        let mut goal = scenegen::goal_for(&world);
        goal.z = cfg.goal_height;
        Ok(Env {
            cfg,
            task,
            world,
            goal,
            prev_action: Action::ZERO,
            t: 0,
            done: false,
            success: false,
            singulation_bonus_fired: false,
        })
    }

    /// Fresh episode of the same task with a different sub-seed.
    pub fn reset_with_seed(&mut self, seed: u64) -> Result<(), scenegen::SceneError> {
        let task = TaskSpec { seed, ..self.task };
        let world = scenegen::generate_with_retries(&task, &self.cfg.physics, 8)?;
        let mut goal = scenegen::goal_for(&world);
        goal.z = self.cfg.goal_height;
        self.task = task;
        self.world = world;
        self.goal = goal;
        self.prev_action = Action::ZERO;
        self.t = 0;
        self.done = false;
        self.success = false;
        self.singulation_bonus_fired = false;
        Ok(())
    }

    /// Target surface samples for the current world step (seeded by episode
    /// seed and step index, so replays regenerate the same set).
    pub fn target_points(&self) -> Vec<Vec3> {
        let mut stream = rng::stream(
            self.world.seed,
            Purpose::TargetSurface,
            self.world.step as u64,
            0,
        );
        sample_target_surface(
            &self.world,
            &self.cfg.physics,
            self.cfg.target_surface_samples,
            &mut stream,
        )
    }

    /// Scene point cloud for the current world step.
    pub fn scene_cloud(&self) -> Vec<Vec3> {
        let mut stream = rng::stream(
            self.world.seed,
            Purpose::SceneCloud,
            self.world.step as u64,
            0,
        );
        crate::physics::sample_pointcloud(
            &self.world,
            &self.cfg.physics,
            self.cfg.cloud_points,
            &mut stream,
        )
    }

    /// Observation of the current state.
    pub fn observe(&self, mode: ObsMode, encoder: Option<&FrozenEncoder>) -> Observation {
        let points = self.target_points();
        build_observation(
            &self.world,
            &self.prev_action,
            self.t,
            self.cfg.horizon,
            mode,
            encoder,
            &points,
            &self.cfg,
        )
    }

    /// Observation of a finished episode's final state (the step index is
    /// clamped into range for the time encoding). Used by trainers that
    /// bootstrap the value of truncated episodes.
    pub fn observe_final(&self, mode: ObsMode, encoder: Option<&FrozenEncoder>) -> Observation {
        let points = self.target_points();
        build_observation(
            &self.world,
            &self.prev_action,
            self.t.min(self.cfg.horizon - 1),
            self.cfg.horizon,
            mode,
            encoder,
            &points,
            &self.cfg,
        )
    }

    /// Mean separation between the target and its obstacles; `None` for SO
    /// scenes. Drives the multi-stage baseline's switch criterion.
    pub fn mean_obstacle_separation(&self) -> Option<f32> {
        let t = self.world.target().position();
        let n = self.world.n_obstacles();
        if n == 0 {
            return None;
        }
        let sum: f32 = self
            .world
            .obstacles()
            .map(|o| o.position().dist(t))
            .sum();
        Some(sum / n as f32)
    }

    /// Advance one control step: smooth, clamp, scale, simulate, reward.
    ///
    /// Returns the applied (smoothed) action inside the breakdown path so
    /// trajectory logs can replay exactly. Stepping a finished episode is a
    /// contract violation.
    pub fn step(&mut self, raw: &Action) -> (Action, RewardBreakdown, bool, StepInfo) {
        assert!(!self.done, "env_step called on a finished episode");
        let raw = raw.clamped();
        let applied = smooth_action(&raw, &self.prev_action, self.cfg.finger_smoothing);

        let phys = &self.cfg.physics;
        let palm_delta = [
            applied.0[0] * phys.max_palm_trans,
            applied.0[1] * phys.max_palm_trans,
            applied.0[2] * phys.max_palm_trans,
            applied.0[3] * phys.max_palm_rot,
            applied.0[4] * phys.max_palm_rot,
            applied.0[5] * phys.max_palm_rot,
        ];
        let mut joint_targets = [0.0f32; 16];
        for (i, t) in joint_targets.iter_mut().enumerate() {
            let a = applied.0[6 + i];
            *t = phys.joint_lo + (a + 1.0) * 0.5 * (phys.joint_hi - phys.joint_lo);
        }

        let before = self.world.clone();
        self.world = step_world(&before, &palm_delta, &joint_targets, phys);

        let points = self.target_points();
        let mut breakdown = compute_reward(
            &before,
            &applied,
            &self.world,
            self.goal,
            &points,
            &self.cfg.reward,
            &self.cfg.physics,
        );
        if let RewardMode::ApproachOnly { singulation_bonus } = self.cfg.reward.mode {
            if !self.singulation_bonus_fired {
                if let Some(sep) = self.mean_obstacle_separation() {
                    if sep > self.cfg.reward.switch_mean_separation {
                        self.singulation_bonus_fired = true;
                        breakdown.total += singulation_bonus;
                    }
                }
            }
        }

        self.t += 1;
        self.prev_action = applied;
        self.success = is_success(&self.world, self.goal, self.cfg.success_dist);
        self.done = self.success || self.t >= self.cfg.horizon;
        let info = StepInfo {
            success: self.success,
            step: self.t,
        };
        (applied, breakdown, self.done, info)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenegen::TaskFamily;

    #[test]
    fn smoothing_degenerate_lambda_one() {
        let raw = Action([0.7; 22]);
        let prev = Action([-0.3; 22]);
        let out = smooth_action(&raw, &prev, 1.0);
        assert_eq!(out.fingers(), raw.fingers());
    }

    #[test]
    fn smoothing_midpoint() {
        let mut raw = Action::ZERO;
        let prev = Action::ZERO;
        for i in 6..22 {
            raw.0[i] = 1.0;
        }
        let out = smooth_action(&raw, &prev, 0.5);
        for &v in out.fingers() {
            assert_eq!(v, 0.5);
        }
        // Palm passes through untouched.
        assert_eq!(&out.0[0..6], &raw.0[0..6]);
    }

    #[test]
    fn smoothing_geometric_convergence() {
        let lambda = 0.5f32;
        let c = 0.8f32;
        let mut raw = Action::ZERO;
        for i in 6..22 {
            raw.0[i] = c;
        }
        let mut prev = Action::ZERO;
        for k in 1..=12 {
            prev = smooth_action(&raw, &prev, lambda);
            let expect_err = (1.0 - lambda).powi(k) * c;
            let err = (c - prev.0[6]).abs();
            assert!(
                (err - expect_err).abs() < 1e-5,
                "step {k}: err {err} vs closed form {expect_err}"
            );
        }
    }

    #[test]
    fn success_boundary_strict() {
        let cfg = EnvConfig::default();
        let env = Env::new(TaskSpec::new(TaskFamily::SO, 0, 5), cfg).unwrap();
        let t = env.world.target().position();
        assert!(is_success(
            &env.world,
            Vec3::new(t.x, t.y, t.z + 0.049),
            0.05
        ));
        assert!(!is_success(
            &env.world,
            Vec3::new(t.x, t.y, t.z + 0.05),
            0.05
        ));
        assert!(is_success(&env.world, t, 0.05));
    }

    #[test]
    fn episode_times_out_at_horizon() {
        let mut cfg = EnvConfig::default();
        cfg.horizon = 5;
        let mut env = Env::new(TaskSpec::new(TaskFamily::SO, 0, 6), cfg).unwrap();
        let mut steps = 0;
        while !env.done {
            let (_, _, done, info) = env.step(&Action::ZERO);
            steps += 1;
            if done {
                assert!(!info.success);
            }
        }
        assert_eq!(steps, 5);
    }

    #[test]
    #[should_panic(expected = "finished episode")]
    fn stepping_done_episode_panics() {
        let mut cfg = EnvConfig::default();
        cfg.horizon = 1;
        let mut env = Env::new(TaskSpec::new(TaskFamily::SO, 0, 7), cfg).unwrap();
        env.step(&Action::ZERO);
        env.step(&Action::ZERO);
    }

    #[test]
    fn deterministic_episode_replay() {
        let cfg = EnvConfig::default();
        let task = TaskSpec::new(TaskFamily::Dense, 4, 12);
        let mut a = Env::new(task, cfg.clone()).unwrap();
        let mut b = Env::new(task, cfg).unwrap();
        let mut action = Action::ZERO;
        for k in 0..40 {
            action.0[0] = ((k as f32) * 0.37).sin();
            action.0[6] = ((k as f32) * 0.53).cos();
            let (_, ra, da, _) = a.step(&action);
            let (_, rb, db, _) = b.step(&action);
            assert_eq!(ra.total.to_bits(), rb.total.to_bits(), "step {k}");
            assert_eq!(da, db);
            if da {
                break;
            }
        }
        for (x, y) in a.world.blocks.iter().zip(b.world.blocks.iter()) {
            assert_eq!(x.x.to_bits(), y.x.to_bits());
            assert_eq!(x.yaw.to_bits(), y.yaw.to_bits());
        }
    }
}
