//! The unified piecewise reward and its per-term breakdown.
//!
//! Terms, coefficients, and the branch thresholds follow the reward table:
//! palm `-2.0 d^P`, joint `-d^J` (summed link distance), fingertip
//! `-sum of fingertip minimums`, lift `0.2 + 0.6 a^Pz`, goal
//! `0.9 - 2.5 |goal - target|`, singulation `50 min obstacle distance`,
//! bonus `1 / (1 + 10 |goal - target|)`.
//!
//! The branch condition reads the *minimum* link distance (the contact
//! criterion) while the joint term uses the *summed* link distance; the two
//! quantities are deliberately distinct fields. The singulation distance is
//! capped at the stage-switch separation so scattering obstacles across the
//! table cannot outscore grasping.

use super::Action;
use crate::math::Vec3;
use crate::physics::{fk_hand, PhysicsConfig, WorldState};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardBranch {
    Approach,
    Grasp,
}

/// Reward composition mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RewardMode {
    /// The full piecewise objective.
    Unified,
    /// Singulation term forced to zero (grasp-reward-only baseline).
    GraspOnly,
    /// Approach-branch terms only (multi-stage singulation policy), plus a
    /// one-time bonus when the stage-switch criterion first holds.
    ApproachOnly { singulation_bonus: f32 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub mode: RewardMode,
    pub palm_coef: f32,
    pub lift_base: f32,
    pub lift_coef: f32,
    pub goal_base: f32,
    pub goal_coef: f32,
    pub singulation_coef: f32,
    pub bonus_coef: f32,
    /// Branch threshold on the palm distance d^P, meters.
    pub branch_palm_dist: f32,
    /// Branch threshold on the minimum link distance, meters.
    pub branch_link_dist: f32,
    /// Multi-stage switch: mean target-obstacle separation threshold.
    pub switch_mean_separation: f32,
    /// Separation beyond this no longer increases the singulation term.
    /// Uncapped (or generously capped), scattering obstacles across the
    /// table pays better than grasping at this scale; capping at the
    /// contact-criterion distance keeps the term's create-clearance purpose
    /// while letting the grasp terms dominate once clearance exists.
    pub singulation_dist_cap: f32,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            mode: RewardMode::Unified,
            palm_coef: 2.0,
            lift_base: 0.2,
            lift_coef: 0.6,
            goal_base: 0.9,
            goal_coef: 2.5,
            singulation_coef: 50.0,
            bonus_coef: 10.0,
            branch_palm_dist: 0.06,
            branch_link_dist: 0.2,
            switch_mean_separation: 0.16,
            singulation_dist_cap: 0.06,
        }
    }
}

/// All reward terms plus the branch decision and its input distances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub palm: f32,
    pub joint: f32,
    pub fingertip: f32,
    pub lift: f32,
    pub goal: f32,
    pub singulation: f32,
    pub bonus: f32,
    pub branch: RewardBranch,
    /// d^P: minimum palm-to-target-point distance, meters.
    pub d_palm: f32,
    /// Minimum link-to-target-point distance (branch quantity), meters.
    pub d_link: f32,
    pub total: f32,
}

impl RewardBreakdown {
    /// Branch recomputed from the stored distances; must match `branch`.
    pub fn branch_from_distances(&self, cfg: &RewardConfig) -> RewardBranch {
        if self.d_palm >= cfg.branch_palm_dist || self.d_link >= cfg.branch_link_dist {
            RewardBranch::Approach
        } else {
            RewardBranch::Grasp
        }
    }
}

/// Compute the reward of arriving in `after`, given the applied normalized
/// action and the per-step target surface samples.
#[allow(clippy::too_many_arguments)]
pub fn compute_reward(
    _before: &WorldState,
    action: &Action,
    after: &WorldState,
    goal: Vec3,
    target_points: &[Vec3],
    cfg: &RewardConfig,
    phys: &PhysicsConfig,
) -> RewardBreakdown {
    let geom = phys.hand_geometry();
    let pts = fk_hand(&after.hand, &geom);

    // Per-link minimum distances to the target samples.
    let mut link_min = [f32::INFINITY; 21];
    for (i, link) in pts.links.iter().enumerate() {
        let mut best = f32::INFINITY;
        for p in target_points {
            let d = link.dist(*p);
            if d < best {
                best = d;
            }
        }
        link_min[i] = best;
    }
    let d_palm = link_min[0];
    let joint_sum: f32 = link_min.iter().sum();
    let d_link = link_min.iter().copied().fold(f32::INFINITY, f32::min);

    let mut fingertip_sum = 0.0f32;
    for tip in &pts.fingertips {
        let mut best = f32::INFINITY;
        for p in target_points {
            let d = tip.dist(*p);
            if d < best {
                best = d;
            }
        }
        fingertip_sum += best;
    }

    let target = after.target();
    let goal_dist = target.position().dist(goal);

    let min_obstacle = after
        .obstacles()
        .map(|o| o.position().dist(target.position()))
        .fold(f32::INFINITY, f32::min);
    let singulation_raw = if min_obstacle.is_finite() {
        cfg.singulation_coef * min_obstacle.min(cfg.singulation_dist_cap)
    } else {
        0.0 // single-object scene
    };

    let palm = -cfg.palm_coef * d_palm;
    let joint = -joint_sum;
    let fingertip = -fingertip_sum;
    let lift = cfg.lift_base + cfg.lift_coef * action.palm_z();
    let goal_r = cfg.goal_base - cfg.goal_coef * goal_dist;
    let singulation = match cfg.mode {
        RewardMode::GraspOnly => 0.0,
        _ => singulation_raw,
    };
    let bonus = 1.0 / (1.0 + cfg.bonus_coef * goal_dist);

    let branch = if d_palm >= cfg.branch_palm_dist || d_link >= cfg.branch_link_dist {
        RewardBranch::Approach
    } else {
        RewardBranch::Grasp
    };

    let total = match cfg.mode {
        RewardMode::ApproachOnly { .. } => palm + joint + singulation,
        _ => match branch {
            RewardBranch::Approach => palm + joint + singulation,
            RewardBranch::Grasp => palm + joint + fingertip + lift + goal_r + singulation + bonus,
        },
    };

    RewardBreakdown {
        palm,
        joint,
        fingertip,
        lift,
        goal: goal_r,
        singulation,
        bonus,
        branch,
        d_palm,
        d_link,
        total,
    }
}
