//! Observation assembly with fixed, documented segment layouts.
//!
//! Teacher vector (168): proprioception 72, previous action 22, object state
//! 16, hand-object distances 21, time encoding 29, singulation distances 8.
//! Student vector (275): singulation distances dropped, object state replaced
//! by the scene-cloud centroid (3), plus 128 frozen visual features.

use super::{Action, EnvConfig};
use crate::distill::FrozenEncoder;
use crate::math::Vec3;
use crate::physics::{fk_hand, WorldState};
use serde::{Deserialize, Serialize};

pub const TEACHER_DIM: usize = 168;
pub const STUDENT_DIM: usize = 275;

/// Teacher segment offsets. Proprioception packs palm pose then 22-joint
/// blocks (16 finger joints followed by 6 wrist dummy joints) for positions,
/// velocities, and forces; wrist dummy force slots are zero (the quasi-static
/// world has no wrist force sensor).
pub mod teacher_layout {
    pub const PALM_POSE: usize = 0;
    pub const JOINT_POS: usize = 6;
    pub const JOINT_VEL: usize = 28;
    pub const JOINT_FORCE: usize = 50;
    pub const PREV_ACTION: usize = 72;
    pub const OBJECT_STATE: usize = 94;
    pub const HAND_OBJECT: usize = 110;
    pub const TIME: usize = 131;
    pub const SINGULATION: usize = 160;
    pub const LEN: usize = 168;
}

/// Student segment offsets.
pub mod student_layout {
    pub const PALM_POSE: usize = 0;
    pub const JOINT_POS: usize = 6;
    pub const JOINT_VEL: usize = 28;
    pub const JOINT_FORCE: usize = 50;
    pub const PREV_ACTION: usize = 72;
    pub const CLOUD_CENTER: usize = 94;
    pub const HAND_OBJECT: usize = 97;
    pub const TIME: usize = 118;
    pub const VISUAL: usize = 147;
    pub const LEN: usize = 275;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObsMode {
    Teacher,
    Student,
}

impl ObsMode {
    pub fn dim(self) -> usize {
        match self {
            ObsMode::Teacher => TEACHER_DIM,
            ObsMode::Student => STUDENT_DIM,
        }
    }
}

/// A finished observation vector plus its mode tag.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Observation {
    pub mode: ObsMode,
    pub data: Vec<f32>,
}

/// Shared proprioception + previous action prefix (0..94), identical in both
/// layouts.
fn write_prefix(out: &mut [f32], world: &WorldState, prev_action: &Action) {
    let hand = &world.hand;
    out[0..6].copy_from_slice(&hand.palm_pose);
    // Positions: 16 finger joints, then the 6 wrist dummy joint positions,
    // which are the palm pose coordinates themselves.
    out[6..22].copy_from_slice(&hand.joints);
    out[22..28].copy_from_slice(&hand.palm_pose);
    // Velocities: finger joint rates then the wrist pose-rate proxy.
    out[28..44].copy_from_slice(&hand.joint_velocities);
    out[44..50].copy_from_slice(&hand.wrist_dummy);
    // Forces: finger contact impulses; wrist slots stay zero.
    out[50..66].copy_from_slice(&hand.joint_forces);
    out[66..72].fill(0.0);
    out[72..94].copy_from_slice(&prev_action.0);
}

/// Sine-cosine time encoding: t/T then sin/cos(2 pi k t/T) for k = 1..=14.
fn write_time(out: &mut [f32], t: u32, t_max: u32) {
    let phase = t as f32 / t_max as f32;
    out[0] = phase;
    for k in 1..=14usize {
        let arg = std::f32::consts::TAU * k as f32 * phase;
        out[2 * k - 1] = arg.sin();
        out[2 * k] = arg.cos();
    }
}

/// Minimum distance from each of the 21 link points to the target samples.
fn write_hand_object(out: &mut [f32], world: &WorldState, cfg: &EnvConfig, points: &[Vec3]) {
    let geom = cfg.physics.hand_geometry();
    let pts = fk_hand(&world.hand, &geom);
    for (i, link) in pts.links.iter().enumerate() {
        let mut best = f32::INFINITY;
        for p in points {
            let d = link.dist(*p);
            if d < best {
                best = d;
            }
        }
        out[i] = best;
    }
}

/// Assemble the observation of `world` at episode step `t`.
///
/// `target_points` are this step's target surface samples (shared with the
/// reward). Student mode needs the frozen encoder; its scene cloud is
/// re-derived from the world's seed and step so replays agree bitwise.
#[allow(clippy::too_many_arguments)]
pub fn build_observation(
    world: &WorldState,
    prev_action: &Action,
    t: u32,
    t_max: u32,
    mode: ObsMode,
    encoder: Option<&FrozenEncoder>,
    target_points: &[Vec3],
    cfg: &EnvConfig,
) -> Observation {
    assert!(t < t_max, "observation requested past the horizon");
    let mut data = vec![0.0f32; mode.dim()];
    write_prefix(&mut data[0..94], world, prev_action);

    match mode {
        ObsMode::Teacher => {
            use teacher_layout as l;
            let target = world.target();
            let palm = world.hand.palm_point();
            let o = &mut data[l::OBJECT_STATE..l::OBJECT_STATE + 16];
            let p = target.position();
            o[0] = p.x;
            o[1] = p.y;
            o[2] = p.z;
            // Yaw-only quaternion, (x, y, z, w).
            let half = target.yaw * 0.5;
            o[3] = 0.0;
            o[4] = 0.0;
            o[5] = half.sin();
            o[6] = half.cos();
            o[7] = target.lin_vel.x;
            o[8] = target.lin_vel.y;
            o[9] = target.lin_vel.z;
            o[10] = 0.0;
            o[11] = 0.0;
            o[12] = target.yaw_rate;
            o[13] = p.x - palm.x;
            o[14] = p.y - palm.y;
            o[15] = p.z - palm.z;

            write_hand_object(
                &mut data[l::HAND_OBJECT..l::HAND_OBJECT + 21],
                world,
                cfg,
                target_points,
            );
            write_time(&mut data[l::TIME..l::TIME + 29], t, t_max);

            // Singulation distances, in obstacle id order, zero padded.
            let tp = world.target().position();
            let mut idx = 0;
            for o in world.obstacles() {
                if idx >= 8 {
                    break;
                }
                data[l::SINGULATION + idx] = o.position().dist(tp);
                idx += 1;
            }
        }
        ObsMode::Student => {
            use student_layout as l;
            let encoder = encoder.expect("student mode requires an encoder handle");
            let mut stream = crate::rng::stream(
                world.seed,
                crate::rng::Purpose::SceneCloud,
                world.step as u64,
                0,
            );
            let cloud = crate::physics::sample_pointcloud(
                world,
                &cfg.physics,
                cfg.cloud_points,
                &mut stream,
            );
            let inv = 1.0 / cloud.len() as f32;
            let mut c = Vec3::ZERO;
            for p in &cloud {
                c = c.add(*p);
            }
            data[l::CLOUD_CENTER] = c.x * inv;
            data[l::CLOUD_CENTER + 1] = c.y * inv;
            data[l::CLOUD_CENTER + 2] = c.z * inv;

            write_hand_object(
                &mut data[l::HAND_OBJECT..l::HAND_OBJECT + 21],
                world,
                cfg,
                target_points,
            );
            write_time(&mut data[l::TIME..l::TIME + 29], t, t_max);

            let features = encoder.encode(&cloud);
            assert_eq!(
                features.len(),
                128,
                "schema error: encoder output width {} != 128",
                features.len()
            );
            data[l::VISUAL..l::VISUAL + 128].copy_from_slice(&features);
        }
    }

    Observation { mode, data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distill::FrozenEncoder;
    use crate::scenegen::{self, TaskFamily, TaskSpec};

    fn obs_for(task: TaskSpec, mode: ObsMode) -> Observation {
        let cfg = EnvConfig::default();
        let world = scenegen::generate(&task, &cfg.physics).unwrap();
        let mut stream = crate::rng::stream(task.seed, crate::rng::Purpose::TargetSurface, 0, 0);
        let points = crate::physics::sample_target_surface(&world, &cfg.physics, 64, &mut stream);
        let encoder = FrozenEncoder::new(crate::distill::ENCODER_SEED);
        build_observation(
            &world,
            &Action::ZERO,
            0,
            cfg.horizon,
            mode,
            Some(&encoder),
            &points,
            &cfg,
        )
    }

    #[test]
    fn teacher_len_exact() {
        let o = obs_for(TaskSpec::new(TaskFamily::Dense, 8, 1), ObsMode::Teacher);
        assert_eq!(o.data.len(), 168);
    }

    #[test]
    fn student_len_exact() {
        let o = obs_for(TaskSpec::new(TaskFamily::Random, 4, 2), ObsMode::Student);
        assert_eq!(o.data.len(), 275);
    }

    #[test]
    fn time_segment_at_zero() {
        let o = obs_for(TaskSpec::new(TaskFamily::SO, 0, 3), ObsMode::Teacher);
        let t = &o.data[teacher_layout::TIME..teacher_layout::TIME + 29];
        assert_eq!(t[0], 0.0);
        for k in 1..=14 {
            assert_eq!(t[2 * k - 1], 0.0, "sin at k={k}");
            assert_eq!(t[2 * k], 1.0, "cos at k={k}");
        }
    }

    #[test]
    fn singulation_padding_zero() {
        let o = obs_for(TaskSpec::new(TaskFamily::SO, 0, 4), ObsMode::Teacher);
        for i in 0..8 {
            assert_eq!(o.data[teacher_layout::SINGULATION + i], 0.0);
        }
        let o = obs_for(TaskSpec::new(TaskFamily::Dense, 5, 4), ObsMode::Teacher);
        for i in 0..5 {
            assert!(o.data[teacher_layout::SINGULATION + i] > 0.0);
        }
        for i in 5..8 {
            assert_eq!(o.data[teacher_layout::SINGULATION + i], 0.0);
        }
    }

    #[test]
    fn quaternion_unit_norm() {
        for seed in 0..10 {
            let o = obs_for(TaskSpec::new(TaskFamily::Random, 6, seed), ObsMode::Teacher);
            let q = &o.data[teacher_layout::OBJECT_STATE + 3..teacher_layout::OBJECT_STATE + 7];
            let n: f32 = q.iter().map(|v| v * v).sum::<f32>().sqrt();
            assert!((n - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn wrist_force_slots_zero() {
        let o = obs_for(TaskSpec::new(TaskFamily::Dense, 8, 5), ObsMode::Teacher);
        for i in 66..72 {
            assert_eq!(o.data[i], 0.0);
        }
    }
}
