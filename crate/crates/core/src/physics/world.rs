//! World stepping, grasp predicate, and attachment kinematics.

use super::geometry::{block_distance_to_point, circle_block_contact};
use super::{fk_hand, resolve_contacts, AttachOffset, HandGeometry, PhysicsConfig, WorldState};
use crate::math::{wrap_angle, Vec2};

/// Advance the world by one control step.
///
/// `palm_delta` is the physical palm pose delta (already scaled from the
/// normalized action); roll/pitch components are ignored. `joint_targets` are
/// absolute joint positions the fingers move toward under the per-step rate
/// clamp. The hand is kinematic: its post-step pose is the commanded clamped
/// pose regardless of contacts.
pub fn step_world(
    state: &WorldState,
    palm_delta: &[f32; 6],
    joint_targets: &[f32; 16],
    cfg: &PhysicsConfig,
) -> WorldState {
    assert!(
        palm_delta.iter().all(|v| v.is_finite()) && joint_targets.iter().all(|v| v.is_finite()),
        "step_world: non-finite input"
    );
    let geom = cfg.hand_geometry();
    let mut next = state.clone();

    // Palm: clamp the delta, apply, then clamp the pose to the workspace.
    let m = cfg.max_palm_trans;
    let old_pose = state.hand.palm_pose;
    let mut pose = old_pose;
    pose[0] = (pose[0] + palm_delta[0].clamp(-m, m)).clamp(-cfg.workspace_half, cfg.workspace_half);
    pose[1] = (pose[1] + palm_delta[1].clamp(-m, m)).clamp(-cfg.workspace_half, cfg.workspace_half);
    pose[2] = (pose[2] + palm_delta[2].clamp(-m, m)).clamp(cfg.palm_z_min, cfg.palm_z_max);
    pose[3] = 0.0;
    pose[4] = 0.0;
    pose[5] = wrap_angle(pose[5] + palm_delta[5].clamp(-cfg.max_palm_rot, cfg.max_palm_rot));
    next.hand.palm_pose = pose;

    // Fingers: rate-limited move toward clamped targets.
    for i in 0..16 {
        let target = joint_targets[i].clamp(cfg.joint_lo, cfg.joint_hi);
        let delta = (target - state.hand.joints[i]).clamp(-cfg.max_joint_step, cfg.max_joint_step);
        next.hand.joints[i] = state.hand.joints[i] + delta;
        next.hand.joint_velocities[i] = delta / cfg.dt;
    }
    for i in 0..3 {
        next.hand.wrist_dummy[i] = (pose[i] - old_pose[i]) / cfg.dt;
        next.hand.wrist_dummy[3 + i] = (pose[3 + i] - old_pose[3 + i]) / cfg.dt;
    }
    next.hand.wrist_dummy[5] = wrap_angle(pose[5] - old_pose[5]) / cfg.dt;

    // Attached target is carried kinematically, in the palm frame.
    if next.attached {
        let off = next.attach_offset.expect("attached implies captured offset");
        let palm_xy = next.hand.palm_xy();
        let yaw = next.hand.yaw();
        let world_xy = palm_xy.add(off.local_xy.rotate(yaw));
        let t = next.target_mut();
        t.x = world_xy.x;
        t.y = world_xy.y;
        t.yaw = wrap_angle(yaw + off.dyaw);
        t.z = (pose[2] + off.dz).max(0.0);
    }

    let impulses = resolve_contacts(&mut next, &geom, cfg);
    next.hand.joint_forces = impulses.joint;

    // Finite-difference block velocities.
    for (b, prev) in next.blocks.iter_mut().zip(state.blocks.iter()) {
        b.lin_vel = b.position().sub(prev.position()).scale(1.0 / cfg.dt);
        b.yaw_rate = wrap_angle(b.yaw - prev.yaw) / cfg.dt;
    }

    update_attachment(&mut next, &geom, cfg);
    next.step += 1;
    next
}

/// Fingertip contacts against the target block: (finger index, outward normal).
///
/// A fingertip counts as contacting when its disk sits within `contact_tol`
/// of the target surface and the hand plane is vertically engaged. Normals
/// point from the block surface toward the fingertip.
pub fn target_fingertip_contacts(
    state: &WorldState,
    geom: &HandGeometry,
    cfg: &PhysicsConfig,
) -> Vec<(usize, Vec2)> {
    fingertip_contacts_with_tol(state, geom, cfg, cfg.contact_tol)
}

fn fingertip_contacts_with_tol(
    state: &WorldState,
    geom: &HandGeometry,
    cfg: &PhysicsConfig,
    tol: f32,
) -> Vec<(usize, Vec2)> {
    let target = state.target();
    if !cfg.hand_engages(state.hand.palm_z(), target) {
        return Vec::new();
    }
    let pts = fk_hand(&state.hand, geom);
    let mut out = Vec::new();
    for (f, tip) in pts.fingertips.iter().enumerate() {
        if let Some(c) = circle_block_contact(tip.xy(), geom.fingertip_radius, target, tol) {
            if c.depth >= -tol {
                out.push((f, c.normal));
            }
        }
    }
    out
}

/// Exact distance from the palm center point to the target block solid.
pub fn palm_target_distance(state: &WorldState, cfg: &PhysicsConfig) -> f32 {
    block_distance_to_point(state.target(), state.hand.palm_point(), cfg.block_height)
}

/// True iff at least `grasp_min_contacts` fingertips touch the target, some
/// contact pair has normals separated by more than `grasp_normal_sep_deg`,
/// and the palm is within `grasp_palm_dist` of the target.
pub fn grasp_predicate(state: &WorldState, geom: &HandGeometry, cfg: &PhysicsConfig) -> bool {
    let contacts = target_fingertip_contacts(state, geom, cfg);
    if (contacts.len() as u32) < cfg.grasp_min_contacts {
        return false;
    }
    if palm_target_distance(state, cfg) >= cfg.grasp_palm_dist {
        return false;
    }
    let cos_thresh = (cfg.grasp_normal_sep_deg * std::f32::consts::PI / 180.0).cos();
    for i in 0..contacts.len() {
        for j in (i + 1)..contacts.len() {
            if contacts[i].1.dot(contacts[j].1) < cos_thresh {
                return true;
            }
        }
    }
    false
}

/// Attachment transitions: grasp attaches; losing fingertip contact detaches
/// and drops the target back to the table.
fn update_attachment(state: &mut WorldState, geom: &HandGeometry, cfg: &PhysicsConfig) {
    if !state.attached {
        if grasp_predicate(state, geom, cfg) {
            let palm_xy = state.hand.palm_xy();
            let yaw = state.hand.yaw();
            let palm_z = state.hand.palm_z();
            let t = state.target();
            let local_xy = t.center().sub(palm_xy).rotate(-yaw);
            state.attach_offset = Some(AttachOffset {
                local_xy,
                dz: t.z - palm_z,
                dyaw: wrap_angle(t.yaw - yaw),
            });
            state.attached = true;
        }
    } else {
        // Persistence check with release hysteresis: a secured grasp is not
        // dropped by millimeter jitter.
        let tol = cfg.contact_tol * cfg.release_tol_factor;
        let contacts = fingertip_contacts_with_tol(state, geom, cfg, tol);
        if (contacts.len() as u32) < cfg.grasp_min_contacts {
            state.attached = false;
            state.attach_offset = None;
            state.target_mut().z = 0.0;
        }
    }
}
