//! Gauss-Seidel position-based contact resolution.
//!
//! Hand bodies are kinematic: they push blocks out fully and are never
//! displaced. Block-block penetrations split 50/50 along the minimum
//! translation vector, except that an attached target is kinematic too (it is
//! carried by the palm and ploughs through obstacles). Off-center contacts add
//! a yaw correction proportional to torque arm x penetration, normalized by
//! the block's gyration radius, gain `rot_gain`.

use super::geometry::{block_block_contact, capsule_block_contact, circle_block_contact};
use super::{fk_hand, HandGeometry, PhysicsConfig, WorldState};
use crate::math::Vec2;

/// Contact-impulse proxies accumulated over one solve.
#[derive(Clone, Debug, Default)]
pub struct ContactImpulses {
    /// Per finger joint (finger-major, 4 joints each): sum of correction depths
    /// attributed to that joint's link bodies.
    pub joint: [f32; 16],
    /// Wrist proxy from palm-disk contacts: (fx, fy, 0, 0, 0, torque).
    pub wrist: [f32; 6],
    /// Deepest block-block overlap remaining after the final iteration.
    pub residual: f32,
}

#[inline]
fn gyration_sq(he: Vec2) -> f32 {
    (he.x * he.x + he.y * he.y) / 3.0
}

/// Apply a positional correction `push` at world `point` to block `idx`,
/// with a yaw correction from the off-center component.
fn nudge_block(world: &mut WorldState, idx: usize, push: Vec2, point: Vec2, rot_gain: f32) {
    let b = &mut world.blocks[idx];
    let r = point.sub(b.center());
    let dyaw = rot_gain * r.cross(push) / gyration_sq(b.half_extents);
    b.yaw = crate::math::wrap_angle(b.yaw + dyaw);
    b.x += push.x;
    b.y += push.y;
}

/// One full position-based solve; mutates block poses only (the hand is
/// kinematic). Returns contact-impulse proxies plus the final residual.
pub fn resolve_contacts(
    world: &mut WorldState,
    geom: &HandGeometry,
    cfg: &PhysicsConfig,
) -> ContactImpulses {
    let mut imp = ContactImpulses::default();
    let pts = fk_hand(&world.hand, geom);
    let palm_xy = world.hand.palm_xy();
    let palm_z = world.hand.palm_z();
    let n_blocks = world.blocks.len();

    // Hand body ids: 0 = palm disk, 1..=4 fingertip disks, 5..=20 link capsules.
    // Ids fix the resolution order within an iteration.
    for _ in 0..cfg.solver_iters {
        for body in 0..21usize {
            for bi in 0..n_blocks {
                let block = &world.blocks[bi];
                if !cfg.hand_engages(palm_z, block) {
                    continue;
                }
                if world.attached && block.is_target {
                    continue; // held: driven by the palm, not pushed by it
                }
                let contact = match body {
                    0 => circle_block_contact(palm_xy, geom.palm_radius, block, 0.0),
                    1..=4 => circle_block_contact(
                        pts.fingertips[body - 1].xy(),
                        geom.fingertip_radius,
                        block,
                        0.0,
                    ),
                    _ => {
                        let k = body - 5;
                        let (f, j) = (k / 4, k % 4);
                        let a = pts.links[1 + 5 * f + j].xy();
                        let b = pts.links[1 + 5 * f + j + 1].xy();
                        capsule_block_contact(a, b, geom.fingertip_radius, block, 0.0)
                    }
                };
                let Some(c) = contact else { continue };
                if c.depth <= 0.0 {
                    continue;
                }
                // Push the block opposite the hand-body outward normal.
                let push = c.normal.scale(-c.depth);
                nudge_block(world, bi, push, c.point, cfg.rot_gain);
                match body {
                    0 => {
                        imp.wrist[0] += -push.x;
                        imp.wrist[1] += -push.y;
                        let r = c.point.sub(palm_xy);
                        imp.wrist[5] += r.cross(push.scale(-1.0));
                    }
                    1..=4 => imp.joint[(body - 1) * 4 + 3] += c.depth,
                    _ => imp.joint[body - 5] += c.depth,
                }
            }
        }

        for i in 0..n_blocks {
            for j in (i + 1)..n_blocks {
                let (a, b) = (&world.blocks[i], &world.blocks[j]);
                if !cfg.blocks_engage(a, b) {
                    continue;
                }
                let a_held = world.attached && a.is_target;
                let b_held = world.attached && b.is_target;
                let Some(c) = block_block_contact(a, b) else {
                    continue;
                };
                if a_held {
                    nudge_block(world, j, c.normal.scale(c.depth), c.point, cfg.rot_gain);
                } else if b_held {
                    nudge_block(world, i, c.normal.scale(-c.depth), c.point, cfg.rot_gain);
                } else {
                    nudge_block(world, j, c.normal.scale(c.depth * 0.5), c.point, cfg.rot_gain);
                    nudge_block(world, i, c.normal.scale(-c.depth * 0.5), c.point, cfg.rot_gain);
                }
            }
        }
    }

    imp.residual = max_block_overlap(world, cfg);
    if imp.residual > cfg.slop {
        eprintln!(
            "warning: contact solve residual {:.2e} m above slop {:.2e} m at step {}",
            imp.residual, cfg.slop, world.step
        );
    }
    imp
}

/// Deepest pairwise block-block overlap among engaged pairs (0 when none).
pub fn max_block_overlap(world: &WorldState, cfg: &PhysicsConfig) -> f32 {
    let mut worst: f32 = 0.0;
    for i in 0..world.blocks.len() {
        for j in (i + 1)..world.blocks.len() {
            let (a, b) = (&world.blocks[i], &world.blocks[j]);
            if !cfg.blocks_engage(a, b) {
                continue;
            }
            worst = worst.max(super::geometry::block_pair_overlap(a, b));
        }
    }
    worst
}
