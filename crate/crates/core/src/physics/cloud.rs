//! Surface point sampling: the simulated stand-in for the fused depth stream.

use super::{Block, PhysicsConfig, WorldState};
use crate::math::{Vec2, Vec3};
use crate::rng::{uniform, Stream};

/// Faces of one block exposed to cameras: the top plus the four sides.
const FACES: usize = 5;

fn face_areas(block: &Block, h: f32) -> [f32; FACES] {
    let (ex, ey) = (block.half_extents.x, block.half_extents.y);
    [
        4.0 * ex * ey,  // top
        2.0 * ey * h,   // +x side
        2.0 * ey * h,   // -x side
        2.0 * ex * h,   // +y side
        2.0 * ex * h,   // -y side
    ]
}

fn sample_on_face(block: &Block, face: usize, h: f32, stream: &mut Stream) -> Vec3 {
    let (ex, ey) = (block.half_extents.x, block.half_extents.y);
    let (local, z) = match face {
        0 => (
            Vec2::new(uniform(stream, -ex, ex), uniform(stream, -ey, ey)),
            block.z + h,
        ),
        1 => (
            Vec2::new(ex, uniform(stream, -ey, ey)),
            block.z + uniform(stream, 0.0, h),
        ),
        2 => (
            Vec2::new(-ex, uniform(stream, -ey, ey)),
            block.z + uniform(stream, 0.0, h),
        ),
        3 => (
            Vec2::new(uniform(stream, -ex, ex), ey),
            block.z + uniform(stream, 0.0, h),
        ),
        _ => (
            Vec2::new(uniform(stream, -ex, ex), -ey),
            block.z + uniform(stream, 0.0, h),
        ),
    };
    let w = local.rotate(block.yaw).add(block.center());
    Vec3::new(w.x, w.y, z)
}

/// Area-weighted uniform samples over the exposed faces of the given blocks.
fn sample_surfaces(blocks: &[&Block], h: f32, n: usize, stream: &mut Stream) -> Vec<Vec3> {
    assert!(n >= 1, "need at least one sample point");
    assert!(!blocks.is_empty(), "need at least one block");
    let mut cum = Vec::with_capacity(blocks.len() * FACES);
    let mut total = 0.0f32;
    for b in blocks {
        for a in face_areas(b, h) {
            total += a;
            cum.push(total);
        }
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let r = uniform(stream, 0.0, total);
        let idx = cum.partition_point(|&c| c < r).min(cum.len() - 1);
        let (bi, face) = (idx / FACES, idx % FACES);
        out.push(sample_on_face(blocks[bi], face, h, stream));
    }
    out
}

/// Scene point cloud over every block; seeded-deterministic.
pub fn sample_pointcloud(
    state: &WorldState,
    cfg: &PhysicsConfig,
    n_points: usize,
    stream: &mut Stream,
) -> Vec<Vec3> {
    let blocks: Vec<&Block> = state.blocks.iter().collect();
    sample_surfaces(&blocks, cfg.block_height, n_points, stream)
}

/// Samples restricted to the target block's surface (used by hand-object
/// distances and the reward's target point set).
pub fn sample_target_surface(
    state: &WorldState,
    cfg: &PhysicsConfig,
    n_points: usize,
    stream: &mut Stream,
) -> Vec<Vec3> {
    sample_surfaces(&[state.target()], cfg.block_height, n_points, stream)
}
