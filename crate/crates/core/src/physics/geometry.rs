//! Narrow-phase contact geometry: circles and capsules against oriented
//! rectangles, and rectangle-rectangle SAT with minimum translation vector.
//!
//! Conventions: a hand-body contact normal points from the block surface
//! toward the hand body (the direction that moves the hand body out of the
//! block); pushing the block along the opposite direction separates the pair.

use super::{Block, HandGeometry, PhysicsConfig, WorldState};
use crate::math::Vec2;

/// One resolved contact between a hand body and a block.
#[derive(Clone, Copy, Debug)]
pub struct CircleContact {
    /// Unit direction moving the circle out of the block, world frame.
    pub normal: Vec2,
    /// Overlap depth (>= 0 means touching or penetrating).
    pub depth: f32,
    /// Contact point on the block boundary, world frame.
    pub point: Vec2,
}

/// Block-block contact: push `b` along `normal` (and `a` against it).
#[derive(Clone, Copy, Debug)]
pub struct PairContact {
    pub normal: Vec2,
    pub depth: f32,
    pub point: Vec2,
}

#[inline]
fn to_local(block: &Block, p: Vec2) -> Vec2 {
    p.sub(block.center()).rotate(-block.yaw)
}

#[inline]
fn to_world_dir(block: &Block, d: Vec2) -> Vec2 {
    d.rotate(block.yaw)
}

#[inline]
fn to_world(block: &Block, p: Vec2) -> Vec2 {
    p.rotate(block.yaw).add(block.center())
}

/// Closest point on the block footprint to `p`, both in block frame.
#[inline]
fn clamp_to_box(p: Vec2, he: Vec2) -> Vec2 {
    Vec2::new(p.x.clamp(-he.x, he.x), p.y.clamp(-he.y, he.y))
}

/// Depth of `p` inside the box along the cheapest escape axis; negative when outside.
#[inline]
fn inside_depth(p: Vec2, he: Vec2) -> f32 {
    (he.x - p.x.abs()).min(he.y - p.y.abs())
}

/// Escape direction (block frame) for a point inside the box.
fn escape_dir(p: Vec2, he: Vec2) -> Vec2 {
    if he.x - p.x.abs() <= he.y - p.y.abs() {
        Vec2::new(if p.x >= 0.0 { 1.0 } else { -1.0 }, 0.0)
    } else {
        Vec2::new(0.0, if p.y >= 0.0 { 1.0 } else { -1.0 })
    }
}

/// Circle (disk at `center`, radius `r`) against a block footprint.
/// `extra` widens the acceptance band: depth is reported when
/// `dist <= r + extra` (used for contact queries with tolerance).
pub fn circle_block_contact(center: Vec2, r: f32, block: &Block, extra: f32) -> Option<CircleContact> {
    let p = to_local(block, center);
    let he = block.half_extents;
    let inside = p.x.abs() <= he.x && p.y.abs() <= he.y;
    if inside {
        let dir = escape_dir(p, he);
        let depth = r + inside_depth(p, he);
        let face = Vec2::new(
            if dir.x != 0.0 { dir.x * he.x } else { p.x },
            if dir.y != 0.0 { dir.y * he.y } else { p.y },
        );
        return Some(CircleContact {
            normal: to_world_dir(block, dir),
            depth,
            point: to_world(block, face),
        });
    }
    let q = clamp_to_box(p, he);
    let d = p.sub(q);
    let dist = d.norm();
    if dist > r + extra {
        return None;
    }
    let n = if dist > 1e-12 {
        d.scale(1.0 / dist)
    } else {
        Vec2::new(1.0, 0.0)
    };
    Some(CircleContact {
        normal: to_world_dir(block, n),
        depth: r - dist,
        point: to_world(block, q),
    })
}

/// Squared distance between 2-D segments (a0,a1) and (b0,b1) with the
/// closest points. Standard clamped-parameter formulation.
fn segment_segment_closest(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> (f32, Vec2, Vec2) {
    let d1 = a1.sub(a0);
    let d2 = b1.sub(b0);
    let r = a0.sub(b0);
    let a = d1.dot(d1);
    let e = d2.dot(d2);
    let f = d2.dot(r);
    let (mut s, mut t);
    if a <= 1e-12 && e <= 1e-12 {
        s = 0.0;
        t = 0.0;
    } else if a <= 1e-12 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(r);
        if e <= 1e-12 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(d2);
            let denom = a * e - b * b;
            s = if denom.abs() > 1e-12 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
        }
    }
    let pa = a0.add(d1.scale(s));
    let pb = b0.add(d2.scale(t));
    (pa.sub(pb).norm(), pa, pb)
}

/// Capsule (segment a-b with radius `r`) against a block footprint.
pub fn capsule_block_contact(
    a: Vec2,
    b: Vec2,
    r: f32,
    block: &Block,
    extra: f32,
) -> Option<CircleContact> {
    let he = block.half_extents;
    let la = to_local(block, a);
    let lb = to_local(block, b);

    // Deep case: part of the core segment lies inside the box. Probe a few
    // points and resolve from the deepest one.
    let mut deepest: Option<(f32, Vec2)> = None;
    for k in 0..=4 {
        let t = k as f32 / 4.0;
        let p = Vec2::new(la.x + (lb.x - la.x) * t, la.y + (lb.y - la.y) * t);
        if p.x.abs() <= he.x && p.y.abs() <= he.y {
            let d = inside_depth(p, he);
            if deepest.map_or(true, |(dd, _)| d > dd) {
                deepest = Some((d, p));
            }
        }
    }
    if let Some((d, p)) = deepest {
        let dir = escape_dir(p, he);
        let face = Vec2::new(
            if dir.x != 0.0 { dir.x * he.x } else { p.x },
            if dir.y != 0.0 { dir.y * he.y } else { p.y },
        );
        return Some(CircleContact {
            normal: to_world_dir(block, dir),
            depth: r + d,
            point: to_world(block, face),
        });
    }

    // Shallow case: closest approach between the core segment and the box
    // boundary (4 edges), exact.
    let corners = [
        Vec2::new(-he.x, -he.y),
        Vec2::new(he.x, -he.y),
        Vec2::new(he.x, he.y),
        Vec2::new(-he.x, he.y),
    ];
    let mut best: Option<(f32, Vec2, Vec2)> = None;
    for i in 0..4 {
        let e0 = corners[i];
        let e1 = corners[(i + 1) % 4];
        let (d, ps, pb) = segment_segment_closest(la, lb, e0, e1);
        if best.map_or(true, |(bd, _, _)| d < bd) {
            best = Some((d, ps, pb));
        }
    }
    let (dist, ps, pb) = best.unwrap();
    if dist > r + extra {
        return None;
    }
    let d = ps.sub(pb);
    let n = if dist > 1e-12 {
        d.scale(1.0 / dist)
    } else {
        Vec2::new(1.0, 0.0)
    };
    Some(CircleContact {
        normal: to_world_dir(block, n),
        depth: r - dist,
        point: to_world(block, pb),
    })
}

fn obb_corners(b: &Block) -> [Vec2; 4] {
    let he = b.half_extents;
    [
        to_world(b, Vec2::new(-he.x, -he.y)),
        to_world(b, Vec2::new(he.x, -he.y)),
        to_world(b, Vec2::new(he.x, he.y)),
        to_world(b, Vec2::new(-he.x, he.y)),
    ]
}

/// SAT overlap of two oriented rectangles: the minimum over the four face
/// axes of (sum of projection radii - center distance). Positive means
/// penetration by that amount; non-positive means separated.
pub fn block_pair_overlap(a: &Block, b: &Block) -> f32 {
    let axes = [
        Vec2::from_angle(a.yaw),
        Vec2::from_angle(a.yaw + std::f32::consts::FRAC_PI_2),
        Vec2::from_angle(b.yaw),
        Vec2::from_angle(b.yaw + std::f32::consts::FRAC_PI_2),
    ];
    let d = b.center().sub(a.center());
    let mut min_overlap = f32::INFINITY;
    for axis in axes {
        let ra = project_radius(a, axis);
        let rb = project_radius(b, axis);
        let overlap = ra + rb - d.dot(axis).abs();
        if overlap < min_overlap {
            min_overlap = overlap;
        }
    }
    min_overlap
}

#[inline]
fn project_radius(b: &Block, axis: Vec2) -> f32 {
    let ux = Vec2::from_angle(b.yaw);
    let uy = Vec2::from_angle(b.yaw + std::f32::consts::FRAC_PI_2);
    b.half_extents.x * ux.dot(axis).abs() + b.half_extents.y * uy.dot(axis).abs()
}

/// Full SAT contact between two blocks; `None` when separated.
pub fn block_block_contact(a: &Block, b: &Block) -> Option<PairContact> {
    let axes = [
        Vec2::from_angle(a.yaw),
        Vec2::from_angle(a.yaw + std::f32::consts::FRAC_PI_2),
        Vec2::from_angle(b.yaw),
        Vec2::from_angle(b.yaw + std::f32::consts::FRAC_PI_2),
    ];
    let d = b.center().sub(a.center());
    let mut best_axis = axes[0];
    let mut best_overlap = f32::INFINITY;
    for axis in axes {
        let overlap = project_radius(a, axis) + project_radius(b, axis) - d.dot(axis).abs();
        if overlap <= 0.0 {
            return None;
        }
        if overlap < best_overlap {
            best_overlap = overlap;
            best_axis = axis;
        }
    }
    // Orient the axis so it pushes b away from a.
    let normal = if d.dot(best_axis) >= 0.0 {
        best_axis
    } else {
        best_axis.scale(-1.0)
    };
    // Contact point: centroid of the incident box's corners that penetrate
    // the reference box along the normal, falling back to the center midpoint.
    let mut acc = Vec2::ZERO;
    let mut count = 0;
    for c in obb_corners(b) {
        let l = to_local(a, c);
        if l.x.abs() <= a.half_extents.x + 1e-9 && l.y.abs() <= a.half_extents.y + 1e-9 {
            acc = acc.add(c);
            count += 1;
        }
    }
    for c in obb_corners(a) {
        let l = to_local(b, c);
        if l.x.abs() <= b.half_extents.x + 1e-9 && l.y.abs() <= b.half_extents.y + 1e-9 {
            acc = acc.add(c);
            count += 1;
        }
    }
    let point = if count > 0 {
        acc.scale(1.0 / count as f32)
    } else {
        a.center().add(b.center()).scale(0.5)
    };
    Some(PairContact {
        normal,
        depth: best_overlap,
        point,
    })
}

/// Exact distance from a 3-D point to the solid block (footprint x vertical
/// span); zero inside.
pub fn block_distance_to_point(block: &Block, p: crate::math::Vec3, block_height: f32) -> f32 {
    let l = to_local(block, p.xy());
    let he = block.half_extents;
    let dx = (l.x.abs() - he.x).max(0.0);
    let dy = (l.y.abs() - he.y).max(0.0);
    let dz = (block.z - p.z).max(0.0).max(p.z - (block.z + block_height));
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Diagnostic: deepest overlap of any hand body with any engaged block.
pub fn hand_block_max_overlap(world: &WorldState, geom: &HandGeometry, cfg: &PhysicsConfig) -> f32 {
    let pts = super::fk_hand(&world.hand, geom);
    let palm_z = world.hand.palm_z();
    let mut max_depth: f32 = 0.0;
    for block in &world.blocks {
        if !cfg.hand_engages(palm_z, block) {
            continue;
        }
        if world.attached && block.is_target {
            continue;
        }
        if let Some(c) = circle_block_contact(world.hand.palm_xy(), geom.palm_radius, block, 0.0) {
            max_depth = max_depth.max(c.depth);
        }
        for tip in &pts.fingertips {
            if let Some(c) = circle_block_contact(tip.xy(), geom.fingertip_radius, block, 0.0) {
                max_depth = max_depth.max(c.depth);
            }
        }
        for (_, _, a, b) in pts.link_segments() {
            if let Some(c) = capsule_block_contact(a, b, geom.fingertip_radius, block, 0.0) {
                max_depth = max_depth.max(c.depth);
            }
        }
    }
    max_depth
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::BlockShape;

    fn block_at(x: f32, y: f32, yaw: f32) -> Block {
        Block::new(0, BlockShape::S1x1, 0.05, x, y, yaw)
    }

    #[test]
    fn circle_outside_no_contact() {
        let b = block_at(0.0, 0.0, 0.0);
        assert!(circle_block_contact(Vec2::new(0.1, 0.0), 0.008, &b, 0.0).is_none());
    }

    #[test]
    fn circle_touching_face() {
        let b = block_at(0.0, 0.0, 0.0);
        // Center 30 mm right of block center: 5 mm from the face, radius 8 mm.
        let c = circle_block_contact(Vec2::new(0.030, 0.0), 0.008, &b, 0.0).unwrap();
        assert!((c.depth - 0.003).abs() < 1e-6);
        assert!((c.normal.x - 1.0).abs() < 1e-6);
        assert!((c.point.x - 0.025).abs() < 1e-6);
    }

    #[test]
    fn circle_respects_rotation() {
        let b = block_at(0.0, 0.0, std::f32::consts::FRAC_PI_4);
        // Along the rotated x axis the face sits at 0.025 from center.
        let dir = Vec2::from_angle(std::f32::consts::FRAC_PI_4);
        let c = circle_block_contact(dir.scale(0.030), 0.008, &b, 0.0).unwrap();
        assert!((c.depth - 0.003).abs() < 1e-5);
        assert!((c.normal.dot(dir) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn sat_overlap_axis_aligned() {
        let a = block_at(0.0, 0.0, 0.0);
        let b = block_at(0.048, 0.0, 0.0);
        let overlap = block_pair_overlap(&a, &b);
        assert!((overlap - 0.002).abs() < 1e-6);
        let c = block_block_contact(&a, &b).unwrap();
        assert!((c.depth - 0.002).abs() < 1e-6);
        assert!(c.normal.x > 0.99);
    }

    #[test]
    fn sat_separated_reports_negative() {
        let a = block_at(0.0, 0.0, 0.0);
        let b = block_at(0.06, 0.0, 0.0);
        assert!(block_pair_overlap(&a, &b) < 0.0);
        assert!(block_block_contact(&a, &b).is_none());
    }

    #[test]
    fn capsule_touches_edge() {
        let b = block_at(0.0, 0.0, 0.0);
        // Horizontal segment passing 4 mm above the top face.
        let c = capsule_block_contact(
            Vec2::new(-0.05, 0.029),
            Vec2::new(0.05, 0.029),
            0.008,
            &b,
            0.0,
        )
        .unwrap();
        assert!((c.depth - 0.004).abs() < 1e-6);
        assert!((c.normal.y - 1.0).abs() < 1e-6);
    }

    #[test]
    fn point_distance_3d() {
        let b = block_at(0.0, 0.0, 0.0);
        let d = block_distance_to_point(&b, crate::math::Vec3::new(0.065, 0.0, 0.03), 0.05);
        assert!((d - 0.04).abs() < 1e-6);
        // Point above the top face.
        let d = block_distance_to_point(&b, crate::math::Vec3::new(0.0, 0.0, 0.08), 0.05);
        assert!((d - 0.03).abs() < 1e-6);
        // Inside.
        let d = block_distance_to_point(&b, crate::math::Vec3::new(0.0, 0.0, 0.02), 0.05);
        assert_eq!(d, 0.0);
    }
}
