//! Scene generation: single-object, dense, and random clutter arrangements.
//!
//! Generation is a pure function of the task spec. Retry-on-failure derives
//! sub-seeds as `seed + k * 2^32` so one spec still names one scene.

use crate::math::{Vec2, Vec3};
use crate::physics::{block_pair_overlap, Block, BlockShape, HandState, PhysicsConfig, WorldState};
use crate::rng::{self, uniform, Purpose};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskFamily {
    /// Single object, no obstacles.
    SO,
    Dense,
    Random,
}

/// Arrangement descriptor plus seed; the unit of curriculum and evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub family: TaskFamily,
    pub n_obstacles: u32,
    pub seed: u64,
}

impl TaskSpec {
    pub fn new(family: TaskFamily, n_obstacles: u32, seed: u64) -> Self {
        TaskSpec {
            family,
            n_obstacles,
            seed,
        }
    }

    /// Parse tokens like "SO", "D-4", "R-8".
    pub fn parse(token: &str, seed: u64) -> Result<Self, SceneError> {
        if token.eq_ignore_ascii_case("so") {
            return Ok(TaskSpec::new(TaskFamily::SO, 0, seed));
        }
        let (fam, n) = token
            .split_once('-')
            .ok_or_else(|| SceneError::BadToken(token.to_string()))?;
        let n: u32 = n
            .parse()
            .map_err(|_| SceneError::BadToken(token.to_string()))?;
        let family = match fam {
            "D" | "d" => TaskFamily::Dense,
            "R" | "r" => TaskFamily::Random,
            _ => return Err(SceneError::BadToken(token.to_string())),
        };
        if n == 0 || n > 8 {
            return Err(SceneError::BadToken(token.to_string()));
        }
        Ok(TaskSpec::new(family, n, seed))
    }

    pub fn name(&self) -> String {
        match self.family {
            TaskFamily::SO => "SO".to_string(),
            TaskFamily::Dense => format!("D-{}", self.n_obstacles),
            TaskFamily::Random => format!("R-{}", self.n_obstacles),
        }
    }

    /// Spec for the k-th retry of the same logical scene.
    pub fn retry(&self, k: u64) -> TaskSpec {
        TaskSpec {
            seed: self.seed.wrapping_add(k << 32),
            ..*self
        }
    }
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("unknown task token '{0}' (expected SO, D-n or R-n with n in 1..=8)")]
    BadToken(String),
    #[error("dense ring holds at most 8 obstacles, requested {0}")]
    RingCapacity(u32),
    #[error("random placement failed after {0} rejection attempts")]
    PlacementFailed(u32),
    #[error("family/spec mismatch: {0}")]
    FamilyMismatch(String),
}

/// Neighbor cells around the target, in fixed fill order.
const DENSE_ORDER: [(f32, f32); 8] = [
    (1.0, 0.0),   // E
    (-1.0, 0.0),  // W
    (0.0, 1.0),   // N
    (0.0, -1.0),  // S
    (1.0, 1.0),   // NE
    (-1.0, 1.0),  // NW
    (1.0, -1.0),  // SE
    (-1.0, -1.0), // SW
];

const MAX_RANDOM_ATTEMPTS: u32 = 10_000;

fn hand_spawn(target: Vec2, stream: &mut rng::Stream) -> HandState {
    // Approach from the west with a small jittered stand-off.
    let x = target.x - 0.13 + uniform(stream, -0.01, 0.01);
    let y = target.y + uniform(stream, -0.02, 0.02);
    HandState::at(x, y, 0.03, 0.0)
}

fn finish(blocks: Vec<Block>, spec: &TaskSpec, stream: &mut rng::Stream) -> WorldState {
    let target_xy = blocks
        .iter()
        .find(|b| b.is_target)
        .map(|b| b.center())
        .expect("target present");
    WorldState {
        blocks,
        hand: hand_spawn(target_xy, stream),
        attached: false,
        attach_offset: None,
        step: 0,
        seed: spec.seed,
    }
}

/// Target at the workspace center, obstacles packed in the fixed neighbor-cell
/// order with a ~2 mm gap. The seed perturbs gaps by up to 1 mm and applies a
/// global yaw of up to 0.05 rad.
pub fn generate_dense(spec: &TaskSpec, cfg: &PhysicsConfig) -> Result<WorldState, SceneError> {
    assert_eq!(spec.family, TaskFamily::Dense, "generate_dense needs a Dense spec");
    if spec.n_obstacles > 8 {
        return Err(SceneError::RingCapacity(spec.n_obstacles));
    }
    let mut stream = rng::stream(spec.seed, Purpose::SceneGen, 0, 0);
    let u = cfg.unit_cell;
    let global_yaw = uniform(&mut stream, -0.05, 0.05);

    let mut target = Block::new(0, BlockShape::S1x1, u, 0.0, 0.0, global_yaw);
    target.is_target = true;
    let mut blocks = vec![target];
    for i in 0..spec.n_obstacles as usize {
        let gap = 0.002 + uniform(&mut stream, -0.001, 0.001);
        let (cx, cy) = DENSE_ORDER[i];
        let pitch = u + gap;
        let local = Vec2::new(cx * pitch, cy * pitch).rotate(global_yaw);
        blocks.push(Block::new(
            (i + 1) as u32,
            BlockShape::S1x1,
            u,
            local.x,
            local.y,
            global_yaw,
        ));
    }
    Ok(finish(blocks, spec, &mut stream))
}

/// Target at the center; obstacles of random shape and yaw rejection-sampled
/// in the annulus [u, 4u] with per-scene pairwise clearance.
pub fn generate_random(spec: &TaskSpec, cfg: &PhysicsConfig) -> Result<WorldState, SceneError> {
    assert_eq!(spec.family, TaskFamily::Random, "generate_random needs a Random spec");
    if spec.n_obstacles > 8 {
        return Err(SceneError::RingCapacity(spec.n_obstacles));
    }
    let mut stream = rng::stream(spec.seed, Purpose::SceneGen, 0, 0);
    let u = cfg.unit_cell;
    let clearance = uniform(&mut stream, 0.002, 0.015);

    let mut target = Block::new(0, BlockShape::S1x1, u, 0.0, 0.0, 0.0);
    target.is_target = true;
    let mut blocks = vec![target];
    let mut attempts = 0u32;
    for i in 0..spec.n_obstacles {
        // Shape is drawn once per obstacle; rejection re-draws only the
        // placement, so the realized shape distribution stays uniform.
        let shape = match stream.gen_range(0..3u32) {
            0 => BlockShape::S1x1,
            1 => BlockShape::S1x2,
            _ => BlockShape::S1x3,
        };
        loop {
            if attempts >= MAX_RANDOM_ATTEMPTS {
                return Err(SceneError::PlacementFailed(attempts));
            }
            attempts += 1;
            let radius = uniform(&mut stream, u, 4.0 * u);
            let theta = uniform(&mut stream, 0.0, std::f32::consts::TAU);
            let yaw = uniform(&mut stream, -std::f32::consts::PI, std::f32::consts::PI);
            let candidate = Block::new(
                i + 1,
                shape,
                u,
                radius * theta.cos(),
                radius * theta.sin(),
                yaw,
            );
            // Pairwise clearance: SAT "overlap" below -clearance means the
            // gap exceeds the clearance along some axis.
            let clear = blocks
                .iter()
                .all(|b| block_pair_overlap(b, &candidate) < -clearance);
            if clear {
                blocks.push(candidate);
                break;
            }
        }
    }
    Ok(finish(blocks, spec, &mut stream))
}

/// Target block only, seed-jittered within 2 cm of the center.
pub fn generate_single(spec: &TaskSpec, cfg: &PhysicsConfig) -> Result<WorldState, SceneError> {
    assert_eq!(spec.family, TaskFamily::SO, "generate_single needs an SO spec");
    let mut stream = rng::stream(spec.seed, Purpose::SceneGen, 0, 0);
    let mut target = Block::new(
        0,
        BlockShape::S1x1,
        cfg.unit_cell,
        uniform(&mut stream, -0.02, 0.02),
        uniform(&mut stream, -0.02, 0.02),
        uniform(&mut stream, -std::f32::consts::PI, std::f32::consts::PI),
    );
    target.is_target = true;
    Ok(finish(vec![target], spec, &mut stream))
}

/// Dispatch on the spec family.
pub fn generate(spec: &TaskSpec, cfg: &PhysicsConfig) -> Result<WorldState, SceneError> {
    match spec.family {
        TaskFamily::SO => generate_single(spec, cfg),
        TaskFamily::Dense => generate_dense(spec, cfg),
        TaskFamily::Random => generate_random(spec, cfg),
    }
}

/// Generate with retries: on placement failure move to the next sub-seed.
pub fn generate_with_retries(
    spec: &TaskSpec,
    cfg: &PhysicsConfig,
    max_retries: u64,
) -> Result<WorldState, SceneError> {
    let mut last = None;
    for k in 0..=max_retries {
        match generate(&spec.retry(k), cfg) {
            Ok(w) => return Ok(w),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Goal point for an episode: the target's initial planar position lifted to
/// a fixed height that clears the clutter.
pub const GOAL_HEIGHT: f32 = 0.12;

pub fn goal_for(world: &WorldState) -> Vec3 {
    let t = world.target();
    Vec3::new(t.x, t.y, GOAL_HEIGHT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::max_block_overlap;

    fn cfg() -> PhysicsConfig {
        PhysicsConfig::default()
    }

    #[test]
    fn dense_fill_order_n4() {
        let cfg = cfg();
        let spec = TaskSpec::new(TaskFamily::Dense, 4, 7);
        let w = generate_dense(&spec, &cfg).unwrap();
        assert_eq!(w.blocks.len(), 5);
        // E, W, N, S cells (up to the small global yaw).
        let t = w.target().center();
        let dirs: Vec<Vec2> = w
            .obstacles()
            .map(|b| {
                let d = b.center().sub(t);
                d.scale(1.0 / d.norm())
            })
            .collect();
        let expect = [
            Vec2::new(1.0, 0.0),
            Vec2::new(-1.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(0.0, -1.0),
        ];
        for (d, e) in dirs.iter().zip(expect.iter()) {
            assert!(d.dot(*e) > 0.995, "direction {d:?} vs {e:?}");
        }
    }

    #[test]
    fn dense_n8_gaps_tight() {
        let cfg = cfg();
        for seed in 0..20 {
            let spec = TaskSpec::new(TaskFamily::Dense, 8, seed);
            let w = generate_dense(&spec, &cfg).unwrap();
            assert_eq!(w.blocks.len(), 9);
            // Target center distance to axis neighbors is at most u + 3 mm.
            let t = w.target();
            let mut min_center_dist = f32::INFINITY;
            for o in w.obstacles() {
                min_center_dist = min_center_dist.min(o.center().sub(t.center()).norm());
            }
            assert!(
                min_center_dist <= cfg.unit_cell + 0.003,
                "seed {seed}: min center distance {min_center_dist}"
            );
            // No initial penetration.
            assert!(max_block_overlap(&w, &cfg) <= 0.0, "seed {seed}");
            // Graspable-threshold property: every axis-neighbor gap stays
            // below the finger insertion width.
            assert!(min_center_dist - cfg.unit_cell < 2.0 * cfg.fingertip_radius);
        }
    }

    #[test]
    fn dense_overcapacity_rejected() {
        let cfg = cfg();
        let spec = TaskSpec::new(TaskFamily::Dense, 9, 0);
        assert!(matches!(
            generate_dense(&spec, &cfg),
            Err(SceneError::RingCapacity(9))
        ));
    }

    #[test]
    fn random_scene_valid() {
        let cfg = cfg();
        for seed in 0..40 {
            let spec = TaskSpec::new(TaskFamily::Random, 8, seed);
            let w = generate_random(&spec, &cfg).unwrap();
            assert_eq!(w.blocks.len(), 9);
            assert!(max_block_overlap(&w, &cfg) <= 0.0, "seed {seed}");
            let t = w.target().center();
            for o in w.obstacles() {
                let r = o.center().sub(t).norm();
                assert!(
                    r >= cfg.unit_cell - 1e-6 && r <= 4.0 * cfg.unit_cell + 1e-6,
                    "seed {seed}: obstacle at radius {r}"
                );
            }
        }
    }

    #[test]
    fn random_shape_histogram_uniform() {
        let cfg = cfg();
        let mut counts = [0usize; 3];
        let mut total = 0usize;
        // 10,000 obstacle draws across seeds.
        let mut seed = 0u64;
        while total < 10_000 {
            let spec = TaskSpec::new(TaskFamily::Random, 8, seed);
            let w = generate_random(&spec, &cfg).unwrap();
            for o in w.obstacles() {
                match o.shape {
                    BlockShape::S1x1 => counts[0] += 1,
                    BlockShape::S1x2 => counts[1] += 1,
                    BlockShape::S1x3 => counts[2] += 1,
                }
                total += 1;
            }
            seed += 1;
        }
        for (i, c) in counts.iter().enumerate() {
            let f = *c as f64 / total as f64;
            assert!(
                (0.31..=0.36).contains(&f),
                "shape {i} frequency {f} outside [0.31, 0.36]"
            );
        }
    }

    #[test]
    fn single_object_scene() {
        let cfg = cfg();
        let spec = TaskSpec::new(TaskFamily::SO, 0, 3);
        let w = generate_single(&spec, &cfg).unwrap();
        assert_eq!(w.blocks.len(), 1);
        assert!(w.blocks[0].is_target);
        assert!(w.blocks[0].center().norm() <= 0.02 * std::f32::consts::SQRT_2 + 1e-6);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = cfg();
        for spec in [
            TaskSpec::new(TaskFamily::SO, 0, 11),
            TaskSpec::new(TaskFamily::Dense, 6, 11),
            TaskSpec::new(TaskFamily::Random, 5, 11),
        ] {
            let a = generate(&spec, &cfg).unwrap();
            let b = generate(&spec, &cfg).unwrap();
            assert_eq!(a.blocks.len(), b.blocks.len());
            for (x, y) in a.blocks.iter().zip(b.blocks.iter()) {
                assert_eq!(x.x.to_bits(), y.x.to_bits());
                assert_eq!(x.y.to_bits(), y.y.to_bits());
                assert_eq!(x.yaw.to_bits(), y.yaw.to_bits());
                assert_eq!(x.shape, y.shape);
            }
            assert_eq!(a.hand.palm_pose, b.hand.palm_pose);
        }
    }

    #[test]
    fn parse_tokens() {
        assert_eq!(
            TaskSpec::parse("D-8", 1).unwrap(),
            TaskSpec::new(TaskFamily::Dense, 8, 1)
        );
        assert_eq!(
            TaskSpec::parse("r-4", 2).unwrap(),
            TaskSpec::new(TaskFamily::Random, 4, 2)
        );
        assert_eq!(
            TaskSpec::parse("SO", 3).unwrap(),
            TaskSpec::new(TaskFamily::SO, 0, 3)
        );
        assert!(TaskSpec::parse("X-4", 0).is_err());
        assert!(TaskSpec::parse("D-9", 0).is_err());
    }
}
