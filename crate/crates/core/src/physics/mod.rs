//! Deterministic quasi-static 2.5-D rigid-block world with a parametric hand.
//!
//! Blocks are oriented rectangles living on a table plane; the only vertical
//! motion is the lift height of a grasped block. The hand is kinematic: a palm
//! disk plus four planar finger chains whose links push blocks but are never
//! pushed back. Contacts resolve by position projection (no inertia).

mod cloud;
mod fk;
mod geometry;
mod solver;
mod world;

pub use cloud::{sample_pointcloud, sample_target_surface};
pub use fk::{fk_hand, HandPoints};
pub use geometry::{block_distance_to_point, block_pair_overlap, hand_block_max_overlap};
pub use solver::{max_block_overlap, resolve_contacts, ContactImpulses};
pub use world::{grasp_predicate, palm_target_distance, step_world, target_fingertip_contacts};

use crate::math::{Vec2, Vec3};
use serde::{Deserialize, Serialize};

/// Footprint of a block in unit cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockShape {
    S1x1,
    S1x2,
    S1x3,
}

impl BlockShape {
    /// Footprint half extents for unit cell `u`.
    pub fn half_extents(self, u: f32) -> Vec2 {
        match self {
            BlockShape::S1x1 => Vec2::new(u / 2.0, u / 2.0),
            BlockShape::S1x2 => Vec2::new(u, u / 2.0),
            BlockShape::S1x3 => Vec2::new(1.5 * u, u / 2.0),
        }
    }
}

/// One tabletop block. `z` is lift height: 0 while resting on the table.
/// Velocities are per-step finite differences maintained by `step_world`
/// (the quasi-static solve has no native velocities).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Block {
    pub id: u32,
    pub shape: BlockShape,
    pub half_extents: Vec2,
    pub x: f32,
    pub y: f32,
    pub yaw: f32,
    pub z: f32,
    pub is_target: bool,
    pub lin_vel: Vec3,
    pub yaw_rate: f32,
}

impl Block {
    pub fn new(id: u32, shape: BlockShape, u: f32, x: f32, y: f32, yaw: f32) -> Self {
        Block {
            id,
            shape,
            half_extents: shape.half_extents(u),
            x,
            y,
            yaw,
            z: 0.0,
            is_target: false,
            lin_vel: Vec3::ZERO,
            yaw_rate: 0.0,
        }
    }

    #[inline]
    pub fn center(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Position as used by observations and rewards: (x, y, lift height).
    #[inline]
    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }
}

/// Kinematic hand state. Roll and pitch are frozen at zero; the 6-dim palm
/// pose schema is kept so observations keep their full width.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HandState {
    /// (x, y, z, roll, pitch, yaw); roll = pitch = 0 always.
    pub palm_pose: [f32; 6],
    pub joints: [f32; 16],
    /// rad per second (per-step difference over dt).
    pub joint_velocities: [f32; 16],
    /// Contact-impulse proxy per finger joint; 0 when the joint's links saw no contact.
    pub joint_forces: [f32; 16],
    /// Pose-rate proxy for the six wrist dummy joints (applied pose delta over dt).
    pub wrist_dummy: [f32; 6],
}

impl HandState {
    pub fn at(x: f32, y: f32, z: f32, yaw: f32) -> Self {
        HandState {
            palm_pose: [x, y, z, 0.0, 0.0, yaw],
            joints: [0.0; 16],
            joint_velocities: [0.0; 16],
            joint_forces: [0.0; 16],
            wrist_dummy: [0.0; 6],
        }
    }

    #[inline]
    pub fn palm_xy(&self) -> Vec2 {
        Vec2::new(self.palm_pose[0], self.palm_pose[1])
    }

    #[inline]
    pub fn palm_z(&self) -> f32 {
        self.palm_pose[2]
    }

    #[inline]
    pub fn yaw(&self) -> f32 {
        self.palm_pose[5]
    }

    /// Palm center as a world point at hand working height.
    #[inline]
    pub fn palm_point(&self) -> Vec3 {
        Vec3::new(self.palm_pose[0], self.palm_pose[1], self.palm_pose[2])
    }
}

/// Offset of the held block relative to the palm, captured at attachment.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AttachOffset {
    /// Target center in the palm frame (rotates with palm yaw).
    pub local_xy: Vec2,
    /// target_z - palm_z.
    pub dz: f32,
    /// target_yaw - palm_yaw.
    pub dyaw: f32,
}

/// Full simulator state. Stepping is a pure function of (state, action, config).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorldState {
    pub blocks: Vec<Block>,
    pub hand: HandState,
    pub attached: bool,
    pub attach_offset: Option<AttachOffset>,
    pub step: u32,
    /// Root of this episode's named random streams.
    pub seed: u64,
}

impl WorldState {
    pub fn target(&self) -> &Block {
        self.blocks
            .iter()
            .find(|b| b.is_target)
            .expect("scene has exactly one target block")
    }

    pub fn target_mut(&mut self) -> &mut Block {
        self.blocks
            .iter_mut()
            .find(|b| b.is_target)
            .expect("scene has exactly one target block")
    }

    pub fn obstacles(&self) -> impl Iterator<Item = &Block> {
        self.blocks.iter().filter(|b| !b.is_target)
    }

    pub fn n_obstacles(&self) -> usize {
        self.blocks.iter().filter(|b| !b.is_target).count()
    }
}

/// Static hand geometry. Forward kinematics yields 21 link frames
/// (1 palm + 4 fingers x 5) and 4 fingertip points.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HandGeometry {
    pub palm_radius: f32,
    pub mount_angles: [f32; 4],
    pub link_lengths: [f32; 4],
    pub fingertip_radius: f32,
}

impl HandGeometry {
    pub const LINK_COUNT: usize = 21;
    pub const FINGERTIP_COUNT: usize = 4;
    pub const FINGERS: usize = 4;
    pub const JOINTS_PER_FINGER: usize = 4;
    /// Flexion handedness per finger: positive joint values curl every
    /// finger toward the hand's forward axis (mirrored fingers flip sign).
    pub const JOINT_SIGNS: [f32; 4] = [1.0, 1.0, -1.0, -1.0];
}

/// Physical constants and solver knobs; part of the run config file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    /// Block unit cell, meters.
    pub unit_cell: f32,
    pub palm_radius: f32,
    pub fingertip_radius: f32,
    pub mount_angles_deg: [f32; 4],
    pub link_lengths: [f32; 4],
    /// Block height; table blocks span z in [0, block_height].
    pub block_height: f32,
    /// Control interval, seconds.
    pub dt: f32,
    /// Gauss-Seidel position iterations.
    pub solver_iters: u32,
    /// Contact slop: residual overlap tolerated after a step, meters.
    pub slop: f32,
    /// Gain of the yaw correction from off-center contacts.
    pub rot_gain: f32,
    /// Per-step palm translation clamp, meters per axis.
    pub max_palm_trans: f32,
    /// Per-step palm rotation clamp, radians.
    pub max_palm_rot: f32,
    /// Per-step joint motion clamp toward target, radians.
    pub max_joint_step: f32,
    pub joint_lo: f32,
    pub joint_hi: f32,
    /// Hand and blocks stay inside [-workspace_half, workspace_half]^2.
    pub workspace_half: f32,
    pub palm_z_min: f32,
    pub palm_z_max: f32,
    /// Proximity tolerance for counting a resolved touch as a contact, meters.
    pub contact_tol: f32,
    /// Release hysteresis: while attached, contacts persist within
    /// `contact_tol * release_tol_factor` (a secured grasp tolerates jitter).
    pub release_tol_factor: f32,
    /// Grasp predicate: minimum fingertip contacts.
    pub grasp_min_contacts: u32,
    /// Grasp predicate: some contact pair must have normals separated by more
    /// than this many degrees.
    pub grasp_normal_sep_deg: f32,
    /// Grasp predicate: palm-target distance bound, meters (the contact
    /// criterion threshold reused).
    pub grasp_palm_dist: f32,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            unit_cell: 0.05,
            palm_radius: 0.04,
            fingertip_radius: 0.008,
            mount_angles_deg: [-70.0, -150.0, 150.0, 70.0],
            link_lengths: [0.06, 0.015, 0.01, 0.005],
            block_height: 0.05,
            dt: 0.05,
            solver_iters: 10,
            slop: 1e-4,
            rot_gain: 0.5,
            max_palm_trans: 0.01,
            max_palm_rot: 0.1,
            max_joint_step: 0.2,
            joint_lo: 0.0,
            joint_hi: 1.6,
            workspace_half: 0.4,
            palm_z_min: 0.01,
            palm_z_max: 0.4,
            contact_tol: 5e-3,
            release_tol_factor: 12.0,
            grasp_min_contacts: 2,
            grasp_normal_sep_deg: 120.0,
            grasp_palm_dist: 0.06,
        }
    }
}

impl PhysicsConfig {
    pub fn hand_geometry(&self) -> HandGeometry {
        HandGeometry {
            palm_radius: self.palm_radius,
            mount_angles: self
                .mount_angles_deg
                .map(|d| d * std::f32::consts::PI / 180.0),
            link_lengths: self.link_lengths,
            fingertip_radius: self.fingertip_radius,
        }
    }

    /// Vertical engagement: the hand working plane interacts with a block iff
    /// the plane height falls inside the block's vertical span.
    #[inline]
    pub fn hand_engages(&self, palm_z: f32, block: &Block) -> bool {
        palm_z >= block.z && palm_z <= block.z + self.block_height
    }

    /// Two blocks interact iff their vertical spans overlap.
    #[inline]
    pub fn blocks_engage(&self, a: &Block, b: &Block) -> bool {
        a.z < b.z + self.block_height && b.z < a.z + self.block_height
    }
}
