//! Deterministic desk-scale sandbox for dexterous singulation-and-grasping:
//! a quasi-static 2.5-D block world with a parametric hand, an RL environment
//! with a unified piecewise reward, a from-scratch dense-network stack, a PPO
//! trainer with clutter-arrangement curriculum, teacher-student distillation
//! to a point-cloud student policy, and an evaluation bench.
//!
//! Everything is seeded and replayable: identical seeds and configs produce
//! bitwise-identical trajectories on one platform.

pub mod config;
pub mod curriculum;
pub mod distill;
pub mod env;
pub mod evalbench;
pub mod io;
pub mod math;
pub mod nn;
pub mod physics;
pub mod rl;
pub mod rng;
pub mod scenegen;
pub mod trajlog;

pub use config::RunConfig;
pub use env::{Action, Env, EnvConfig, Observation, RewardBranch, RewardBreakdown};
pub use physics::{Block, BlockShape, HandGeometry, HandState, PhysicsConfig, WorldState};
pub use scenegen::{TaskFamily, TaskSpec};
