//! Binary trajectory log: header + fixed-width per-step records, all numbers
//! little-endian 32-bit floats. Readers reject unknown format versions.

use crate::env::{RewardBranch, RewardBreakdown, ACTION_DIM};
use crate::scenegen::{TaskFamily, TaskSpec};
use std::path::Path;
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"DSGT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TrajError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic (not a trajectory log)")]
    BadMagic,
    #[error("unsupported trajectory format version {0}")]
    BadVersion(u32),
    #[error("truncated trajectory log")]
    Truncated,
    #[error("bad family tag {0}")]
    BadFamily(u8),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajHeader {
    pub task: TaskSpec,
    pub config_hash: u64,
    pub t_max: u32,
    pub obs_dim: u32,
}

/// One logged control step.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajStep {
    pub t: u32,
    pub observation: Vec<f32>,
    pub raw_action: [f32; ACTION_DIM],
    pub applied_action: [f32; ACTION_DIM],
    pub breakdown: RewardBreakdown,
    pub done: bool,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub header: TrajHeader,
    pub steps: Vec<TrajStep>,
}

fn family_tag(f: TaskFamily) -> u8 {
    match f {
        TaskFamily::SO => 0,
        TaskFamily::Dense => 1,
        TaskFamily::Random => 2,
    }
}

fn family_from(tag: u8) -> Result<TaskFamily, TrajError> {
    match tag {
        0 => Ok(TaskFamily::SO),
        1 => Ok(TaskFamily::Dense),
        2 => Ok(TaskFamily::Random),
        other => Err(TrajError::BadFamily(other)),
    }
}

fn branch_tag(b: RewardBranch) -> u8 {
    match b {
        RewardBranch::Approach => 0,
        RewardBranch::Grasp => 1,
    }
}

impl Trajectory {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(family_tag(self.header.task.family));
        out.push(self.header.task.n_obstacles as u8);
        out.extend_from_slice(&self.header.task.seed.to_le_bytes());
        out.extend_from_slice(&self.header.config_hash.to_le_bytes());
        out.extend_from_slice(&self.header.t_max.to_le_bytes());
        out.extend_from_slice(&self.header.obs_dim.to_le_bytes());
        out.extend_from_slice(&(self.steps.len() as u32).to_le_bytes());
        for s in &self.steps {
            out.extend_from_slice(&s.t.to_le_bytes());
            debug_assert_eq!(s.observation.len(), self.header.obs_dim as usize);
            for v in &s.observation {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for v in &s.raw_action {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for v in &s.applied_action {
                out.extend_from_slice(&v.to_le_bytes());
            }
            let b = &s.breakdown;
            for v in [
                b.palm,
                b.joint,
                b.fingertip,
                b.lift,
                b.goal,
                b.singulation,
                b.bonus,
                b.d_palm,
                b.d_link,
                b.total,
            ] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.push(branch_tag(b.branch));
            out.push(s.done as u8);
            out.push(s.success as u8);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrajError> {
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8], TrajError> {
            if *pos + n > bytes.len() {
                return Err(TrajError::Truncated);
            }
            let s = &bytes[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        let u32_at = |pos: &mut usize| -> Result<u32, TrajError> {
            let b = take(pos, 4)?;
            Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        };
        let u64_at = |pos: &mut usize| -> Result<u64, TrajError> {
            let b = take(pos, 8)?;
            Ok(u64::from_le_bytes(b.try_into().unwrap()))
        };
        let f32_at = |pos: &mut usize| -> Result<f32, TrajError> {
            let b = take(pos, 4)?;
            Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        };

        if take(&mut pos, 4)? != MAGIC {
            return Err(TrajError::BadMagic);
        }
        let version = u32_at(&mut pos)?;
        if version != FORMAT_VERSION {
            return Err(TrajError::BadVersion(version));
        }
        let family = family_from(take(&mut pos, 1)?[0])?;
        let n_obstacles = take(&mut pos, 1)?[0] as u32;
        let seed = u64_at(&mut pos)?;
        let config_hash = u64_at(&mut pos)?;
        let t_max = u32_at(&mut pos)?;
        let obs_dim = u32_at(&mut pos)?;
        let n_steps = u32_at(&mut pos)? as usize;
        let header = TrajHeader {
            task: TaskSpec::new(family, n_obstacles, seed),
            config_hash,
            t_max,
            obs_dim,
        };
        let mut steps = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            let t = u32_at(&mut pos)?;
            let mut observation = Vec::with_capacity(obs_dim as usize);
            for _ in 0..obs_dim {
                observation.push(f32_at(&mut pos)?);
            }
            let mut raw_action = [0.0f32; ACTION_DIM];
            for v in raw_action.iter_mut() {
                *v = f32_at(&mut pos)?;
            }
            let mut applied_action = [0.0f32; ACTION_DIM];
            for v in applied_action.iter_mut() {
                *v = f32_at(&mut pos)?;
            }
            let mut vals = [0.0f32; 10];
            for v in vals.iter_mut() {
                *v = f32_at(&mut pos)?;
            }
            let branch = if take(&mut pos, 1)?[0] == 0 {
                RewardBranch::Approach
            } else {
                RewardBranch::Grasp
            };
            let done = take(&mut pos, 1)?[0] != 0;
            let success = take(&mut pos, 1)?[0] != 0;
            steps.push(TrajStep {
                t,
                observation,
                raw_action,
                applied_action,
                breakdown: RewardBreakdown {
                    palm: vals[0],
                    joint: vals[1],
                    fingertip: vals[2],
                    lift: vals[3],
                    goal: vals[4],
                    singulation: vals[5],
                    bonus: vals[6],
                    d_palm: vals[7],
                    d_link: vals[8],
                    total: vals[9],
                    branch,
                },
                done,
                success,
            });
        }
        Ok(Trajectory { header, steps })
    }

    pub fn save(&self, path: &Path) -> Result<(), TrajError> {
        crate::io::atomic_write(path, &self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TrajError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::RewardBranch;

    fn sample_traj() -> Trajectory {
        let breakdown = RewardBreakdown {
            palm: -0.1,
            joint: -1.2,
            fingertip: -0.3,
            lift: 0.2,
            goal: 0.4,
            singulation: 2.5,
            bonus: 0.3,
            branch: RewardBranch::Grasp,
            d_palm: 0.05,
            d_link: 0.01,
            total: 1.8,
        };
        Trajectory {
            header: TrajHeader {
                task: TaskSpec::new(TaskFamily::Dense, 6, 42),
                config_hash: 0xDEAD_BEEF,
                t_max: 300,
                obs_dim: 168,
            },
            steps: vec![TrajStep {
                t: 1,
                observation: (0..168).map(|i| i as f32 * 0.01).collect(),
                raw_action: [0.1; ACTION_DIM],
                applied_action: [0.05; ACTION_DIM],
                breakdown,
                done: false,
                success: false,
            }],
        }
    }

    #[test]
    fn roundtrip_exact() {
        let t = sample_traj();
        let back = Trajectory::from_bytes(&t.to_bytes()).unwrap();
        assert_eq!(t.header, back.header);
        assert_eq!(t.steps.len(), back.steps.len());
        let (a, b) = (&t.steps[0], &back.steps[0]);
        assert_eq!(a.observation, b.observation);
        assert_eq!(a.raw_action, b.raw_action);
        assert_eq!(a.breakdown.total.to_bits(), b.breakdown.total.to_bits());
        assert_eq!(a.breakdown.branch, b.breakdown.branch);
    }

    #[test]
    fn unknown_version_rejected() {
        let mut bytes = sample_traj().to_bytes();
        bytes[4..8].copy_from_slice(&9u32.to_le_bytes());
        assert!(matches!(
            Trajectory::from_bytes(&bytes),
            Err(TrajError::BadVersion(9))
        ));
    }

    #[test]
    fn truncation_rejected() {
        let bytes = sample_traj().to_bytes();
        assert!(matches!(
            Trajectory::from_bytes(&bytes[..bytes.len() - 1]),
            Err(TrajError::Truncated)
        ));
    }
}
