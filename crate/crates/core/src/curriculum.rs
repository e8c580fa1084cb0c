//! Clutter-arrangement curriculum: staged training schedules and teacher
//! selection.

use crate::env::EnvConfig;
use crate::nn::PolicyCheckpoint;
use crate::rl::{train, IterRecord, PpoConfig};
use crate::scenegen::{SceneError, TaskFamily, TaskSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurriculumDirection {
    DenseToRandom,
    RandomToDense,
    FromScratch,
}

/// Ordered stage list plus per-stage iteration budget.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurriculumPlan {
    pub direction: CurriculumDirection,
    pub stages: Vec<TaskSpec>,
    pub iterations_per_stage: u32,
}

impl CurriculumPlan {
    /// The fixed schedules. DenseToRandom: SO, D-4, D-6, D-8, R-4, R-6, R-8;
    /// RandomToDense swaps the two clutter arcs; FromScratch is a single
    /// stage on the given task.
    pub fn new(
        direction: CurriculumDirection,
        seed: u64,
        iterations_per_stage: u32,
        from_scratch_task: Option<TaskSpec>,
    ) -> Self {
        let stage = |family, n, k: u64| TaskSpec::new(family, n, seed.wrapping_add(k));
        let stages = match direction {
            CurriculumDirection::DenseToRandom => vec![
                stage(TaskFamily::SO, 0, 0),
                stage(TaskFamily::Dense, 4, 1),
                stage(TaskFamily::Dense, 6, 2),
                stage(TaskFamily::Dense, 8, 3),
                stage(TaskFamily::Random, 4, 4),
                stage(TaskFamily::Random, 6, 5),
                stage(TaskFamily::Random, 8, 6),
            ],
            CurriculumDirection::RandomToDense => vec![
                stage(TaskFamily::SO, 0, 0),
                stage(TaskFamily::Random, 4, 1),
                stage(TaskFamily::Random, 6, 2),
                stage(TaskFamily::Random, 8, 3),
                stage(TaskFamily::Dense, 4, 4),
                stage(TaskFamily::Dense, 6, 5),
                stage(TaskFamily::Dense, 8, 6),
            ],
            CurriculumDirection::FromScratch => {
                vec![from_scratch_task.expect("FromScratch needs a task")]
            }
        };
        CurriculumPlan {
            direction,
            stages,
            iterations_per_stage,
        }
    }
}

/// One finished stage.
#[derive(Clone)]
pub struct StageResult {
    pub task: TaskSpec,
    pub best_checkpoint: PolicyCheckpoint,
    pub best_sr: f64,
    pub best_iter: u32,
    pub history: Vec<IterRecord>,
}

/// All per-stage best checkpoints, keyed by stage order.
pub struct CurriculumResult {
    pub direction: CurriculumDirection,
    pub stages: Vec<StageResult>,
}

#[derive(Debug, Error)]
pub enum CurriculumError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("curriculum results missing stage {0}")]
    MissingStage(String),
}

/// Stage event passed to the progress hook.
pub enum StageEvent<'a> {
    StageStart { index: usize, task: &'a TaskSpec },
    Iter(&'a IterRecord),
    StageEnd { index: usize, best_sr: f64, best_iter: u32 },
}

/// Run the stages strictly in order; stage k initializes from stage k-1's
/// best checkpoint (FromScratch starts fresh). A stage with zero successes
/// still advances; the schedule is fixed, not gated.
pub fn run_curriculum(
    plan: &CurriculumPlan,
    cfg: &PpoConfig,
    env_cfg: &EnvConfig,
    seed: u64,
    config_hash: u64,
    mut hook: Option<&mut dyn FnMut(StageEvent<'_>)>,
) -> Result<CurriculumResult, CurriculumError> {
    let mut stages = Vec::with_capacity(plan.stages.len());
    let mut init: Option<PolicyCheckpoint> = None;
    let stage_cfg = PpoConfig {
        iterations: plan.iterations_per_stage,
        ..cfg.clone()
    };
    for (index, task) in plan.stages.iter().enumerate() {
        if let Some(h) = hook.as_deref_mut() {
            h(StageEvent::StageStart { index, task });
        }
        let stage_seed = crate::rng::derive_seed(seed, crate::rng::Purpose::EpisodeSeed, index as u64, 1);
        let mut iter_hook = |rec: &IterRecord| -> bool {
            if let Some(h) = hook.as_deref_mut() {
                h(StageEvent::Iter(rec));
            }
            true
        };
        let result = train(
            *task,
            init.as_ref(),
            &stage_cfg,
            env_cfg,
            stage_seed,
            config_hash,
            Some(&mut iter_hook),
        )?;
        if result.best_sr == 0.0 {
            eprintln!(
                "warning: stage {} ({}) finished with zero success rate; advancing anyway",
                index,
                task.name()
            );
        }
        if let Some(h) = hook.as_deref_mut() {
            h(StageEvent::StageEnd {
                index,
                best_sr: result.best_sr,
                best_iter: result.best_iter,
            });
        }
        init = Some(result.best_checkpoint.clone());
        stages.push(StageResult {
            task: *task,
            best_checkpoint: result.best_checkpoint,
            best_sr: result.best_sr,
            best_iter: result.best_iter,
            history: result.history,
        });
    }
    Ok(CurriculumResult {
        direction: plan.direction,
        stages,
    })
}

/// The dense-clutter teacher is the D-8 stage best; the random-clutter
/// teacher is the R-8 stage best, whichever direction produced them.
pub fn select_teachers(
    result: &CurriculumResult,
) -> Result<(&StageResult, &StageResult), CurriculumError> {
    let find = |family: TaskFamily| {
        result
            .stages
            .iter()
            .find(|s| s.task.family == family && s.task.n_obstacles == 8)
    };
    let dense = find(TaskFamily::Dense)
        .ok_or_else(|| CurriculumError::MissingStage("D-8".to_string()))?;
    let random = find(TaskFamily::Random)
        .ok_or_else(|| CurriculumError::MissingStage("R-8".to_string()))?;
    Ok((dense, random))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules_fixed() {
        let plan = CurriculumPlan::new(CurriculumDirection::DenseToRandom, 1, 10, None);
        let names: Vec<String> = plan.stages.iter().map(|s| s.name()).collect();
        assert_eq!(names, ["SO", "D-4", "D-6", "D-8", "R-4", "R-6", "R-8"]);
        let plan = CurriculumPlan::new(CurriculumDirection::RandomToDense, 1, 10, None);
        let names: Vec<String> = plan.stages.iter().map(|s| s.name()).collect();
        assert_eq!(names, ["SO", "R-4", "R-6", "R-8", "D-4", "D-6", "D-8"]);
        let plan = CurriculumPlan::new(
            CurriculumDirection::FromScratch,
            1,
            10,
            Some(TaskSpec::new(TaskFamily::Dense, 8, 5)),
        );
        assert_eq!(plan.stages.len(), 1);
        assert_eq!(plan.stages[0].name(), "D-8");
    }

    #[test]
    fn teacher_selection_roles_fixed() {
        use crate::nn::PolicyCheckpoint;
        let mk = |family, n| StageResult {
            task: TaskSpec::new(family, n, 0),
            best_checkpoint: PolicyCheckpoint::default(),
            best_sr: 0.5,
            best_iter: 1,
            history: Vec::new(),
        };
        // Dense-to-random ordering.
        let result = CurriculumResult {
            direction: CurriculumDirection::DenseToRandom,
            stages: vec![
                mk(TaskFamily::SO, 0),
                mk(TaskFamily::Dense, 4),
                mk(TaskFamily::Dense, 8),
                mk(TaskFamily::Random, 8),
            ],
        };
        let (d, r) = select_teachers(&result).unwrap();
        assert_eq!(d.task.name(), "D-8");
        assert_eq!(r.task.name(), "R-8");
        // Random-to-dense: roles stay tied to the families.
        let result = CurriculumResult {
            direction: CurriculumDirection::RandomToDense,
            stages: vec![
                mk(TaskFamily::Random, 8),
                mk(TaskFamily::Dense, 8),
            ],
        };
        let (d, r) = select_teachers(&result).unwrap();
        assert_eq!(d.task.name(), "D-8");
        assert_eq!(r.task.name(), "R-8");
    }

    #[test]
    fn missing_stage_errors() {
        let result = CurriculumResult {
            direction: CurriculumDirection::FromScratch,
            stages: vec![],
        };
        assert!(matches!(
            select_teachers(&result),
            Err(CurriculumError::MissingStage(_))
        ));
    }
}
