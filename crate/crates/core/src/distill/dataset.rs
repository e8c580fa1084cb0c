//! Teacher rollouts packaged for behavior cloning, with the fixed task mix.

use super::FrozenEncoder;
use crate::env::{Action, Env, EnvConfig, ObsMode, RewardBreakdown, ACTION_DIM};
use crate::nn::MlpPolicy;
use crate::rng::{self, Purpose};
use crate::scenegen::{SceneError, TaskFamily, TaskSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Dataset mix: (family, n, proportion). D-4 and R-4 carry 10% each; the
/// rest 20% each.
pub const TASK_MIX: [(TaskFamily, u32, f64); 6] = [
    (TaskFamily::Dense, 4, 0.10),
    (TaskFamily::Random, 4, 0.10),
    (TaskFamily::Dense, 6, 0.20),
    (TaskFamily::Dense, 8, 0.20),
    (TaskFamily::Random, 6, 0.20),
    (TaskFamily::Random, 8, 0.20),
];

/// Episode counts per mix entry by largest remainder, so each count sits
/// within one episode of proportion x total and the counts sum to total.
pub fn mix_counts(total: usize) -> [usize; 6] {
    let mut counts = [0usize; 6];
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(6);
    let mut assigned = 0usize;
    for (i, (_, _, p)) in TASK_MIX.iter().enumerate() {
        let exact = p * total as f64;
        counts[i] = exact.floor() as usize;
        assigned += counts[i];
        remainders.push((i, exact - exact.floor()));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for (i, _) in remainders.iter().take(total - assigned) {
        counts[*i] += 1;
    }
    counts
}

/// One stored teacher episode: student observations paired with the teacher's
/// raw mean actions, plus the step records needed to write a trajectory log.
#[derive(Clone, Debug)]
pub struct Episode {
    pub task: TaskSpec,
    pub steps: usize,
    pub success: bool,
    /// True when every retry failed and the best-reward rollout was kept.
    pub flagged: bool,
    /// [steps, STUDENT_DIM] row-major.
    pub observations: Vec<f32>,
    /// [steps, 22]: the BC regression targets.
    pub actions: Vec<f32>,
    /// [steps, 22]: post-smoothing applied actions.
    pub applied_actions: Vec<f32>,
    pub breakdowns: Vec<RewardBreakdown>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total_episodes: usize,
    pub counts: Vec<(String, usize)>,
    pub flagged: usize,
    pub total_steps: usize,
    pub seed: u64,
}

pub struct DistillDataset {
    pub episodes: Vec<Episode>,
    pub stats: DatasetStats,
}

/// Roll one episode under deterministic-mean teacher actions, recording
/// student observations.
fn rollout_episode(
    teacher: &MlpPolicy,
    encoder: &FrozenEncoder,
    task: TaskSpec,
    env_cfg: &EnvConfig,
) -> Result<Episode, SceneError> {
    let mut env = Env::new(task, env_cfg.clone())?;
    let mut ep = Episode {
        task,
        steps: 0,
        success: false,
        flagged: false,
        observations: Vec::new(),
        actions: Vec::new(),
        applied_actions: Vec::new(),
        breakdowns: Vec::new(),
    };
    while !env.done {
        let teacher_obs = env.observe(ObsMode::Teacher, None);
        let student_obs = env.observe(ObsMode::Student, Some(encoder));
        let mean = teacher.act_mean(&teacher_obs.data, 1);
        let mut action = [0.0f32; ACTION_DIM];
        action.copy_from_slice(&mean);
        let (applied, breakdown, _, _) = env.step(&Action(action));
        ep.observations.extend_from_slice(&student_obs.data);
        ep.actions.extend_from_slice(&action);
        ep.applied_actions.extend_from_slice(&applied.0);
        ep.breakdowns.push(breakdown);
        ep.steps += 1;
    }
    ep.success = env.success;
    Ok(ep)
}

const RETRIES_PER_SLOT: u64 = 5;

/// Collect `total_episodes` teacher episodes under the fixed mix. The dense
/// teacher drives D-n tasks, the random teacher R-n tasks. Only successful
/// episodes are stored; a slot whose retries all fail keeps its best-reward
/// rollout and is flagged.
pub fn collect_dataset(
    dense_teacher: &MlpPolicy,
    random_teacher: &MlpPolicy,
    encoder: &FrozenEncoder,
    total_episodes: usize,
    seed: u64,
    env_cfg: &EnvConfig,
) -> Result<DistillDataset, SceneError> {
    let counts = mix_counts(total_episodes);
    let mut slots: Vec<(usize, usize)> = Vec::with_capacity(total_episodes);
    for (task_idx, count) in counts.iter().enumerate() {
        for k in 0..*count {
            slots.push((task_idx, k));
        }
    }
    let episodes: Vec<Result<Episode, SceneError>> = slots
        .par_iter()
        .map(|&(task_idx, k)| {
            let (family, n, _) = TASK_MIX[task_idx];
            let teacher = match family {
                TaskFamily::Dense => dense_teacher,
                TaskFamily::Random => random_teacher,
                TaskFamily::SO => unreachable!("mix has no SO entry"),
            };
            let mut best: Option<Episode> = None;
            for retry in 0..=RETRIES_PER_SLOT {
                let ep_seed = rng::derive_seed(
                    seed,
                    Purpose::EpisodeSeed,
                    (task_idx * 1_000_003 + k) as u64,
                    retry,
                );
                let task = TaskSpec::new(family, n, ep_seed);
                let ep = rollout_episode(teacher, encoder, task, env_cfg)?;
                if ep.success {
                    return Ok(ep);
                }
                let better = match &best {
                    None => true,
                    Some(b) => {
                        episode_reward(&ep) > episode_reward(b)
                    }
                };
                if better {
                    best = Some(ep);
                }
            }
            let mut ep = best.expect("at least one rollout per slot");
            ep.flagged = true;
            Ok(ep)
        })
        .collect();

    let mut out = Vec::with_capacity(total_episodes);
    for ep in episodes {
        out.push(ep?);
    }
    let mut stat_counts = Vec::new();
    for (i, (family, n, _)) in TASK_MIX.iter().enumerate() {
        stat_counts.push((TaskSpec::new(*family, *n, 0).name(), counts[i]));
    }
    let stats = DatasetStats {
        total_episodes,
        counts: stat_counts,
        flagged: out.iter().filter(|e| e.flagged).count(),
        total_steps: out.iter().map(|e| e.steps).sum(),
        seed,
    };
    Ok(DistillDataset {
        episodes: out,
        stats,
    })
}

fn episode_reward(ep: &Episode) -> f64 {
    ep.breakdowns.iter().map(|b| b.total as f64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_counts_paper_total() {
        assert_eq!(mix_counts(1000), [100, 100, 200, 200, 200, 200]);
    }

    #[test]
    fn mix_counts_small_total() {
        assert_eq!(mix_counts(10), [1, 1, 2, 2, 2, 2]);
    }

    #[test]
    fn mix_counts_within_one_of_proportions() {
        for total in [7usize, 23, 60, 137, 999] {
            let counts = mix_counts(total);
            assert_eq!(counts.iter().sum::<usize>(), total, "total {total}");
            for (i, (_, _, p)) in TASK_MIX.iter().enumerate() {
                let exact = p * total as f64;
                assert!(
                    (counts[i] as f64 - exact).abs() <= 1.0,
                    "total {total}, task {i}: {} vs {exact}",
                    counts[i]
                );
            }
        }
    }
}
