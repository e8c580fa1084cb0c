//! Command implementations.

use anyhow::{bail, Context, Result};
use serde::Serialize;
use singrasp_core::config::RunConfig;
use singrasp_core::curriculum::{
    run_curriculum, select_teachers, CurriculumDirection, CurriculumPlan, StageEvent,
};
use singrasp_core::distill::{bc_train, collect_dataset, DatasetStats, FrozenEncoder};
use singrasp_core::env::{Action, Env, ObsMode, ACTION_DIM};
use singrasp_core::evalbench::{
    bench_report, evaluate_controller, EvalOptions, PolicyResults, StudentController,
    TeacherController,
};
use singrasp_core::io::{atomic_write, code_version};
use singrasp_core::nn::{CheckpointMeta, MlpPolicy, PolicyCheckpoint};
use singrasp_core::rl::{self, IterRecord};
use singrasp_core::rng::{self, Purpose};
use singrasp_core::scenegen::{self, TaskSpec};
use singrasp_core::trajlog::{TrajHeader, TrajStep, Trajectory};
use singrasp_core::WorldState;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

/// Scene artifact: everything needed to reproduce it exactly.
#[derive(Serialize)]
struct SceneFile<'a> {
    code_version: String,
    config_hash: String,
    task: TaskSpec,
    world: &'a WorldState,
}

pub fn gen(cfg: &RunConfig, family: &str, n: u32, seed: u64, cloud: Option<&Path>) -> Result<()> {
    let token = match family.to_ascii_lowercase().as_str() {
        "so" => "SO".to_string(),
        "dense" | "d" => format!("D-{n}"),
        "random" | "r" => format!("R-{n}"),
        other => bail!("unknown family '{other}' (expected so, dense, or random)"),
    };
    let task = TaskSpec::parse(&token, seed)?;
    let world = scenegen::generate(&task, &cfg.env.physics)?;
    let dir = out_dir(cfg)?;
    let path = dir.join(format!("scene_{}_{}.json", task.name(), seed));
    let file = SceneFile {
        code_version: code_version(),
        config_hash: format!("{:016x}", cfg.hash()),
        task,
        world: &world,
    };
    atomic_write(&path, serde_json::to_string_pretty(&file)?.as_bytes())?;
    println!("wrote {}", path.display());

    if let Some(cloud_path) = cloud {
        let mut stream = rng::stream(seed, Purpose::SceneCloud, 0, 0);
        let points = singrasp_core::physics::sample_pointcloud(
            &world,
            &cfg.env.physics,
            cfg.env.cloud_points,
            &mut stream,
        );
        let rows: Vec<[f32; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        atomic_write(cloud_path, serde_json::to_string(&rows)?.as_bytes())?;
        println!("wrote {} ({} points)", cloud_path.display(), rows.len());
    }
    Ok(())
}

struct MetricsLog {
    file: std::io::BufWriter<fs::File>,
}

impl MetricsLog {
    fn new(path: PathBuf) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        Ok(MetricsLog {
            file: std::io::BufWriter::new(fs::File::create(&path)?),
        })
    }
    fn push<T: Serialize>(&mut self, value: &T) {
        use std::io::Write;
        let line = serde_json::to_string(value).expect("metrics line serializes");
        let _ = writeln!(self.file, "{line}");
        let _ = self.file.flush();
    }
    fn flush(&mut self) -> Result<()> {
        use std::io::Write;
        self.file.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct StageMarker<'a> {
    event: &'a str,
    stage: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_sr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_iter: Option<u32>,
}

pub fn train(cfg: &RunConfig, task_token: &str, init: Option<&Path>) -> Result<()> {
    let task = TaskSpec::parse(task_token, cfg.seed)?;
    let init_ckpt = match init {
        Some(p) => Some(PolicyCheckpoint::load(p).with_context(|| format!("loading {}", p.display()))?),
        None => None,
    };
    let dir = out_dir(cfg)?;
    let mut log = MetricsLog::new(dir.join(format!("metrics_{}.jsonl", task.name())))?;
    let mut hook = |rec: &IterRecord| -> bool {
        log.push(rec);
        if rec.iter % 10 == 0 || rec.sr.is_some() {
            println!(
                "iter {:>5}  reward/step {:>8.3}  grasp% {:>5.1}  attach {:>3}  eps {:>2}/{:<2}  kl {:>7.4}  vloss {:>9.2}  lstd {:>6.2}  sr {}",
                rec.iter,
                rec.mean_reward,
                100.0 * rec.grasp_frac,
                rec.attach_events,
                rec.episodes_succeeded,
                rec.episodes_done,
                rec.kl,
                rec.value_loss,
                rec.mean_log_std,
                rec.sr.map_or("-".to_string(), |s| format!("{s:.2}"))
            );
        }
        true
    };
    let result = rl::train(
        task,
        init_ckpt.as_ref(),
        &cfg.ppo,
        &cfg.env,
        cfg.seed,
        cfg.hash(),
        Some(&mut hook),
    )?;
    log.flush()?;
    let best_path = dir.join(format!("train_{}_best.dsgc", task.name()));
    result.best_checkpoint.save(&best_path)?;
    let final_path = dir.join(format!("train_{}_final.dsgc", task.name()));
    result
        .final_policy
        .to_checkpoint(&CheckpointMeta {
            parent_hash: init_ckpt.as_ref().map(|c| c.hash()),
            config_hash: cfg.hash(),
            seed: cfg.seed,
        })
        .save(&final_path)?;
    println!(
        "best sr {:.2} at iter {} (init sr {:.2}); wrote {}",
        result.best_sr,
        result.best_iter,
        result.init_sr,
        best_path.display()
    );
    Ok(())
}

pub fn curriculum(cfg: &RunConfig, direction: &str, task: Option<&str>) -> Result<()> {
    let dir_enum = match direction.to_ascii_lowercase().as_str() {
        "dense-to-random" => CurriculumDirection::DenseToRandom,
        "random-to-dense" => CurriculumDirection::RandomToDense,
        "from-scratch" => CurriculumDirection::FromScratch,
        other => bail!("unknown curriculum direction '{other}'"),
    };
    let fs_task = match (dir_enum, task) {
        (CurriculumDirection::FromScratch, Some(tok)) => Some(TaskSpec::parse(tok, cfg.seed)?),
        (CurriculumDirection::FromScratch, None) => {
            bail!("from-scratch curriculum needs --task")
        }
        _ => None,
    };
    let plan = CurriculumPlan::new(dir_enum, cfg.seed, cfg.curriculum.iterations_per_stage, fs_task);
    let dir = out_dir(cfg)?;
    let mut log = MetricsLog::new(dir.join(format!("metrics_curriculum_{direction}.jsonl")))?;
    let mut hook = |ev: StageEvent<'_>| match ev {
        StageEvent::StageStart { index, task } => {
            println!("stage {index}: {}", task.name());
            log.push(&StageMarker {
                event: "stage_start",
                stage: task.name(),
                best_sr: None,
                best_iter: None,
            });
        }
        StageEvent::Iter(rec) => log.push(rec),
        StageEvent::StageEnd {
            index,
            best_sr,
            best_iter,
        } => {
            println!("stage {index} done: best sr {best_sr:.2} at iter {best_iter}");
            log.push(&StageMarker {
                event: "stage_end",
                stage: index.to_string(),
                best_sr: Some(best_sr),
                best_iter: Some(best_iter),
            });
        }
    };
    let result = run_curriculum(&plan, &cfg.ppo, &cfg.env, cfg.seed, cfg.hash(), Some(&mut hook))?;
    log.flush()?;
    for stage in &result.stages {
        let path = dir.join(format!("stage_{}_best.dsgc", stage.task.name()));
        stage.best_checkpoint.save(&path)?;
        println!(
            "stage {}: best sr {:.2} at iter {} -> {}",
            stage.task.name(),
            stage.best_sr,
            stage.best_iter,
            path.display()
        );
    }
    if dir_enum != CurriculumDirection::FromScratch {
        let (dense, random) = select_teachers(&result)?;
        let dense_path = dir.join("teacher_dense.dsgc");
        let random_path = dir.join("teacher_random.dsgc");
        dense.best_checkpoint.save(&dense_path)?;
        random.best_checkpoint.save(&random_path)?;
        println!("teachers: {} and {}", dense_path.display(), random_path.display());
    }
    Ok(())
}

/// Dataset manifest: counts, mix, seeds, flags, and provenance.
#[derive(Serialize)]
struct Manifest {
    code_version: String,
    config_hash: String,
    stats: DatasetStats,
    episode_files: Vec<String>,
    flagged_episodes: Vec<usize>,
}

pub fn collect(
    cfg: &RunConfig,
    dense_teacher: &Path,
    random_teacher: &Path,
    episodes: Option<usize>,
) -> Result<()> {
    let dense = MlpPolicy::from_checkpoint(&PolicyCheckpoint::load(dense_teacher)?)?;
    let random = MlpPolicy::from_checkpoint(&PolicyCheckpoint::load(random_teacher)?)?;
    let encoder = FrozenEncoder::new(cfg.distill.encoder_seed);
    let total = episodes.unwrap_or(cfg.distill.episodes);
    if total == 0 {
        bail!("--episodes must be positive");
    }
    let dataset = collect_dataset(&dense, &random, &encoder, total, cfg.seed, &cfg.env)?;
    let dir = out_dir(cfg)?.join("dataset");
    fs::create_dir_all(&dir)?;
    let mut episode_files = Vec::new();
    let mut flagged = Vec::new();
    for (i, ep) in dataset.episodes.iter().enumerate() {
        let name = format!("episode_{i:04}.dsgt");
        let mut steps = Vec::with_capacity(ep.steps);
        for t in 0..ep.steps {
            let mut raw = [0.0f32; ACTION_DIM];
            raw.copy_from_slice(&ep.actions[t * ACTION_DIM..(t + 1) * ACTION_DIM]);
            let mut applied = [0.0f32; ACTION_DIM];
            applied.copy_from_slice(&ep.applied_actions[t * ACTION_DIM..(t + 1) * ACTION_DIM]);
            steps.push(TrajStep {
                t: t as u32,
                observation: ep.observations
                    [t * ObsMode::Student.dim()..(t + 1) * ObsMode::Student.dim()]
                    .to_vec(),
                raw_action: raw,
                applied_action: applied,
                breakdown: ep.breakdowns[t],
                done: t + 1 == ep.steps,
                success: t + 1 == ep.steps && ep.success,
            });
        }
        let traj = Trajectory {
            header: TrajHeader {
                task: ep.task,
                config_hash: cfg.hash(),
                t_max: cfg.env.horizon,
                obs_dim: ObsMode::Student.dim() as u32,
            },
            steps,
        };
        traj.save(&dir.join(&name))?;
        if ep.flagged {
            flagged.push(i);
        }
        episode_files.push(name);
    }
    let manifest = Manifest {
        code_version: code_version(),
        config_hash: format!("{:016x}", cfg.hash()),
        stats: dataset.stats,
        episode_files,
        flagged_episodes: flagged,
    };
    atomic_write(
        &dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    println!("wrote dataset with {total} episodes to {}", dir.display());
    Ok(())
}

/// Rebuild a distillation dataset from a dataset directory.
fn load_dataset(dir: &Path) -> Result<singrasp_core::distill::DistillDataset> {
    let manifest_text = fs::read_to_string(dir.join("manifest.json"))
        .with_context(|| format!("reading {}/manifest.json", dir.display()))?;
    let manifest: serde_json::Value = serde_json::from_str(&manifest_text)?;
    let stats: DatasetStats = serde_json::from_value(manifest["stats"].clone())?;
    let files: Vec<String> = serde_json::from_value(manifest["episode_files"].clone())?;
    let flagged: Vec<usize> = serde_json::from_value(manifest["flagged_episodes"].clone())?;
    let mut episodes = Vec::with_capacity(files.len());
    for (i, name) in files.iter().enumerate() {
        let traj = Trajectory::load(&dir.join(name))?;
        let steps = traj.steps.len();
        let mut observations = Vec::with_capacity(steps * traj.header.obs_dim as usize);
        let mut actions = Vec::with_capacity(steps * ACTION_DIM);
        let mut applied_actions = Vec::with_capacity(steps * ACTION_DIM);
        let mut breakdowns = Vec::with_capacity(steps);
        let mut success = false;
        for s in &traj.steps {
            observations.extend_from_slice(&s.observation);
            actions.extend_from_slice(&s.raw_action);
            applied_actions.extend_from_slice(&s.applied_action);
            breakdowns.push(s.breakdown);
            success |= s.success;
        }
        episodes.push(singrasp_core::distill::Episode {
            task: traj.header.task,
            steps,
            success,
            flagged: flagged.contains(&i),
            observations,
            actions,
            applied_actions,
            breakdowns,
        });
    }
    Ok(singrasp_core::distill::DistillDataset { episodes, stats })
}

pub fn distill(cfg: &RunConfig, dataset_dir: &Path) -> Result<()> {
    let dataset = load_dataset(dataset_dir)?;
    let encoder = FrozenEncoder::new(cfg.distill.encoder_seed);
    let hash_before = encoder.params_hash();
    let result = bc_train(&dataset, &cfg.distill.bc, cfg.seed, cfg.hash())?;
    anyhow::ensure!(
        encoder.params_hash() == hash_before,
        "frozen encoder parameters changed during training"
    );
    let dir = out_dir(cfg)?;
    let best_path = dir.join("student_best.dsgc");
    result.best_checkpoint.save(&best_path)?;
    let final_path = dir.join("student_final.dsgc");
    result.final_checkpoint.save(&final_path)?;
    println!(
        "student: {} epochs, first-epoch holdout mse {:.6}, final {:.6}, best epoch {} -> {}",
        cfg.distill.bc.epochs,
        result.holdout_losses.get(1).copied().unwrap_or(f64::NAN),
        result.holdout_losses.last().copied().unwrap_or(f64::NAN),
        result.best_epoch,
        best_path.display()
    );
    Ok(())
}

/// Run one logged evaluation episode with deterministic-mean actions.
fn logged_episode(
    policy: &MlpPolicy,
    student: Option<&FrozenEncoder>,
    task: TaskSpec,
    cfg: &RunConfig,
) -> Result<Trajectory> {
    let mut env = Env::new(task, cfg.env.clone())?;
    let mode = if student.is_some() {
        ObsMode::Student
    } else {
        ObsMode::Teacher
    };
    let mut steps = Vec::new();
    while !env.done {
        let obs = env.observe(mode, student);
        let mean = policy.act_mean(&obs.data, 1);
        let mut raw = [0.0f32; ACTION_DIM];
        raw.copy_from_slice(&mean);
        let t = env.t;
        let (applied, breakdown, done, info) = env.step(&Action(raw));
        steps.push(TrajStep {
            t,
            observation: obs.data,
            raw_action: raw,
            applied_action: applied.0,
            breakdown,
            done,
            success: info.success,
        });
    }
    Ok(Trajectory {
        header: TrajHeader {
            task,
            config_hash: cfg.hash(),
            t_max: cfg.env.horizon,
            obs_dim: mode.dim() as u32,
        },
        steps,
    })
}

pub fn eval(
    cfg: &RunConfig,
    policy_path: &Path,
    tasks: &[TaskSpec],
    student: bool,
    trajectory_dir: Option<&Path>,
) -> Result<()> {
    let policy = MlpPolicy::from_checkpoint(&PolicyCheckpoint::load(policy_path)?)?;
    let encoder = FrozenEncoder::new(cfg.distill.encoder_seed);
    let expected_dim = if student {
        ObsMode::Student.dim()
    } else {
        ObsMode::Teacher.dim()
    };
    if policy.input_dim != expected_dim {
        bail!(
            "checkpoint input width {} does not match {} observations ({})",
            policy.input_dim,
            if student { "student" } else { "teacher" },
            expected_dim
        );
    }
    let opts = EvalOptions {
        n_envs: cfg.eval.n_envs,
        episodes_per_env: cfg.eval.episodes_per_env,
        seed: cfg.seed,
    };
    let mut reports = Vec::new();
    for task in tasks {
        let report = if student {
            evaluate_controller(
                &StudentController {
                    policy: &policy,
                    encoder: &encoder,
                },
                *task,
                opts,
                &cfg.env,
            )
        } else {
            evaluate_controller(&TeacherController { policy: &policy }, *task, opts, &cfg.env)
        };
        println!(
            "{}: sr {:.2} ({} / {}), as {}",
            task.name(),
            report.sr,
            report.successes,
            report.episodes,
            report
                .avg_steps
                .map_or("-".to_string(), |a| format!("{a:.1}"))
        );
        reports.push(report);
    }
    let dir = out_dir(cfg)?;
    let name = policy_path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "policy".to_string());
    let bench = bench_report(
        tasks.iter().map(|t| t.name()).collect(),
        vec![PolicyResults {
            policy: name.clone(),
            reports,
        }],
    );
    let results_path = dir.join(format!("results_{name}.json"));
    atomic_write(&results_path, bench.to_json().as_bytes())?;
    let table_path = dir.join(format!("results_{name}.txt"));
    let mut table = String::new();
    writeln!(table, "code {} config {:016x}", code_version(), cfg.hash())?;
    table.push_str(&bench.to_table());
    atomic_write(&table_path, table.as_bytes())?;
    println!("wrote {} and {}", results_path.display(), table_path.display());

    if let Some(tdir) = trajectory_dir {
        fs::create_dir_all(tdir)?;
        for task in tasks {
            let seed = rng::derive_seed(opts.seed, Purpose::EpisodeSeed, 0, 0);
            let traj = logged_episode(
                &policy,
                if student { Some(&encoder) } else { None },
                TaskSpec { seed, ..*task },
                cfg,
            )?;
            let path = tdir.join(format!("episode_{}_{}.dsgt", task.name(), seed));
            traj.save(&path)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

pub fn replay(cfg: &RunConfig, trajectory: &Path) -> Result<()> {
    let traj = Trajectory::load(trajectory)
        .with_context(|| format!("loading {}", trajectory.display()))?;
    if traj.header.config_hash != cfg.hash() {
        eprintln!(
            "warning: trajectory config hash {:016x} differs from current config {:016x}",
            traj.header.config_hash,
            cfg.hash()
        );
    }
    let student = traj.header.obs_dim as usize == ObsMode::Student.dim();
    let encoder = FrozenEncoder::new(cfg.distill.encoder_seed);
    let mode = if student {
        ObsMode::Student
    } else {
        ObsMode::Teacher
    };
    let mut env = Env::new(traj.header.task, cfg.env.clone())?;
    let mut mismatches = 0usize;
    for (i, step) in traj.steps.iter().enumerate() {
        let obs = env.observe(mode, if student { Some(&encoder) } else { None });
        if obs.data.len() != step.observation.len()
            || obs
                .data
                .iter()
                .zip(step.observation.iter())
                .any(|(a, b)| a.to_bits() != b.to_bits())
        {
            mismatches += 1;
            eprintln!("step {i}: observation mismatch");
        }
        let (applied, breakdown, done, info) = env.step(&Action(step.raw_action));
        if applied
            .0
            .iter()
            .zip(step.applied_action.iter())
            .any(|(a, b)| a.to_bits() != b.to_bits())
        {
            mismatches += 1;
            eprintln!("step {i}: applied action mismatch");
        }
        if breakdown.total.to_bits() != step.breakdown.total.to_bits() {
            mismatches += 1;
            eprintln!(
                "step {i}: reward mismatch {} vs {}",
                breakdown.total, step.breakdown.total
            );
        }
        if done != step.done || info.success != step.success {
            mismatches += 1;
            eprintln!("step {i}: termination mismatch");
        }
        if done {
            break;
        }
    }
    if mismatches > 0 {
        bail!("replay found {mismatches} mismatches");
    }
    println!(
        "replay of {} steps verified, zero mismatches",
        traj.steps.len()
    );
    Ok(())
}
