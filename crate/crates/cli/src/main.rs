//! Command-line entry point: scene generation, training, curriculum runs,
//! dataset collection, distillation, evaluation, and trajectory replay.
//!
//! Every artifact embeds the config hash, code version, and seeds needed to
//! reproduce it; all writes are atomic (temp file + rename).

mod run;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use singrasp_core::config::RunConfig;
use singrasp_core::scenegen::TaskSpec;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "singrasp", version, about = "Deterministic tabletop singulation-and-grasping sandbox")]
struct Cli {
    /// Run configuration file (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the output directory from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene and write it as JSON (optionally with a point cloud).
    Gen {
        /// Task family: so, dense, or random.
        #[arg(long)]
        family: String,
        /// Obstacle count (0 for so; 1..=8 otherwise).
        #[arg(long, default_value_t = 0)]
        n: u32,
        #[arg(long)]
        seed: u64,
        /// Also dump the sampled scene point cloud to this file.
        #[arg(long)]
        cloud: Option<PathBuf>,
    },
    /// Train PPO on one task.
    Train {
        /// Task token: SO, D-4..D-8, R-4..R-8.
        #[arg(long)]
        task: String,
        /// Warm-start checkpoint.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Run a staged curriculum and save per-stage checkpoints plus teachers.
    Curriculum {
        /// dense-to-random, random-to-dense, or from-scratch.
        #[arg(long)]
        direction: String,
        /// Task token for from-scratch runs.
        #[arg(long)]
        task: Option<String>,
    },
    /// Collect a teacher dataset for distillation.
    Collect {
        #[arg(long)]
        dense_teacher: PathBuf,
        #[arg(long)]
        random_teacher: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Behavior-clone the student policy from a collected dataset.
    Distill {
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Evaluate a policy over task tokens and emit reports plus a table.
    Eval {
        #[arg(long)]
        policy: PathBuf,
        /// Comma-separated task tokens, e.g. D-4,D-6,D-8.
        #[arg(long)]
        tasks: String,
        /// Treat the checkpoint as a student policy (point-cloud input).
        #[arg(long, default_value_t = false)]
        student: bool,
        /// Write per-episode trajectory logs into this directory.
        #[arg(long)]
        trajectory_dir: Option<PathBuf>,
    },
    /// Re-simulate a trajectory log and verify bitwise agreement.
    Replay {
        #[arg(long)]
        trajectory: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>, out: &Option<PathBuf>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => {
            let mut c = RunConfig::default();
            c.apply_profile();
            c
        }
    };
    if let Some(o) = out {
        cfg.output_dir = o.display().to_string();
    }
    Ok(cfg)
}

fn parse_tasks(tokens: &str, seed: u64) -> Result<Vec<TaskSpec>> {
    let mut out = Vec::new();
    for tok in tokens.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        out.push(
            TaskSpec::parse(tok, seed)
                .with_context(|| format!("invalid task token '{tok}'"))?,
        );
    }
    if out.is_empty() {
        bail!("no task tokens given");
    }
    Ok(out)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = load_config(&cli.config, &cli.out)?;
    match cli.command {
        Command::Gen {
            family,
            n,
            seed,
            cloud,
        } => run::gen(&cfg, &family, n, seed, cloud.as_deref()),
        Command::Train { task, init } => run::train(&cfg, &task, init.as_deref()),
        Command::Curriculum { direction, task } => {
            run::curriculum(&cfg, &direction, task.as_deref())
        }
        Command::Collect {
            dense_teacher,
            random_teacher,
            episodes,
        } => run::collect(&cfg, &dense_teacher, &random_teacher, episodes),
        Command::Distill { dataset } => run::distill(&cfg, &dataset),
        Command::Eval {
            policy,
            tasks,
            student,
            trajectory_dir,
        } => {
            let specs = parse_tasks(&tasks, cfg.seed)?;
            run::eval(&cfg, &policy, &specs, student, trajectory_dir.as_deref())
        }
        Command::Replay { trajectory } => run::replay(&cfg, &trajectory),
    }
}
