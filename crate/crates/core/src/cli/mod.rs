//! Command-line front end.
//!
//! Exit codes: 0 success, 2 config error, 3 budget too small to produce any
//! artifact, 1 anything else. Run artifacts are rewritten after every loop
//! iteration, so an interrupted run can be continued with `--resume`.

pub mod artifacts;
pub mod config;
mod report;

use std::fs;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, info};

use crate::bandits::{naive_sample_size, nuse_run, ArmStats, SampleError, Termination};
use crate::env::{make_synthetic_world, BoxWorld, EnvError, Environment};
use crate::features::binarize;
use crate::itrs::{resume_method, run_method, Method, Progress, RunError, StopReason};
use crate::seeding::SeedStream;

use artifacts::*;
use config::{Config, ConfigError, EnvSection};

pub const LOG_ENV: &str = "ORACLE_FRUGAL_LOG_LEVEL";

#[derive(Debug, Parser)]
#[command(name = "oracle-frugal", version, about = "Learn tree policies from a simulator with few calls")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the ITRS loop.
    Itrs(RunArgs),
    /// Run a baseline under the same schedule as ITRS.
    Baseline {
        #[arg(value_enum)]
        which: Baseline,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Trace one NUSE run on a synthetic state: t, leader mean, max radius, true best mean.
    NuseDemo(CommonArgs),
    /// Aggregate finished run directories into summary CSVs.
    Report {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Naive,
    Random,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `run.budget` (for nuse-demo, `nuse.max_samples`).
    #[arg(long)]
    pub budget: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Continue the interrupted run saved in the output directory.
    #[arg(long)]
    pub resume: bool,
    /// Stop after this many loop iterations, leaving a resumable run.
    #[arg(long)]
    pub pause_after: Option<u64>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    /// The budget cannot cover the bootstrap, so nothing was written.
    Budget(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Budget(m) | CliError::Other(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Other(format!("{}: {e}", path.display()))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    write_atomic(&path, contents.as_bytes()).map_err(io_err(&path))
}

fn run_err(e: RunError) -> CliError {
    match e {
        RunError::Config(m) => CliError::Config(m),
        RunError::BootstrapBudget { .. } => CliError::Budget(e.to_string()),
        other => CliError::Other(other.to_string()),
    }
}

fn env_err(e: EnvError) -> CliError {
    CliError::Config(format!("env: {e}"))
}

/// Parses arguments, initializes logging and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).try_init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Itrs(args) => cmd_run(&args, Method::Itrs, "itrs"),
        Command::Baseline { which, args } => {
            let cfg = load_config(&args.common)?;
            let method = match which {
                Baseline::Naive => Method::Naive,
                Baseline::Random => Method::RandomRejector {
                    reject_fraction: cfg.run.reject_fraction,
                },
            };
            cmd_run(&args, method, "baseline")
        }
        Command::NuseDemo(args) => cmd_nuse_demo(&args),
        Command::Report { out_dir, run_dirs } => report::cmd_report(&run_dirs, &out_dir),
    }
}

fn load_config(args: &CommonArgs) -> Result<Config, CliError> {
    let mut cfg = Config::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    Ok(cfg)
}

fn cmd_run(args: &RunArgs, method: Method, command: &str) -> Result<(), CliError> {
    let mut cfg = load_config(&args.common)?;
    if let Some(b) = args.common.budget {
        cfg.run.budget = Some(b);
    }
    match cfg.env.clone() {
        EnvSection::Synthetic(c) => {
            let (env, _) = make_synthetic_world(&c).map_err(env_err)?;
            drive(&env, &cfg, method, command, args)
        }
        EnvSection::BoxWorld(c) => {
            let env = BoxWorld::new(c).map_err(env_err)?;
            drive(&env, &cfg, method, command, args)
        }
    }
}

/// Writes the per-iteration artifacts for `progress`.
fn save_progress<S: serde::Serialize + Clone>(dir: &Path, progress: &Progress<'_, S>) -> Result<(), CliError> {
    write_file(dir, DATASET_FILE, &dataset_csv(progress.dataset))?;
    write_file(dir, LOG_FILE, &progress.log.to_csv())?;
    if let Some(tree) = &progress.checkpoint.tree {
        write_file(dir, TREE_FILE, tree)?;
    }
    let saved = SavedProgress {
        log: progress.log.clone(),
        checkpoint: progress.checkpoint.clone(),
    };
    write_file(dir, CHECKPOINT_FILE, &serde_json::to_string(&saved).expect("checkpoint serializes"))
}

fn drive<E: Environment>(env: &E, cfg: &Config, method: Method, command: &str, args: &RunArgs) -> Result<(), CliError> {
    let out = &args.common.out_dir;
    let rc = cfg.run_config();
    let bootstrap_calls = (rc.bootstrap_states * env.n_actions()) as u64;
    if let Some(b) = rc.budget {
        if b < bootstrap_calls {
            return Err(CliError::Budget(format!(
                "budget of {b} calls cannot cover the {bootstrap_calls}-call bootstrap; no artifacts written"
            )));
        }
    }
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut manifest = RunManifest::new(
        command,
        method.name(),
        cfg,
        &[DATASET_FILE, TREE_FILE, LOG_FILE, CHECKPOINT_FILE],
    );

    let mut failure: Option<CliError> = None;
    let mut steps = 0u64;
    let mut observer = |p: &Progress<'_, E::State>| {
        if let Some(last) = p.log.iterations.last() {
            debug!("iteration {} calls {} remaining leaves {}", last.iteration, last.sim_calls, last.remaining_leaves);
        }
        if let Err(e) = save_progress(out, p) {
            failure = Some(e);
            return ControlFlow::Break(());
        }
        steps += 1;
        match args.pause_after {
            Some(n) if steps >= n => ControlFlow::Break(()),
            _ => ControlFlow::Continue(()),
        }
    };

    let result = if args.resume {
        let previous = RunManifest::read(out).map_err(CliError::Other)?;
        if previous.stop_reason.is_some() {
            return Err(CliError::Other(format!("{}: run already finished", out.display())));
        }
        if previous.config != *cfg || previous.method != method.name() {
            return Err(CliError::Config(format!(
                "{}: config or method differs from the interrupted run",
                out.display()
            )));
        }
        let path = out.join(CHECKPOINT_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let saved: SavedProgress<E::State> =
            serde_json::from_str(&text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
        let path = out.join(DATASET_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let feature_dim = binarize(&env.observe(&saved.checkpoint.state), rc.categories)
            .map_err(|e| CliError::Config(e.to_string()))?
            .len();
        let dataset = parse_dataset_csv(&text, env.n_actions(), feature_dim)
            .map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
        info!("resuming at iteration {}", saved.checkpoint.next_iteration);
        resume_method(env, &rc, method, dataset, saved.log, saved.checkpoint, &mut observer)
    } else {
        manifest.write(out).map_err(io_err(out))?;
        run_method(env, &rc, method, &mut observer)
    };
    if let Some(e) = failure {
        return Err(e);
    }
    let output = result.map_err(run_err)?;

    write_file(out, DATASET_FILE, &dataset_csv(&output.dataset))?;
    write_file(out, LOG_FILE, &output.log.to_csv())?;
    write_file(out, TREE_FILE, &output.tree.to_string())?;
    let saved = SavedProgress {
        log: output.log.clone(),
        checkpoint: output.checkpoint.clone(),
    };
    write_file(out, CHECKPOINT_FILE, &serde_json::to_string(&saved).expect("checkpoint serializes"))?;
    if output.stop != StopReason::Interrupted {
        manifest.stop_reason = Some(output.stop.as_str().to_string());
        manifest.sim_calls = Some(output.log.sim_calls());
        manifest.final_eval = Some(output.final_eval);
    }
    manifest.write(out).map_err(io_err(out))?;
    info!(
        "{} stopped ({}) after {} calls, accuracy {}",
        method.name(),
        output.stop.as_str(),
        output.log.sim_calls(),
        output.final_eval.accuracy
    );
    Ok(())
}

pub const NUSE_HEADER: &str = "t,leader_mean,max_radius,true_best_mean";

/// One NUSE round with a finite confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuseRow {
    pub t: u64,
    pub leader_mean: f64,
    pub max_radius: f64,
    pub true_best_mean: f64,
}

/// Runs NUSE on the actions of one state drawn from `("nuse-state", [])`;
/// the k-th sample uses the `("nuse-sim", [k])` substream. Rounds where some
/// candidate is still unsampled have an infinite radius and are left out.
pub fn nuse_trace<E: Environment>(
    env: &E,
    pac: &crate::bandits::PacConfig,
    seed: u64,
    mode: crate::bandits::Mode,
    max_samples: u64,
) -> Result<(Vec<NuseRow>, crate::bandits::EliminationOutcome), crate::bandits::RunError> {
    let seeds = SeedStream::new(seed);
    let state = env.initial_state(&mut seeds.rng("nuse-state", &[]));
    let best = env.true_means(&state).into_iter().fold(f64::NEG_INFINITY, f64::max);
    let mut k = 0u64;
    let mut oracle = |arm: usize| -> Result<f64, SampleError> {
        let out = env.simulate(&state, arm, &mut seeds.rng("nuse-sim", &[k]))?;
        k += 1;
        Ok(out.reward)
    };
    let mut rows = Vec::new();
    let outcome = nuse_run(pac, &mut oracle, vec![ArmStats::default(); pac.n()], 1, mode, Some(max_samples), |round| {
        if round.candidates.iter().all(|&i| round.stats[i].count > 0) {
            if let Some(m) = round.leader_mean() {
                rows.push(NuseRow {
                    t: round.t,
                    leader_mean: m,
                    max_radius: round.max_radius(),
                    true_best_mean: best,
                });
            }
        }
    })?;
    Ok((rows, outcome))
}

fn cmd_nuse_demo(args: &CommonArgs) -> Result<(), CliError> {
    let mut cfg = load_config(args)?;
    if let Some(b) = args.budget {
        cfg.nuse.max_samples = Some(b);
    }
    let EnvSection::Synthetic(world_cfg) = &cfg.env else {
        return Err(CliError::Config("nuse-demo needs env.kind = \"synthetic\"".into()));
    };
    let (env, _) = make_synthetic_world(world_cfg).map_err(env_err)?;
    let pac = cfg.pac_config();
    let cap = cfg
        .nuse
        .max_samples
        .unwrap_or(10 * pac.n() as u64 * naive_sample_size(&pac));
    let (rows, outcome) =
        nuse_trace(&env, &pac, cfg.run.seed, cfg.nuse.mode.into(), cap).map_err(|e| CliError::Other(e.to_string()))?;
    let mut csv = format!("{NUSE_HEADER}\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{}\n", r.t, r.leader_mean, r.max_radius, r.true_best_mean));
    }

    let out = &args.out_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut manifest = RunManifest::new("nuse-demo", "nuse", &cfg, &[NUSE_FILE]);
    manifest.write(out).map_err(io_err(out))?;
    write_file(out, NUSE_FILE, &csv)?;
    manifest.stop_reason = Some(
        match outcome.termination {
            Termination::Identified => "identified",
            Termination::BudgetExhausted => "budget_exhausted",
        }
        .to_string(),
    );
    manifest.sim_calls = Some(outcome.samples_used);
    manifest.write(out).map_err(io_err(out))?;
    info!("nuse picked arm {} after {} samples", outcome.best, outcome.samples_used);
    Ok(())
}
