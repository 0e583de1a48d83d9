//! Command-line front end: training sweeps, checkpoint evaluation, exact
//! information-theoretic oracles, and run reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use optionforge::env::EnvSpec;
use optionforge::harness::checkpoint::Checkpoint;
use optionforge::harness::config::RunConfig;
use optionforge::harness::evaluate::{evaluate_checkpoint, render_eval};
use optionforge::harness::experiment::{run_experiment, ExperimentManifest};
use optionforge::harness::kv::KvMap;
use optionforge::harness::report::{load_runlog, render_report};
use optionforge::option_core::OptionPrior;
use optionforge::oracle::{channel_capacity, exact_mi};
use optionforge::policy::IntraOptionPolicy;
use optionforge::rewards::Algorithm;
use optionforge::{Error, Result};

#[derive(Parser)]
#[command(
    name = "optionforge",
    version,
    about = "Option discovery via mutual-information objectives on enumerable environments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (variant, seed) pair of an experiment manifest.
    Run {
        /// Manifest file (key=value format).
        manifest: PathBuf,
    },
    /// Roll out a saved checkpoint and summarize its options.
    Eval {
        /// Checkpoint file written by `run`.
        checkpoint: PathBuf,
        /// Episodes per option.
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        /// Take argmax actions instead of sampling the policy.
        #[arg(long)]
        greedy: bool,
    },
    /// Exact information-theoretic computations.
    Oracle {
        #[command(subcommand)]
        what: OracleCommand,
    },
    /// Summarize a finished run directory.
    Report {
        /// Directory containing config.kv and runlog.csv.
        run_dir: PathBuf,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Exact mutual information between options and final states.
    Mi {
        /// Run config or checkpoint file.
        config: PathBuf,
    },
    /// Option-prior channel capacity via alternating maximization.
    Capacity {
        /// Run config or checkpoint file.
        config: PathBuf,
        /// Capacity improvement below which iteration stops.
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
    },
}

/// The policy/prior/env triple an oracle runs against: a trained system
/// when given a checkpoint, the untrained initial system when given a
/// plain config.
struct OracleTarget {
    env: EnvSpec,
    policy: IntraOptionPolicy,
    prior: OptionPrior,
    horizon: usize,
    trained: bool,
}

fn load_oracle_target(path: &Path) -> Result<OracleTarget> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("reading {}: {e}", path.display())))?;
    let map = KvMap::parse(&text)?;
    if map.contains("format") {
        let ck = Checkpoint::from_kv(&map)?;
        let train = ck.config.train;
        Ok(OracleTarget {
            env: train.env,
            policy: ck.policy,
            prior: ck.prior,
            horizon: train.horizon,
            trained: true,
        })
    } else {
        let cfg = RunConfig::from_kv(&map)?;
        let train = cfg.train;
        let policy = IntraOptionPolicy::new(
            train.n_options,
            train.env.n_states(),
            train.env.n_actions(),
            train.entropy_coefficient,
        )?;
        let prior = match train.algorithm {
            Algorithm::Vic => OptionPrior::learned(train.n_options, train.env.n_states())?,
            Algorithm::Diayn | Algorithm::Valor => OptionPrior::uniform(train.n_options)?,
        };
        Ok(OracleTarget {
            env: train.env,
            policy,
            prior,
            horizon: train.horizon,
            trained: false,
        })
    }
}

fn cmd_run(manifest_path: &Path) -> Result<ExitCode> {
    let manifest = ExperimentManifest::load(manifest_path)?;
    let report = run_experiment(&manifest)?;
    println!("experiment output: {}", report.out_dir.display());
    for run in &report.runs {
        match &run.result {
            Ok(rec) => println!(
                "  {:<24} ok    episodes {:>6}  disc_loss {:.4}",
                run.dir_name, rec.episode, rec.disc_loss
            ),
            Err(msg) => println!("  {:<24} FAILED  {msg}", run.dir_name),
        }
    }
    if report.any_failed() {
        eprintln!("some runs failed; see summary.json");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(path: &Path, episodes: usize, greedy: bool) -> Result<ExitCode> {
    if episodes == 0 {
        return Err(Error::InvalidSpec("--episodes must be positive".into()));
    }
    let ck = Checkpoint::load(path)?;
    let report = evaluate_checkpoint(&ck, episodes, greedy)?;
    print!("{}", render_eval(&report));
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle_mi(path: &Path) -> Result<ExitCode> {
    let target = load_oracle_target(path)?;
    let s0 = target.env.initial_state();
    let mi = exact_mi(&target.env, &target.policy, &target.prior, s0, target.horizon)?;
    let n = target.policy.n_options() as f64;
    let s = target.env.n_states() as f64;
    println!(
        "exact MI: {mi} nats ({} system, horizon {})",
        if target.trained { "trained" } else { "untrained" },
        target.horizon
    );
    println!("upper bound: min(ln N, ln S) = {}", n.ln().min(s.ln()));
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle_capacity(path: &Path, tolerance: f64) -> Result<ExitCode> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "--tolerance must be positive, got {tolerance}"
        )));
    }
    let target = load_oracle_target(path)?;
    let s0 = target.env.initial_state();
    let result = channel_capacity(&target.env, &target.policy, s0, target.horizon, tolerance)?;
    println!(
        "capacity: {} nats after {} iterations ({})",
        result.capacity,
        result.iterations,
        if result.converged {
            "converged"
        } else {
            "iteration cap reached"
        }
    );
    let probs: Vec<String> = result
        .prior_probs
        .iter()
        .enumerate()
        .map(|(w, p)| format!("{w}:{p:.6}"))
        .collect();
    println!("capacity-achieving prior: {}", probs.join(" "));
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(run_dir: &Path) -> Result<ExitCode> {
    let config_text = std::fs::read_to_string(run_dir.join("config.kv"))
        .map_err(|e| Error::Io(format!("reading {}: {e}", run_dir.join("config.kv").display())))?;
    let records = load_runlog(&run_dir.join("runlog.csv"))?;
    print!("{}", render_report(&config_text, &records)?);
    Ok(ExitCode::SUCCESS)
}

fn run_cli(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { manifest } => cmd_run(&manifest),
        Command::Eval {
            checkpoint,
            episodes,
            greedy,
        } => cmd_eval(&checkpoint, episodes, greedy),
        Command::Oracle { what } => match what {
            OracleCommand::Mi { config } => cmd_oracle_mi(&config),
            OracleCommand::Capacity { config, tolerance } => {
                cmd_oracle_capacity(&config, tolerance)
            }
        },
        Command::Report { run_dir } => cmd_report(&run_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_cli(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                // Bad inputs: config, manifest, file contents, or paths.
                Error::InvalidSpec(_) | Error::Parse(_) | Error::Io(_) => ExitCode::from(2),
                // Runtime failures inside otherwise valid runs.
                Error::NumericalFailure(_) | Error::ContractViolation(_) => ExitCode::from(1),
            }
        }
    }
}
