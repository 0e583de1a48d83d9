//! Multi-run experiment orchestration: manifests, seed sweeps, run
//! directories, and the aggregate summary.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::checkpoint::Checkpoint;
use crate::harness::config::RunConfig;
use crate::harness::kv::KvMap;
use crate::harness::report::{emit_heatmap_data, save_runlog};
use crate::trainers::{train_with_hook, RunRecord, TrainOutcome};

/// Environment variable overriding the manifest's output root.
pub const OUT_ENV_VAR: &str = "OPTIONFORGE_OUT";

/// A named set of run configurations crossed with seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentManifest {
    pub name: String,
    pub variants: Vec<(String, RunConfig)>,
    pub seeds: Vec<u64>,
    pub out_root: PathBuf,
}

fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
}

impl ExperimentManifest {
    /// Parse from `experiment.*` and `variant.<label>.*` keys.
    pub fn parse(text: &str) -> Result<Self> {
        let map = KvMap::parse(text)?;
        let name = map.require("experiment.name")?.to_string();
        if !valid_label(&name) {
            return Err(Error::InvalidSpec(format!(
                "experiment name {name:?} must be lowercase alphanumeric with - or _"
            )));
        }
        let seeds = map
            .get_u64_slice("experiment.seeds")?
            .ok_or_else(|| Error::Parse("missing key \"experiment.seeds\"".into()))?;
        if seeds.is_empty() {
            return Err(Error::InvalidSpec("experiment needs at least one seed".into()));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(Error::InvalidSpec("duplicate seeds in experiment".into()));
        }
        let out_root = PathBuf::from(map.get("experiment.out").unwrap_or("runs"));

        let mut labels = Vec::new();
        for key in map.keys() {
            if let Some(rest) = key.strip_prefix("variant.") {
                let label = rest.split('.').next().unwrap_or_default().to_string();
                if !labels.contains(&label) {
                    labels.push(label);
                }
            } else if !key.starts_with("experiment.") {
                return Err(Error::InvalidSpec(format!("unknown manifest key {key:?}")));
            }
        }
        if labels.is_empty() {
            return Err(Error::InvalidSpec(
                "experiment needs at least one variant".into(),
            ));
        }
        let mut variants = Vec::new();
        for label in labels {
            if !valid_label(&label) {
                return Err(Error::InvalidSpec(format!(
                    "variant label {label:?} must be lowercase alphanumeric with - or _"
                )));
            }
            let sub = map.strip_prefix(&format!("variant.{label}"));
            let cfg = RunConfig::from_kv(&sub).map_err(|e| match e {
                Error::Parse(msg) => Error::Parse(format!("variant {label:?}: {msg}")),
                Error::InvalidSpec(msg) => Error::InvalidSpec(format!("variant {label:?}: {msg}")),
                other => other,
            })?;
            variants.push((label, cfg));
        }
        Ok(ExperimentManifest {
            name,
            variants,
            seeds,
            out_root,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Output root after the `OPTIONFORGE_OUT` override.
    pub fn resolved_out_root(&self) -> PathBuf {
        match std::env::var_os(OUT_ENV_VAR) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.out_root.clone(),
        }
    }
}

/// Creates `<root>/<name>-<timestamp>`, appending `-2`, `-3`, ... if the
/// moment is already taken.
fn create_unique_dir(root: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(root)
        .map_err(|e| Error::Io(format!("creating {}: {e}", root.display())))?;
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    let base = format!("{name}-{stamp}");
    for attempt in 0..1000u32 {
        let candidate = if attempt == 0 {
            root.join(&base)
        } else {
            root.join(format!("{base}-{}", attempt + 1))
        };
        match std::fs::create_dir(&candidate) {
            Ok(()) => return Ok(candidate),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => {
                return Err(Error::Io(format!(
                    "creating {}: {e}",
                    candidate.display()
                )))
            }
        }
    }
    Err(Error::Io(format!(
        "could not find a free directory name under {}",
        root.display()
    )))
}

/// Result of one (variant, seed) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub variant: String,
    pub seed: u64,
    pub dir_name: String,
    /// Final run-log record on success, error text on failure.
    pub result: std::result::Result<RunRecord, String>,
}

/// Result of a whole experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub out_dir: PathBuf,
    pub runs: Vec<RunSummary>,
}

impl ExperimentReport {
    pub fn any_failed(&self) -> bool {
        self.runs.iter().any(|r| r.result.is_err())
    }
}

fn execute_run(cfg: &RunConfig, dir: &Path) -> Result<TrainOutcome> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Io(format!("creating {}: {e}", dir.display())))?;
    std::fs::write(dir.join("config.kv"), cfg.render())
        .map_err(|e| Error::Io(format!("writing config: {e}")))?;
    let dir_owned = dir.to_path_buf();
    let cfg_clone = cfg.clone();
    let outcome = train_with_hook(&cfg.train, &mut |episode, policy, prior, disc| {
        let ck = Checkpoint {
            config: cfg_clone.clone(),
            policy: policy.clone(),
            prior: prior.clone(),
            discriminator: disc.clone(),
        };
        ck.save(&dir_owned.join(format!("checkpoint-{episode}.kv")))
    })?;
    save_runlog(&outcome.log, &dir.join("runlog.csv"))?;
    let final_ck = Checkpoint {
        config: cfg.clone(),
        policy: outcome.policy.clone(),
        prior: outcome.prior.clone(),
        discriminator: outcome.discriminator.clone(),
    };
    final_ck.save(&dir.join("checkpoint.kv"))?;
    if cfg.train.env.grid_shape().is_some() {
        emit_heatmap_data(&outcome.visit_counts, &cfg.train.env, &dir.join("heatmap.csv"))?;
    }
    Ok(outcome)
}

/// Execute every (variant, seed) pair under a fresh timestamped directory,
/// then write `summary.json`. Failed runs are recorded, not fatal.
pub fn run_experiment(manifest: &ExperimentManifest) -> Result<ExperimentReport> {
    if manifest.variants.is_empty() || manifest.seeds.is_empty() {
        return Err(Error::InvalidSpec(
            "experiment needs variants and seeds".into(),
        ));
    }
    for (_, cfg) in &manifest.variants {
        cfg.train.validate()?;
    }
    let out_dir = create_unique_dir(&manifest.resolved_out_root(), &manifest.name)?;

    let mut jobs = Vec::new();
    for (label, cfg) in &manifest.variants {
        for &seed in &manifest.seeds {
            let mut cfg = cfg.clone();
            cfg.train.seed = seed;
            jobs.push((label.clone(), seed, cfg));
        }
    }

    let mut runs: Vec<RunSummary> = jobs
        .par_iter()
        .map(|(label, seed, cfg)| {
            let dir_name = format!("{label}-seed{seed}");
            let dir = out_dir.join(&dir_name);
            let result = match execute_run(cfg, &dir) {
                Ok(outcome) => match outcome.log.records.last() {
                    Some(last) => Ok(last.clone()),
                    None => Err("run produced no records".to_string()),
                },
                Err(e) => Err(e.to_string()),
            };
            RunSummary {
                variant: label.clone(),
                seed: *seed,
                dir_name,
                result,
            }
        })
        .collect();
    runs.sort_by(|a, b| (&a.variant, a.seed).cmp(&(&b.variant, b.seed)));

    let report = ExperimentReport {
        out_dir: out_dir.clone(),
        runs,
    };
    let summary = summary_json(manifest, &report);
    std::fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("valid json value") + "\n",
    )
    .map_err(|e| Error::Io(format!("writing summary: {e}")))?;
    Ok(report)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn summary_json(manifest: &ExperimentManifest, report: &ExperimentReport) -> serde_json::Value {
    use serde_json::{json, Map, Value};
    let runs: Vec<Value> = report
        .runs
        .iter()
        .map(|r| match &r.result {
            Ok(rec) => json!({
                "variant": r.variant,
                "seed": r.seed,
                "dir": r.dir_name,
                "status": "ok",
                "final": {
                    "episode": rec.episode,
                    "mean_r_intrinsic": rec.mean_r_intrinsic,
                    "disc_loss": rec.disc_loss,
                    "prior_entropy": rec.prior_entropy,
                    "empirical_mi": rec.empirical_mi,
                    "room0_frac": rec.room_fractions.as_ref().map(|f| f[0]),
                    "static_frac": rec.static_frac,
                }
            }),
            Err(msg) => json!({
                "variant": r.variant,
                "seed": r.seed,
                "dir": r.dir_name,
                "status": "failed",
                "error": msg,
            }),
        })
        .collect();

    let mut aggregate = Map::new();
    for (label, _) in &manifest.variants {
        let finals: Vec<&RunRecord> = report
            .runs
            .iter()
            .filter(|r| &r.variant == label)
            .filter_map(|r| r.result.as_ref().ok())
            .collect();
        if finals.is_empty() {
            continue;
        }
        let stat = |get: &dyn Fn(&RunRecord) -> Option<f64>| -> Value {
            let vals: Vec<f64> = finals.iter().filter_map(|r| get(r)).collect();
            if vals.is_empty() {
                return Value::Null;
            }
            let (mean, sd) = mean_sd(&vals);
            json!({"mean": mean, "sd": sd})
        };
        aggregate.insert(
            label.clone(),
            json!({
                "runs": finals.len(),
                "mean_r_intrinsic": stat(&|r| Some(r.mean_r_intrinsic)),
                "disc_loss": stat(&|r| Some(r.disc_loss)),
                "prior_entropy": stat(&|r| Some(r.prior_entropy)),
                "empirical_mi": stat(&|r| r.empirical_mi),
                "room0_frac": stat(&|r| r.room_fractions.as_ref().map(|f| f[0])),
                "static_frac": stat(&|r| r.static_frac),
            }),
        );
    }

    json!({
        "experiment": manifest.name,
        "seeds": manifest.seeds,
        "runs": runs,
        "aggregate": Value::Object(aggregate),
    })
}
