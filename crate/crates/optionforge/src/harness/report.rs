//! Run-log CSV serialization, occupancy heat-map files, and the textual
//! per-run report.

use std::path::Path;

use crate::env::EnvSpec;
use crate::error::{Error, Result};
use crate::trainers::{RunLog, RunRecord};

pub const RUNLOG_HEADER: &str =
    "episode,mean_r_intrinsic,disc_loss,prior_entropy,empirical_mi,room0_frac,static_frac";

/// One run-log row as it appears on disk. The in-memory [`RunRecord`]
/// carries the full room histogram; the CSV keeps only room 0, so this
/// mirror type is what a file reloads to.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRecord {
    pub episode: usize,
    pub mean_r_intrinsic: f64,
    pub disc_loss: f64,
    pub prior_entropy: f64,
    pub empirical_mi: Option<f64>,
    pub room0_frac: Option<f64>,
    pub static_frac: Option<f64>,
}

impl From<&RunRecord> for CsvRecord {
    fn from(r: &RunRecord) -> Self {
        CsvRecord {
            episode: r.episode,
            mean_r_intrinsic: r.mean_r_intrinsic,
            disc_loss: r.disc_loss,
            prior_entropy: r.prior_entropy,
            empirical_mi: r.empirical_mi,
            room0_frac: r.room_fractions.as_ref().map(|f| f[0]),
            static_frac: r.static_frac,
        }
    }
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt_field(tok: &str, line: usize) -> Result<Option<f64>> {
    if tok.is_empty() {
        return Ok(None);
    }
    tok.parse::<f64>()
        .map(Some)
        .map_err(|e| Error::Parse(format!("run log line {line}: {e}")))
}

pub fn records_to_csv(records: &[CsvRecord]) -> String {
    let mut out = String::from(RUNLOG_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.episode,
            r.mean_r_intrinsic,
            r.disc_loss,
            r.prior_entropy,
            opt_field(r.empirical_mi),
            opt_field(r.room0_frac),
            opt_field(r.static_frac),
        ));
    }
    out
}

pub fn runlog_to_csv(log: &RunLog) -> String {
    let records: Vec<CsvRecord> = log.records.iter().map(CsvRecord::from).collect();
    records_to_csv(&records)
}

pub fn records_from_csv(text: &str) -> Result<Vec<CsvRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RUNLOG_HEADER => {}
        Some((_, header)) => {
            return Err(Error::Parse(format!(
                "unexpected run-log header {header:?}"
            )))
        }
        None => return Err(Error::Parse("empty run log".into())),
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let n = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse(format!(
                "run log line {n}: expected 7 fields, got {}",
                fields.len()
            )));
        }
        let req = |tok: &str| -> Result<f64> {
            tok.parse::<f64>()
                .map_err(|e| Error::Parse(format!("run log line {n}: {e}")))
        };
        records.push(CsvRecord {
            episode: fields[0]
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("run log line {n}: {e}")))?,
            mean_r_intrinsic: req(fields[1])?,
            disc_loss: req(fields[2])?,
            prior_entropy: req(fields[3])?,
            empirical_mi: parse_opt_field(fields[4], n)?,
            room0_frac: parse_opt_field(fields[5], n)?,
            static_frac: parse_opt_field(fields[6], n)?,
        });
    }
    Ok(records)
}

pub fn save_runlog(log: &RunLog, path: &Path) -> Result<()> {
    std::fs::write(path, runlog_to_csv(log))
        .map_err(|e| Error::Io(format!("writing {}: {e}", path.display())))
}

pub fn load_runlog(path: &Path) -> Result<Vec<CsvRecord>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("reading {}: {e}", path.display())))?;
    records_from_csv(&text)
}

/// Render per-state visit counts as a grid of visit fractions matching the
/// environment's layout. The first line records the count total so the
/// file can be read back; integral counts round-trip exactly.
pub fn heatmap_to_string(counts: &[f64], env: &EnvSpec) -> Result<String> {
    if counts.len() != env.n_states() {
        return Err(Error::ContractViolation(format!(
            "heat map needs {} counts, got {}",
            env.n_states(),
            counts.len()
        )));
    }
    let Some((rows, cols)) = env.grid_shape() else {
        return Err(Error::ContractViolation(format!(
            "environment {:?} has no grid layout",
            env.name()
        )));
    };
    let total: f64 = counts.iter().sum();
    let mut out = format!("# total={total}\n");
    for r in 0..rows {
        let row: Vec<String> = (0..cols)
            .map(|c| {
                let count = counts[r * cols + c];
                let frac = if total > 0.0 { count / total } else { 0.0 };
                frac.to_string()
            })
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn emit_heatmap_data(counts: &[f64], env: &EnvSpec, path: &Path) -> Result<()> {
    let text = heatmap_to_string(counts, env)?;
    std::fs::write(path, text).map_err(|e| Error::Io(format!("writing {}: {e}", path.display())))
}

/// Reconstruct visit counts from a heat-map file. Values within rounding
/// error of an integer are snapped, so integral counts return exactly.
pub fn load_heatmap(text: &str, env: &EnvSpec) -> Result<Vec<f64>> {
    let mut lines = text.lines();
    let total = match lines.next() {
        Some(first) if first.starts_with("# total=") => first["# total=".len()..]
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("heat map total: {e}")))?,
        _ => return Err(Error::Parse("heat map missing total line".into())),
    };
    let mut counts = Vec::with_capacity(env.n_states());
    for line in lines {
        if line.is_empty() {
            continue;
        }
        for tok in line.split(',') {
            let frac = tok
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("heat map cell: {e}")))?;
            let count = frac * total;
            let snapped = count.round();
            let tol = 1e-9 * total.abs().max(1.0);
            counts.push(if (count - snapped).abs() <= tol {
                snapped
            } else {
                count
            });
        }
    }
    if counts.len() != env.n_states() {
        return Err(Error::Parse(format!(
            "heat map holds {} cells, environment has {} states",
            counts.len(),
            env.n_states()
        )));
    }
    Ok(counts)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

/// Human-readable digest of one run directory's log.
pub fn render_report(config_text: &str, records: &[CsvRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::ContractViolation("run log has no records".into()));
    }
    let mut out = String::new();
    let cfg = crate::harness::config::RunConfig::parse(config_text)?;
    let last = records.last().expect("nonempty");
    let quarter = |lo: f64, hi: f64| -> Option<f64> {
        let total = last.episode as f64;
        let vals: Vec<f64> = records
            .iter()
            .filter(|r| {
                let e = r.episode as f64;
                e > lo * total && e <= hi * total
            })
            .map(|r| r.disc_loss)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    out.push_str(&format!(
        "algorithm: {}   options: {}   horizon: {}   seed: {}\n",
        cfg.train.algorithm.as_str(),
        cfg.train.n_options,
        cfg.train.horizon,
        cfg.train.seed
    ));
    out.push_str(&format!(
        "episodes: {}   records: {}\n",
        last.episode,
        records.len()
    ));
    out.push_str(&format!(
        "final: mean_r={:.4} disc_loss={:.4} prior_entropy={:.4} empirical_mi={} room0_frac={} static_frac={}\n",
        last.mean_r_intrinsic,
        last.disc_loss,
        last.prior_entropy,
        fmt_opt(last.empirical_mi),
        fmt_opt(last.room0_frac),
        fmt_opt(last.static_frac),
    ));
    if let (Some(first), Some(final_q)) = (quarter(0.0, 0.25), quarter(0.75, 1.0)) {
        out.push_str(&format!(
            "disc loss: first quarter {:.4} -> final quarter {:.4} ({})\n",
            first,
            final_q,
            if final_q < first {
                "decreasing"
            } else {
                "not decreasing"
            }
        ));
    }
    Ok(out)
}
