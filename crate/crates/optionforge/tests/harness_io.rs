//! End-to-end tests of the compiled binary: exit codes, the
//! run -> eval -> report -> oracle flow, and output-directory override.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_optionforge"))
}

fn run_bin(args: &[&str], out_override: Option<&Path>) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    // Keep tests hermetic: never let a developer's shell environment leak in.
    cmd.env_remove("OPTIONFORGE_OUT");
    if let Some(dir) = out_override {
        cmd.env("OPTIONFORGE_OUT", dir);
    }
    cmd.output().expect("binary should spawn")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code_of(out: &Output) -> i32 {
    out.status.code().expect("no exit code (killed by signal?)")
}

const MANIFEST: &str = "\
experiment.name=cli-smoke
experiment.seeds=7
experiment.out=manifest-default-out
variant.vic-chain.env.name=chain
variant.vic-chain.env.n=3
variant.vic-chain.env.slip=0.1
variant.vic-chain.train.algorithm=vic
variant.vic-chain.train.n_options=2
variant.vic-chain.train.episodes=60
variant.vic-chain.train.horizon=2
variant.diayn-pm.env.name=point_mass
variant.diayn-pm.env.grid=3
variant.diayn-pm.train.algorithm=diayn
variant.diayn-pm.train.n_options=3
variant.diayn-pm.train.episodes=40
variant.diayn-pm.train.horizon=8
";

/// Train a tiny experiment through the binary, then feed its outputs to
/// every downstream subcommand.
#[test]
fn run_eval_report_oracle_flow() {
    let tmp = TempDir::new().unwrap();
    let out_root = tmp.path().join("out");
    let manifest_path = tmp.path().join("exp.kv");
    std::fs::write(&manifest_path, MANIFEST).unwrap();

    let run = run_bin(
        &["run", manifest_path.to_str().unwrap()],
        Some(&out_root),
    );
    assert_eq!(code_of(&run), 0, "stderr: {}", stderr_of(&run));
    let run_stdout = stdout_of(&run);
    assert!(run_stdout.contains("vic-chain-seed7"), "{run_stdout}");
    assert!(run_stdout.contains("diayn-pm-seed7"), "{run_stdout}");

    // The env var must win over experiment.out from the manifest.
    let exp_dir = experiment_dir(&run_stdout);
    assert!(
        exp_dir.starts_with(&out_root),
        "output {} escaped OPTIONFORGE_OUT {}",
        exp_dir.display(),
        out_root.display()
    );
    assert!(!tmp.path().join("manifest-default-out").exists());
    assert!(exp_dir.join("summary.json").is_file());

    let vic_dir = exp_dir.join("vic-chain-seed7");
    let pm_dir = exp_dir.join("diayn-pm-seed7");
    for dir in [&vic_dir, &pm_dir] {
        assert!(dir.join("config.kv").is_file());
        assert!(dir.join("runlog.csv").is_file());
        assert!(dir.join("checkpoint.kv").is_file());
        // All built-in environments have a grid layout (a chain is a
        // 1-by-n grid), so every run emits an occupancy heatmap.
        assert!(dir.join("heatmap.csv").is_file());
    }

    let checkpoint = pm_dir.join("checkpoint.kv");
    let eval = run_bin(
        &[
            "eval",
            checkpoint.to_str().unwrap(),
            "--episodes",
            "5",
            "--greedy",
        ],
        None,
    );
    assert_eq!(code_of(&eval), 0, "stderr: {}", stderr_of(&eval));
    let eval_stdout = stdout_of(&eval);
    assert!(eval_stdout.contains("5 episodes per option (greedy)"));
    assert!(eval_stdout.contains("option   0:"));
    assert!(eval_stdout.contains("empirical MI"));

    let report = run_bin(&["report", pm_dir.to_str().unwrap()], None);
    assert_eq!(code_of(&report), 0, "stderr: {}", stderr_of(&report));
    let report_stdout = stdout_of(&report);
    assert!(report_stdout.contains("algorithm: diayn"));
    assert!(report_stdout.contains("options: 3"));

    // A checkpoint reports the trained system; a bare config reports the
    // untrained one, whose exact MI is zero by construction.
    let mi_trained = run_bin(&["oracle", "mi", checkpoint.to_str().unwrap()], None);
    assert_eq!(code_of(&mi_trained), 0, "stderr: {}", stderr_of(&mi_trained));
    assert!(stdout_of(&mi_trained).contains("trained system"));

    let config = pm_dir.join("config.kv");
    let mi_fresh = run_bin(&["oracle", "mi", config.to_str().unwrap()], None);
    assert_eq!(code_of(&mi_fresh), 0, "stderr: {}", stderr_of(&mi_fresh));
    let fresh_stdout = stdout_of(&mi_fresh);
    assert!(fresh_stdout.contains("untrained system"), "{fresh_stdout}");
    assert!(fresh_stdout.contains("exact MI: 0 nats"), "{fresh_stdout}");

    let cap = run_bin(&["oracle", "capacity", checkpoint.to_str().unwrap()], None);
    assert_eq!(code_of(&cap), 0, "stderr: {}", stderr_of(&cap));
    let cap_stdout = stdout_of(&cap);
    assert!(cap_stdout.contains("capacity:"), "{cap_stdout}");
    assert!(cap_stdout.contains("capacity-achieving prior:"), "{cap_stdout}");
}

/// Extract the directory printed on the "experiment output:" line.
fn experiment_dir(stdout: &str) -> PathBuf {
    let line = stdout
        .lines()
        .find(|l| l.starts_with("experiment output:"))
        .unwrap_or_else(|| panic!("missing output line in: {stdout}"));
    PathBuf::from(line.trim_start_matches("experiment output:").trim())
}

#[test]
fn missing_manifest_is_an_input_error() {
    let out = run_bin(&["run", "/no/such/manifest.kv"], None);
    assert_eq!(code_of(&out), 2);
    assert!(stderr_of(&out).contains("error:"));
}

#[test]
fn unknown_manifest_key_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("bad.kv");
    std::fs::write(
        &path,
        "experiment.name=x\nexperiment.seeds=0\nbogus.key=1\n",
    )
    .unwrap();
    let out = run_bin(&["run", path.to_str().unwrap()], None);
    assert_eq!(code_of(&out), 2);
    assert!(stderr_of(&out).contains("bogus.key"), "{}", stderr_of(&out));
}

#[test]
fn eval_missing_checkpoint_is_an_input_error() {
    let out = run_bin(&["eval", "/no/such/checkpoint.kv"], None);
    assert_eq!(code_of(&out), 2);
}

#[test]
fn eval_rejects_zero_episodes() {
    let out = run_bin(&["eval", "/irrelevant.kv", "--episodes", "0"], None);
    assert_eq!(code_of(&out), 2);
    assert!(stderr_of(&out).contains("--episodes"), "{}", stderr_of(&out));
}

#[test]
fn report_on_missing_directory_is_an_input_error() {
    let out = run_bin(&["report", "/no/such/run-dir"], None);
    assert_eq!(code_of(&out), 2);
}

#[test]
fn capacity_rejects_nonpositive_tolerance() {
    let out = run_bin(
        &["oracle", "capacity", "/irrelevant.kv", "--tolerance", "0"],
        None,
    );
    assert_eq!(code_of(&out), 2);
    assert!(stderr_of(&out).contains("tolerance"), "{}", stderr_of(&out));
}

/// A config file whose values parse but violate a semantic constraint must
/// still be treated as bad input.
#[test]
fn semantically_invalid_config_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("cfg.kv");
    std::fs::write(
        &path,
        "env.name=chain\nenv.n=3\ntrain.algorithm=vic\ntrain.n_options=0\n",
    )
    .unwrap();
    let out = run_bin(&["oracle", "mi", path.to_str().unwrap()], None);
    assert_eq!(code_of(&out), 2);
}
