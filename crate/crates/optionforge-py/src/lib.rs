//! Python extension module over the option-learning crate: environment
//! constructors, training, checkpoints, evaluation, and the exact
//! information-theoretic oracles.
//!
//! The Rust API works in newtypes (`StateId`, `OptionId`); here states and
//! options cross the boundary as plain `int`s, and algorithm and backend
//! names as strings, so the Python side stays dictionary-and-float simple.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use std::path::PathBuf;

use optionforge::harness::checkpoint::Checkpoint as CoreCheckpoint;
use optionforge::harness::config::{EnvConfig, RunConfig};
use optionforge::harness::evaluate::evaluate_checkpoint;
use optionforge::option_core::OptionId;
use optionforge::oracle::{channel_capacity, empirical_mi, exact_mi};
use optionforge::rewards::Algorithm;
use optionforge::trainers::{train as core_train, DiscBackendKind, TrainConfig as CoreTrainConfig};
use optionforge::Error as CoreError;

fn to_py_err(e: CoreError) -> PyErr {
    match e {
        CoreError::InvalidSpec(_) | CoreError::Parse(_) => PyValueError::new_err(e.to_string()),
        CoreError::Io(_) => PyIOError::new_err(e.to_string()),
        CoreError::NumericalFailure(_) | CoreError::ContractViolation(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
    }
}

/// An enumerable environment plus the recipe that built it (the recipe is
/// what checkpoints persist).
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Env {
    cfg: EnvConfig,
    spec: optionforge::env::EnvSpec,
}

#[pymethods]
impl Env {
    /// Length-`n` corridor with a stay action and optional action slip.
    #[staticmethod]
    #[pyo3(signature = (n, slip = 0.0))]
    fn chain(n: usize, slip: f64) -> PyResult<Self> {
        let cfg = EnvConfig::Chain { n, slip };
        let spec = cfg.build().map_err(to_py_err)?;
        Ok(Env { cfg, spec })
    }

    /// Four connected rooms on a `side` x `side` grid (side odd, >= 5).
    #[staticmethod]
    fn four_rooms(side: usize) -> PyResult<Self> {
        let cfg = EnvConfig::FourRooms { side };
        let spec = cfg.build().map_err(to_py_err)?;
        Ok(Env { cfg, spec })
    }

    /// Open `grid` x `grid` room starting from the center cell.
    #[staticmethod]
    fn point_mass(grid: usize) -> PyResult<Self> {
        let cfg = EnvConfig::PointMass { grid };
        let spec = cfg.build().map_err(to_py_err)?;
        Ok(Env { cfg, spec })
    }

    #[getter]
    fn n_states(&self) -> usize {
        self.spec.n_states()
    }

    #[getter]
    fn n_actions(&self) -> usize {
        self.spec.n_actions()
    }

    #[getter]
    fn initial_state(&self) -> usize {
        self.spec.initial_state().0
    }

    /// `(rows, cols)` when the states form a grid, else `None`.
    #[getter]
    fn grid_shape(&self) -> Option<(usize, usize)> {
        self.spec.grid_shape()
    }

    fn __repr__(&self) -> String {
        match self.cfg {
            EnvConfig::Chain { n, slip } => format!("Env.chain({n}, slip={slip})"),
            EnvConfig::FourRooms { side } => format!("Env.four_rooms({side})"),
            EnvConfig::PointMass { grid } => format!("Env.point_mass({grid})"),
        }
    }
}

/// Mutable training configuration. Construct with the algorithm name
/// ("vic", "diayn", or "valor"), then adjust fields before calling `train`.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct TrainConfig {
    env_cfg: EnvConfig,
    inner: CoreTrainConfig,
}

#[pymethods]
impl TrainConfig {
    #[new]
    fn new(algorithm: &str, env: &Env, n_options: usize) -> PyResult<Self> {
        let algorithm = Algorithm::parse(algorithm).map_err(to_py_err)?;
        Ok(TrainConfig {
            env_cfg: env.cfg.clone(),
            inner: CoreTrainConfig::new(algorithm, env.spec.clone(), n_options),
        })
    }

    #[getter]
    fn algorithm(&self) -> &'static str {
        self.inner.algorithm.as_str()
    }

    #[getter]
    fn n_options(&self) -> usize {
        self.inner.n_options
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon
    }

    #[setter]
    fn set_horizon(&mut self, value: usize) {
        self.inner.horizon = value;
    }

    #[getter]
    fn episodes(&self) -> usize {
        self.inner.episodes
    }

    #[setter]
    fn set_episodes(&mut self, value: usize) {
        self.inner.episodes = value;
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, value: u64) {
        self.inner.seed = value;
    }

    #[getter]
    fn policy_step(&self) -> f64 {
        self.inner.policy_step
    }

    #[setter]
    fn set_policy_step(&mut self, value: f64) {
        self.inner.policy_step = value;
    }

    #[getter]
    fn disc_step(&self) -> f64 {
        self.inner.disc_step
    }

    #[setter]
    fn set_disc_step(&mut self, value: f64) {
        self.inner.disc_step = value;
    }

    #[getter]
    fn prior_step(&self) -> f64 {
        self.inner.prior_step
    }

    #[setter]
    fn set_prior_step(&mut self, value: f64) {
        self.inner.prior_step = value;
    }

    #[getter]
    fn entropy_coefficient(&self) -> f64 {
        self.inner.entropy_coefficient
    }

    #[setter]
    fn set_entropy_coefficient(&mut self, value: f64) {
        self.inner.entropy_coefficient = value;
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    #[setter]
    fn set_gamma(&mut self, value: f64) {
        self.inner.gamma = value;
    }

    #[getter]
    fn vic_reset_period(&self) -> usize {
        self.inner.vic_reset_period
    }

    #[setter]
    fn set_vic_reset_period(&mut self, value: usize) {
        self.inner.vic_reset_period = value;
    }

    #[getter]
    fn eval_every(&self) -> usize {
        self.inner.eval_every
    }

    #[setter]
    fn set_eval_every(&mut self, value: usize) {
        self.inner.eval_every = value;
    }

    #[getter]
    fn disc_alpha(&self) -> f64 {
        self.inner.disc_alpha
    }

    #[setter]
    fn set_disc_alpha(&mut self, value: f64) {
        self.inner.disc_alpha = value;
    }

    #[getter]
    fn mlp_hidden(&self) -> Vec<usize> {
        self.inner.mlp_hidden.clone()
    }

    #[setter]
    fn set_mlp_hidden(&mut self, value: Vec<usize>) {
        self.inner.mlp_hidden = value;
    }

    #[getter]
    fn disc_backend(&self) -> &'static str {
        self.inner.disc_backend.as_str()
    }

    #[setter]
    fn set_disc_backend(&mut self, value: &str) -> PyResult<()> {
        self.inner.disc_backend = DiscBackendKind::parse(value).map_err(to_py_err)?;
        Ok(())
    }

    /// Raise ValueError if any field combination is unusable.
    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "TrainConfig(algorithm={:?}, n_options={}, horizon={}, episodes={}, seed={})",
            self.inner.algorithm.as_str(),
            self.inner.n_options,
            self.inner.horizon,
            self.inner.episodes,
            self.inner.seed
        )
    }
}

/// One windowed metrics record from a training run.
#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct RunRecord {
    episode: usize,
    mean_r_intrinsic: f64,
    disc_loss: f64,
    prior_entropy: f64,
    empirical_mi: Option<f64>,
    room_fractions: Option<Vec<f64>>,
    static_frac: Option<f64>,
}

impl From<&optionforge::trainers::RunRecord> for RunRecord {
    fn from(r: &optionforge::trainers::RunRecord) -> Self {
        RunRecord {
            episode: r.episode,
            mean_r_intrinsic: r.mean_r_intrinsic,
            disc_loss: r.disc_loss,
            prior_entropy: r.prior_entropy,
            empirical_mi: r.empirical_mi,
            room_fractions: r.room_fractions.clone(),
            static_frac: r.static_frac,
        }
    }
}

#[pymethods]
impl RunRecord {
    fn __repr__(&self) -> String {
        format!(
            "RunRecord(episode={}, mean_r_intrinsic={:.4}, disc_loss={:.4})",
            self.episode, self.mean_r_intrinsic, self.disc_loss
        )
    }
}

/// Result of the alternating-maximization capacity computation.
#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct Capacity {
    capacity: f64,
    prior: Vec<f64>,
    iterations: usize,
    converged: bool,
}

#[pymethods]
impl Capacity {
    fn __repr__(&self) -> String {
        format!(
            "Capacity({:.6} nats, {} iterations, converged={})",
            self.capacity, self.iterations, self.converged
        )
    }
}

/// Per-option and aggregate statistics from rolling out a checkpoint.
#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct EvalSummary {
    episodes_per_option: usize,
    greedy: bool,
    /// `(option, mean_reward, modal_final_state, static_frac)` per option.
    per_option: Vec<(usize, f64, usize, f64)>,
    empirical_mi: f64,
    static_frac: f64,
    coverage: f64,
    room_fractions: Option<Vec<f64>>,
}

#[pymethods]
impl EvalSummary {
    fn __repr__(&self) -> String {
        format!(
            "EvalSummary(empirical_mi={:.4}, static_frac={:.2}, coverage={:.2})",
            self.empirical_mi, self.static_frac, self.coverage
        )
    }
}

/// A trained (policy, prior, discriminator) triple plus the configuration
/// that produced it; round-trips through a plain-text file format.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Checkpoint {
    inner: CoreCheckpoint,
}

impl Checkpoint {
    fn horizon_and_env(&self) -> (usize, &optionforge::env::EnvSpec) {
        (self.inner.config.train.horizon, &self.inner.config.train.env)
    }
}

#[pymethods]
impl Checkpoint {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = CoreCheckpoint::load(&path).map_err(to_py_err)?;
        Ok(Checkpoint { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py_err)
    }

    #[getter]
    fn algorithm(&self) -> &'static str {
        self.inner.config.train.algorithm.as_str()
    }

    #[getter]
    fn n_options(&self) -> usize {
        self.inner.config.train.n_options
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.config.train.horizon
    }

    /// Exact mutual information between the option and the final state
    /// under this checkpoint's policy and prior.
    fn exact_mi(&self) -> PyResult<f64> {
        let (horizon, env) = self.horizon_and_env();
        exact_mi(
            env,
            &self.inner.policy,
            &self.inner.prior,
            env.initial_state(),
            horizon,
        )
        .map_err(to_py_err)
    }

    /// Channel capacity of the policy's option -> final-state channel.
    #[pyo3(signature = (tolerance = 1e-8))]
    fn channel_capacity(&self, tolerance: f64) -> PyResult<Capacity> {
        let (horizon, env) = self.horizon_and_env();
        let r = channel_capacity(env, &self.inner.policy, env.initial_state(), horizon, tolerance)
            .map_err(to_py_err)?;
        Ok(Capacity {
            capacity: r.capacity,
            prior: r.prior_probs,
            iterations: r.iterations,
            converged: r.converged,
        })
    }

    /// Roll out every option and summarize rewards, discrimination, and
    /// state coverage.
    #[pyo3(signature = (episodes = 10, greedy = false))]
    fn evaluate(&self, episodes: usize, greedy: bool) -> PyResult<EvalSummary> {
        let report = evaluate_checkpoint(&self.inner, episodes, greedy).map_err(to_py_err)?;
        Ok(EvalSummary {
            episodes_per_option: report.episodes_per_option,
            greedy: report.greedy,
            per_option: report
                .per_option
                .iter()
                .map(|o| (o.option, o.mean_reward, o.modal_final_state, o.static_frac))
                .collect(),
            empirical_mi: report.empirical_mi,
            static_frac: report.static_frac,
            coverage: report.coverage,
            room_fractions: report.room_fractions,
        })
    }

    /// The checkpoint in its on-disk text form.
    fn render(&self) -> String {
        self.inner.render()
    }

    fn __repr__(&self) -> String {
        format!(
            "Checkpoint(algorithm={:?}, n_options={}, horizon={})",
            self.algorithm(),
            self.n_options(),
            self.horizon()
        )
    }
}

/// A finished training run: the metrics series plus the final checkpoint.
#[pyclass(frozen)]
struct TrainResult {
    records: Vec<optionforge::trainers::RunRecord>,
    checkpoint: Checkpoint,
}

#[pymethods]
impl TrainResult {
    /// All windowed metrics records, oldest first.
    fn records(&self) -> Vec<RunRecord> {
        self.records.iter().map(RunRecord::from).collect()
    }

    /// The last metrics record of the run.
    #[getter]
    fn last(&self) -> PyResult<RunRecord> {
        self.records
            .last()
            .map(RunRecord::from)
            .ok_or_else(|| PyRuntimeError::new_err("run produced no records"))
    }

    #[getter]
    fn checkpoint(&self) -> Checkpoint {
        self.checkpoint.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "TrainResult({} records, {})",
            self.records.len(),
            self.checkpoint.__repr__()
        )
    }
}

/// Run one training job and return its metrics and final checkpoint.
#[pyfunction]
fn train(cfg: &TrainConfig) -> PyResult<TrainResult> {
    let outcome = core_train(&cfg.inner).map_err(to_py_err)?;
    let inner = CoreCheckpoint {
        config: RunConfig {
            env: cfg.env_cfg.clone(),
            train: cfg.inner.clone(),
        },
        policy: outcome.policy,
        prior: outcome.prior,
        discriminator: outcome.discriminator,
    };
    Ok(TrainResult {
        records: outcome.log.records,
        checkpoint: Checkpoint { inner },
    })
}

/// `(ln n, 0.0)`: the closed-form reward gap between a perfectly
/// discriminated observation and a never-seen one, under a uniform prior
/// over `n` options.
#[pyfunction]
fn reward_gap_analysis(n: usize) -> PyResult<(f64, f64)> {
    optionforge::rewards::reward_gap_analysis(n).map_err(to_py_err)
}

/// Plug-in mutual information (nats) of `(option, state)` index pairs.
#[pyfunction]
#[pyo3(name = "empirical_mi")]
fn empirical_mi_py(samples: Vec<(usize, usize)>, n_options: usize, n_states: usize) -> PyResult<f64> {
    let samples: Vec<_> = samples
        .into_iter()
        .map(|(w, s)| (OptionId(w), optionforge::env::StateId(s)))
        .collect();
    empirical_mi(&samples, n_options, n_states).map_err(to_py_err)
}

#[pymodule]
fn optionforge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Env>()?;
    m.add_class::<TrainConfig>()?;
    m.add_class::<TrainResult>()?;
    m.add_class::<RunRecord>()?;
    m.add_class::<Checkpoint>()?;
    m.add_class::<Capacity>()?;
    m.add_class::<EvalSummary>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(reward_gap_analysis, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_mi_py, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
