//! Classifiers from observations back to options.
//!
//! The discriminator is the learned posterior q(option | observation). Three
//! conditioning forms cover the three training objectives: a (start, final)
//! state pair, a single state, and a whole-trajectory digest. Two backends
//! implement each form: exact Laplace-smoothed counts, and a small MLP over
//! state features trained by cross-entropy SGD.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};

use crate::env::{EnvSpec, StateId};
use crate::error::{Error, Result};
use crate::option_core::{OptionId, Trajectory};

/// What the discriminator conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscriminatorKind {
    /// q(option | start state, final state).
    VicPair,
    /// q(option | single visited state).
    DiaynState,
    /// q(option | trajectory digest).
    ValorTrajectory,
}

impl DiscriminatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DiscriminatorKind::VicPair => "vic_pair",
            DiscriminatorKind::DiaynState => "diayn_state",
            DiscriminatorKind::ValorTrajectory => "valor_trajectory",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "vic_pair" => Ok(DiscriminatorKind::VicPair),
            "diayn_state" => Ok(DiscriminatorKind::DiaynState),
            "valor_trajectory" => Ok(DiscriminatorKind::ValorTrajectory),
            other => Err(Error::Parse(format!("unknown discriminator kind {other:?}"))),
        }
    }
}

/// A single conditioning observation, matching one [`DiscriminatorKind`].
#[derive(Debug, Clone, PartialEq)]
pub enum ConditioningKey {
    Pair { start: StateId, final_state: StateId },
    State(StateId),
    /// Fixed-length real summary of a trajectory; see [`trajectory_digest`].
    Digest(Vec<f64>),
}

impl ConditioningKey {
    pub fn pair(start: StateId, final_state: StateId) -> Self {
        ConditioningKey::Pair { start, final_state }
    }

    pub fn state(s: StateId) -> Self {
        ConditioningKey::State(s)
    }

    /// Digest key for a recorded trajectory.
    pub fn trajectory(env: &EnvSpec, traj: &Trajectory) -> Self {
        ConditioningKey::Digest(trajectory_digest(env, traj))
    }

    fn matches(&self, kind: DiscriminatorKind) -> bool {
        matches!(
            (self, kind),
            (ConditioningKey::Pair { .. }, DiscriminatorKind::VicPair)
                | (ConditioningKey::State(_), DiscriminatorKind::DiaynState)
                | (ConditioningKey::Digest(_), DiscriminatorKind::ValorTrajectory)
        )
    }
}

/// Deterministic fixed-length summary of a trajectory: the start-state
/// feature vector, the final-state feature vector, and the mean feature
/// vector of the strictly intermediate states (zeros when there are none).
pub fn trajectory_digest(env: &EnvSpec, traj: &Trajectory) -> Vec<f64> {
    let d = env.feature_dim();
    let mut out = Vec::with_capacity(3 * d);
    out.extend_from_slice(env.feature(traj.start_state));
    out.extend_from_slice(env.feature(traj.final_state()));
    let n_inter = traj.next_states.len().saturating_sub(1);
    if n_inter == 0 {
        out.extend(std::iter::repeat(0.0).take(d));
    } else {
        let mut mean = vec![0.0; d];
        for &s in &traj.next_states[..n_inter] {
            for (m, &f) in mean.iter_mut().zip(env.feature(s)) {
                *m += f;
            }
        }
        for m in &mut mean {
            *m /= n_inter as f64;
        }
        out.extend(mean);
    }
    out
}

/// Lookup key for the count table. Digests are keyed by the exact bit
/// patterns of their components, so equal digests always share a row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum TableKey {
    Pair(usize, usize),
    State(usize),
    Digest(Vec<u64>),
}

impl TableKey {
    fn from_key(key: &ConditioningKey) -> Self {
        match key {
            ConditioningKey::Pair { start, final_state } => {
                TableKey::Pair(start.0, final_state.0)
            }
            ConditioningKey::State(s) => TableKey::State(s.0),
            ConditioningKey::Digest(v) => {
                TableKey::Digest(v.iter().map(|x| x.to_bits()).collect())
            }
        }
    }
}

/// Laplace-smoothed count table: q(w | key) = (c_w + alpha) / (C + N alpha).
#[derive(Debug, Clone, PartialEq)]
pub struct TabularBackend {
    counts: BTreeMap<TableKey, Vec<f64>>,
    alpha: f64,
    n_options: usize,
}

impl TabularBackend {
    pub fn new(n_options: usize, alpha: f64) -> Result<Self> {
        if alpha <= 0.0 || !alpha.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "smoothing alpha must be positive and finite, got {alpha}"
            )));
        }
        Ok(TabularBackend {
            counts: BTreeMap::new(),
            alpha,
            n_options,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn counts(&self) -> &BTreeMap<TableKey, Vec<f64>> {
        &self.counts
    }

    /// Rebuild from serialized counts (checkpoint reload).
    pub fn from_counts(
        n_options: usize,
        alpha: f64,
        counts: BTreeMap<TableKey, Vec<f64>>,
    ) -> Result<Self> {
        let mut backend = TabularBackend::new(n_options, alpha)?;
        for (key, row) in counts {
            if row.len() != n_options || row.iter().any(|&c| c < 0.0 || !c.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "count row for {key:?} is not a valid length-{n_options} histogram"
                )));
            }
            backend.counts.insert(key, row);
        }
        Ok(backend)
    }

    fn log_probs(&self, key: &TableKey) -> Vec<f64> {
        let n = self.n_options as f64;
        match self.counts.get(key) {
            None => vec![-n.ln(); self.n_options],
            Some(row) => {
                let total: f64 = row.iter().sum();
                let denom = total + n * self.alpha;
                row.iter().map(|&c| ((c + self.alpha) / denom).ln()).collect()
            }
        }
    }

    fn observe(&mut self, key: TableKey, w: usize) {
        let row = self
            .counts
            .entry(key)
            .or_insert_with(|| vec![0.0; self.n_options]);
        row[w] += 1.0;
    }
}

/// One dense layer; weights row-major `[n_out][n_in]`.
#[derive(Debug, Clone, PartialEq)]
struct Layer {
    w: Vec<f64>,
    b: Vec<f64>,
    n_in: usize,
    n_out: usize,
}

impl Layer {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.n_out {
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            let z: f64 = row.iter().zip(x).map(|(w, x)| w * x).sum();
            out.push(z + self.b[o]);
        }
    }
}

/// Feed-forward net with tanh hidden layers, a linear output layer, and a
/// softmax read-out, trained by single-sample cross-entropy SGD. Holds a
/// copy of the environment's state-feature table to build its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpBackend {
    layers: Vec<Layer>,
    n_options: usize,
    input_dim: usize,
    features: Vec<f64>,
    feature_dim: usize,
    n_states: usize,
}

/// Largest relative disagreement between two gradient vectors, with the
/// per-component denominator floored at 1e-3 so near-zero components are
/// compared absolutely.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-3))
        .fold(0.0, f64::max)
}

impl MlpBackend {
    fn new<R: Rng + ?Sized>(
        kind: DiscriminatorKind,
        n_options: usize,
        env: &EnvSpec,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        let input_dim = Self::input_dim_for(kind, env.feature_dim());
        if hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidSpec("hidden layer width must be positive".into()));
        }
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(n_options);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (n_in, n_out) = (pair[0], pair[1]);
            // Xavier-uniform initialization keeps early softmax outputs
            // close to uniform, so untrained rewards sit near their
            // closed-form zero point.
            let bound = (6.0 / (n_in + n_out) as f64).sqrt();
            let w = (0..n_in * n_out)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            layers.push(Layer {
                w,
                b: vec![0.0; n_out],
                n_in,
                n_out,
            });
        }
        let mut features = Vec::with_capacity(env.n_states() * env.feature_dim());
        for s in 0..env.n_states() {
            features.extend_from_slice(env.feature(StateId(s)));
        }
        Ok(MlpBackend {
            layers,
            n_options,
            input_dim,
            features,
            feature_dim: env.feature_dim(),
            n_states: env.n_states(),
        })
    }

    fn input_dim_for(kind: DiscriminatorKind, feature_dim: usize) -> usize {
        match kind {
            DiscriminatorKind::VicPair => 2 * feature_dim,
            DiscriminatorKind::DiaynState => feature_dim,
            DiscriminatorKind::ValorTrajectory => 3 * feature_dim,
        }
    }

    fn feature(&self, s: StateId) -> &[f64] {
        let lo = s.0 * self.feature_dim;
        &self.features[lo..lo + self.feature_dim]
    }

    fn input(&self, key: &ConditioningKey) -> Result<Vec<f64>> {
        let x = match key {
            ConditioningKey::Pair { start, final_state } => {
                let mut x = Vec::with_capacity(2 * self.feature_dim);
                x.extend_from_slice(self.feature(*start));
                x.extend_from_slice(self.feature(*final_state));
                x
            }
            ConditioningKey::State(s) => self.feature(*s).to_vec(),
            ConditioningKey::Digest(v) => v.clone(),
        };
        if x.len() != self.input_dim {
            return Err(Error::ContractViolation(format!(
                "observation has {} inputs, backend expects {}",
                x.len(),
                self.input_dim
            )));
        }
        Ok(x)
    }

    /// Returns the activation of every layer: `acts[0]` is the input,
    /// `acts[L]` the pre-softmax logits.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let mut buf = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.forward(acts.last().expect("nonempty"), &mut buf);
            if l + 1 < self.layers.len() {
                for v in &mut buf {
                    *v = v.tanh();
                }
            }
            acts.push(buf.clone());
        }
        acts
    }

    fn log_softmax(logits: &[f64]) -> Vec<f64> {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
        logits.iter().map(|&z| z - lse).collect()
    }

    fn log_probs(&self, x: &[f64]) -> Vec<f64> {
        let acts = self.forward(x);
        Self::log_softmax(acts.last().expect("nonempty"))
    }

    fn loss(&self, x: &[f64], w: usize) -> f64 {
        -self.log_probs(x)[w]
    }

    /// Cross-entropy gradient for one labeled input, flattened in layer
    /// order (weights row-major, then biases).
    fn grad(&self, x: &[f64], w: usize) -> Vec<f64> {
        let acts = self.forward(x);
        let logits = acts.last().expect("nonempty");
        let log_probs = Self::log_softmax(logits);
        // d loss / d logit_k = p_k - [k == w]
        let mut delta: Vec<f64> = log_probs.iter().map(|&lp| lp.exp()).collect();
        delta[w] -= 1.0;

        let mut grads_rev = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let a_prev = &acts[l];
            let mut gw = vec![0.0; layer.w.len()];
            for o in 0..layer.n_out {
                for i in 0..layer.n_in {
                    gw[o * layer.n_in + i] = delta[o] * a_prev[i];
                }
            }
            let gb = delta.clone();
            if l > 0 {
                // Push the error through W and the tanh of the layer below.
                let mut prev = vec![0.0; layer.n_in];
                for o in 0..layer.n_out {
                    for i in 0..layer.n_in {
                        prev[i] += layer.w[o * layer.n_in + i] * delta[o];
                    }
                }
                for (d, &a) in prev.iter_mut().zip(a_prev) {
                    *d *= 1.0 - a * a;
                }
                delta = prev;
            }
            grads_rev.push((gw, gb));
        }
        let mut flat = Vec::with_capacity(self.param_count());
        for (gw, gb) in grads_rev.into_iter().rev() {
            flat.extend(gw);
            flat.extend(gb);
        }
        flat
    }

    fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flattened parameters in layer order (weights row-major, then biases).
    pub fn params(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            flat.extend_from_slice(&layer.w);
            flat.extend_from_slice(&layer.b);
        }
        flat
    }

    /// Widths of each layer as `(n_in, n_out)` pairs.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.n_in, l.n_out)).collect()
    }

    fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::InvalidSpec(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut idx = 0;
        for layer in &mut self.layers {
            let w_len = layer.w.len();
            layer.w.copy_from_slice(&flat[idx..idx + w_len]);
            idx += w_len;
            let b_len = layer.b.len();
            layer.b.copy_from_slice(&flat[idx..idx + b_len]);
            idx += b_len;
        }
        Ok(())
    }

    fn apply_grad(&mut self, flat: &[f64], step: f64) {
        let mut idx = 0;
        for layer in &mut self.layers {
            for w in &mut layer.w {
                *w -= step * flat[idx];
                idx += 1;
            }
            for b in &mut layer.b {
                *b -= step * flat[idx];
                idx += 1;
            }
        }
    }

    /// Max relative error between the analytic gradient and central finite
    /// differences with perturbation `h` over every parameter.
    fn gradient_check_input(&self, x: &[f64], w: usize, h: f64) -> f64 {
        let analytic = self.grad(x, w);
        let mut probe = self.clone();
        let mut params = probe.params();
        let mut numeric = Vec::with_capacity(params.len());
        for i in 0..params.len() {
            let orig = params[i];
            params[i] = orig + h;
            probe.set_params(&params).expect("same shape");
            let up = probe.loss(x, w);
            params[i] = orig - h;
            probe.set_params(&params).expect("same shape");
            let down = probe.loss(x, w);
            params[i] = orig;
            numeric.push((up - down) / (2.0 * h));
        }
        max_relative_error(&analytic, &numeric)
    }
}

/// Which implementation backs a [`Discriminator`].
#[derive(Debug, Clone, PartialEq)]
pub enum DiscriminatorBackend {
    Tabular(TabularBackend),
    Mlp(MlpBackend),
}

/// The option posterior q(option | observation).
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    kind: DiscriminatorKind,
    n_options: usize,
    n_states: usize,
    backend: DiscriminatorBackend,
}

impl Discriminator {
    /// Exact count-based posterior with Laplace smoothing `alpha`.
    pub fn tabular(
        kind: DiscriminatorKind,
        n_options: usize,
        env: &EnvSpec,
        alpha: f64,
    ) -> Result<Self> {
        if n_options == 0 {
            return Err(Error::InvalidSpec("discriminator needs n_options >= 1".into()));
        }
        Ok(Discriminator {
            kind,
            n_options,
            n_states: env.n_states(),
            backend: DiscriminatorBackend::Tabular(TabularBackend::new(n_options, alpha)?),
        })
    }

    /// MLP posterior over state features; `hidden` lists hidden widths
    /// (empty for plain softmax regression).
    pub fn mlp<R: Rng + ?Sized>(
        kind: DiscriminatorKind,
        n_options: usize,
        env: &EnvSpec,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        if n_options == 0 {
            return Err(Error::InvalidSpec("discriminator needs n_options >= 1".into()));
        }
        Ok(Discriminator {
            kind,
            n_options,
            n_states: env.n_states(),
            backend: DiscriminatorBackend::Mlp(MlpBackend::new(
                kind, n_options, env, hidden, rng,
            )?),
        })
    }

    /// Rebuild an MLP discriminator from serialized parameters.
    pub fn mlp_from_params(
        kind: DiscriminatorKind,
        n_options: usize,
        env: &EnvSpec,
        hidden: &[usize],
        params: &[f64],
    ) -> Result<Self> {
        // Initialization is immediately overwritten, so any seed works.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut disc = Discriminator::mlp(kind, n_options, env, hidden, &mut rng)?;
        match &mut disc.backend {
            DiscriminatorBackend::Mlp(mlp) => mlp.set_params(params)?,
            DiscriminatorBackend::Tabular(_) => unreachable!("constructed as mlp"),
        }
        Ok(disc)
    }

    /// Rebuild a tabular discriminator from serialized counts.
    pub fn tabular_from_counts(
        kind: DiscriminatorKind,
        n_options: usize,
        env: &EnvSpec,
        alpha: f64,
        counts: BTreeMap<TableKey, Vec<f64>>,
    ) -> Result<Self> {
        Ok(Discriminator {
            kind,
            n_options,
            n_states: env.n_states(),
            backend: DiscriminatorBackend::Tabular(TabularBackend::from_counts(
                n_options, alpha, counts,
            )?),
        })
    }

    pub fn kind(&self) -> DiscriminatorKind {
        self.kind
    }

    pub fn n_options(&self) -> usize {
        self.n_options
    }

    pub fn backend(&self) -> &DiscriminatorBackend {
        &self.backend
    }

    fn check_key(&self, key: &ConditioningKey) -> Result<()> {
        if !key.matches(self.kind) {
            return Err(Error::ContractViolation(format!(
                "observation {key:?} does not match discriminator kind {}",
                self.kind.as_str()
            )));
        }
        let state_ok = |s: StateId| s.0 < self.n_states;
        let ok = match key {
            ConditioningKey::Pair { start, final_state } => {
                state_ok(*start) && state_ok(*final_state)
            }
            ConditioningKey::State(s) => state_ok(*s),
            ConditioningKey::Digest(v) => v.iter().all(|x| x.is_finite()),
        };
        if !ok {
            return Err(Error::ContractViolation(format!(
                "observation {key:?} is out of range for {} states",
                self.n_states
            )));
        }
        Ok(())
    }

    fn check_option(&self, w: OptionId) -> Result<()> {
        if w.0 >= self.n_options {
            return Err(Error::ContractViolation(format!(
                "option {} out of range (n_options={})",
                w.0, self.n_options
            )));
        }
        Ok(())
    }

    /// `ln q(option | key)` for every option; each entry is finite and the
    /// exponentials sum to 1.
    pub fn log_probs(&self, key: &ConditioningKey) -> Result<Vec<f64>> {
        self.check_key(key)?;
        match &self.backend {
            DiscriminatorBackend::Tabular(t) => Ok(t.log_probs(&TableKey::from_key(key))),
            DiscriminatorBackend::Mlp(m) => {
                let x = m.input(key)?;
                Ok(m.log_probs(&x))
            }
        }
    }

    /// `ln q(w | key)`.
    pub fn predict_log_prob(&self, key: &ConditioningKey, w: OptionId) -> Result<f64> {
        self.check_option(w)?;
        Ok(self.log_probs(key)?[w.0])
    }

    /// One supervised step toward `w` at `key`. Tabular backends increment
    /// the count (ignoring `step_size`); the MLP takes one cross-entropy
    /// SGD step. Returns the cross-entropy loss measured BEFORE the update.
    pub fn update(&mut self, key: &ConditioningKey, w: OptionId, step_size: f64) -> Result<f64> {
        self.check_key(key)?;
        self.check_option(w)?;
        match &mut self.backend {
            DiscriminatorBackend::Tabular(t) => {
                let table_key = TableKey::from_key(key);
                let loss = -t.log_probs(&table_key)[w.0];
                t.observe(table_key, w.0);
                Ok(loss)
            }
            DiscriminatorBackend::Mlp(m) => {
                if !(step_size > 0.0 && step_size.is_finite()) {
                    return Err(Error::ContractViolation(format!(
                        "MLP update needs a positive finite step size, got {step_size}"
                    )));
                }
                let x = m.input(key)?;
                let loss = m.loss(&x, w.0);
                let grad = m.grad(&x, w.0);
                if grad.iter().any(|g| !g.is_finite()) || !loss.is_finite() {
                    return Err(Error::NumericalFailure(format!(
                        "non-finite discriminator gradient at {key:?}, option {}, loss {loss}",
                        w.0
                    )));
                }
                m.apply_grad(&grad, step_size);
                Ok(loss)
            }
        }
    }

    /// Compare the analytic cross-entropy gradient against central finite
    /// differences (perturbation 1e-5) over all parameters; returns the max
    /// relative error. MLP backends only.
    pub fn gradient_check(&self, key: &ConditioningKey, w: OptionId) -> Result<f64> {
        self.check_key(key)?;
        self.check_option(w)?;
        match &self.backend {
            DiscriminatorBackend::Tabular(_) => Err(Error::ContractViolation(
                "gradient_check requires an MLP backend".into(),
            )),
            DiscriminatorBackend::Mlp(m) => {
                let x = m.input(key)?;
                Ok(m.gradient_check_input(&x, w.0, 1e-5))
            }
        }
    }
}
