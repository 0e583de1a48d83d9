//! Option-conditioned tabular softmax policies with REINFORCE updates.
//!
//! One logit table per option, softmax per state. Updates are score-function
//! gradient ascent on the discounted return with an exponential-moving-
//! average baseline per (option, state) and an optional entropy bonus.

use rand::Rng;

use crate::env::{ActionId, StateId};
use crate::error::{Error, Result};
use crate::option_core::{softmax_into, OptionId, Trajectory};

/// Decay of the per-(option, state) return baseline.
const BASELINE_DECAY: f64 = 0.99;

/// Discounted return-to-go: `G_t = r_t + gamma * G_{t+1}`.
pub fn returns_to_go(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (t, &r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Tabular policy pi(a | s, option) = softmax over a logit row per
/// (option, state).
#[derive(Debug, Clone, PartialEq)]
pub struct IntraOptionPolicy {
    n_options: usize,
    n_states: usize,
    n_actions: usize,
    /// Row-major `[option][state][action]`.
    logits: Vec<f64>,
    entropy_coefficient: f64,
    /// EMA of observed returns per `[option][state]`, the REINFORCE baseline.
    baseline: Vec<f64>,
}

impl IntraOptionPolicy {
    /// Uniform policy (all-zero logits).
    pub fn new(
        n_options: usize,
        n_states: usize,
        n_actions: usize,
        entropy_coefficient: f64,
    ) -> Result<Self> {
        if n_options == 0 || n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidSpec(
                "policy needs positive option, state, and action counts".into(),
            ));
        }
        if entropy_coefficient < 0.0 || !entropy_coefficient.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "entropy coefficient must be non-negative, got {entropy_coefficient}"
            )));
        }
        Ok(IntraOptionPolicy {
            n_options,
            n_states,
            n_actions,
            logits: vec![0.0; n_options * n_states * n_actions],
            entropy_coefficient,
            baseline: vec![0.0; n_options * n_states],
        })
    }

    /// Rebuild from serialized tables (checkpoint reload).
    pub fn from_parts(
        n_options: usize,
        n_states: usize,
        n_actions: usize,
        entropy_coefficient: f64,
        logits: Vec<f64>,
        baseline: Vec<f64>,
    ) -> Result<Self> {
        let mut policy = Self::new(n_options, n_states, n_actions, entropy_coefficient)?;
        if logits.len() != policy.logits.len() || baseline.len() != policy.baseline.len() {
            return Err(Error::InvalidSpec(format!(
                "policy tables must hold {} logits and {} baselines, got {} and {}",
                policy.logits.len(),
                policy.baseline.len(),
                logits.len(),
                baseline.len()
            )));
        }
        if logits.iter().chain(&baseline).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("policy tables must be finite".into()));
        }
        policy.logits = logits;
        policy.baseline = baseline;
        Ok(policy)
    }

    pub fn n_options(&self) -> usize {
        self.n_options
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn entropy_coefficient(&self) -> f64 {
        self.entropy_coefficient
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    fn check(&self, s: StateId, w: OptionId) -> Result<()> {
        if w.0 >= self.n_options || s.0 >= self.n_states {
            return Err(Error::ContractViolation(format!(
                "policy queried at option {}, state {} (n_options={}, n_states={})",
                w.0, s.0, self.n_options, self.n_states
            )));
        }
        Ok(())
    }

    fn row_start(&self, s: StateId, w: OptionId) -> usize {
        (w.0 * self.n_states + s.0) * self.n_actions
    }

    fn logit_row(&self, s: StateId, w: OptionId) -> &[f64] {
        let lo = self.row_start(s, w);
        &self.logits[lo..lo + self.n_actions]
    }

    /// `pi(. | s, w)` as a dense vector; sums to 1 within 1e-12.
    pub fn probs(&self, s: StateId, w: OptionId) -> Result<Vec<f64>> {
        self.check(s, w)?;
        let mut out = vec![0.0; self.n_actions];
        softmax_into(self.logit_row(s, w), &mut out);
        Ok(out)
    }

    /// `ln pi(a | s, w)`.
    pub fn log_prob(&self, s: StateId, w: OptionId, a: ActionId) -> Result<f64> {
        self.check(s, w)?;
        if a.0 >= self.n_actions {
            return Err(Error::ContractViolation(format!(
                "action {} out of range (n_actions={})",
                a.0, self.n_actions
            )));
        }
        let row = self.logit_row(s, w);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
        Ok(row[a.0] - lse)
    }

    /// Sample an action.
    pub fn act<R: Rng + ?Sized>(&self, s: StateId, w: OptionId, rng: &mut R) -> Result<ActionId> {
        let probs = self.probs(s, w)?;
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut pick = self.n_actions - 1;
        for (i, &p) in probs.iter().enumerate() {
            cum += p;
            if u < cum {
                pick = i;
                break;
            }
        }
        Ok(ActionId(pick))
    }

    /// Deterministic evaluation action: argmax logit, lowest index on ties.
    pub fn greedy_act(&self, s: StateId, w: OptionId) -> Result<ActionId> {
        self.check(s, w)?;
        let row = self.logit_row(s, w);
        let mut best = 0;
        for (i, &z) in row.iter().enumerate().skip(1) {
            if z > row[best] {
                best = i;
            }
        }
        Ok(ActionId(best))
    }

    /// Shannon entropy of `pi(. | s, w)` in nats; lies in `[0, ln A]`.
    pub fn entropy(&self, s: StateId, w: OptionId) -> Result<f64> {
        let probs = self.probs(s, w)?;
        Ok(probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum())
    }

    /// REINFORCE step over one trajectory. `returns[t]` is the discounted
    /// return-to-go from step `t`. For every step, the logit row of the
    /// visited state moves along
    /// `(G_t - b) * grad ln pi(a_t) + entropy_coefficient * grad H`,
    /// where `b` is the per-(option, state) EMA baseline, updated after use.
    pub fn update_reinforce(
        &mut self,
        traj: &Trajectory,
        returns: &[f64],
        step_size: f64,
    ) -> Result<()> {
        if returns.len() != traj.len() {
            return Err(Error::ContractViolation(format!(
                "{} returns for a trajectory of {} steps",
                returns.len(),
                traj.len()
            )));
        }
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::ContractViolation(format!(
                "policy update needs a positive finite step size, got {step_size}"
            )));
        }
        let w = traj.option;
        let mut state = traj.start_state;
        let mut probs = vec![0.0; self.n_actions];
        for (t, (&a, &g)) in traj.actions.iter().zip(returns).enumerate() {
            self.check(state, w)?;
            if a.0 >= self.n_actions {
                return Err(Error::ContractViolation(format!(
                    "action {} out of range at step {t}",
                    a.0
                )));
            }
            if !g.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "non-finite return {g} at step {t} (option {}, state {})",
                    w.0, state.0
                )));
            }
            let b_idx = w.0 * self.n_states + state.0;
            let advantage = g - self.baseline[b_idx];
            self.baseline[b_idx] =
                BASELINE_DECAY * self.baseline[b_idx] + (1.0 - BASELINE_DECAY) * g;

            let lo = self.row_start(state, w);
            softmax_into(&self.logits[lo..lo + self.n_actions], &mut probs);
            let entropy: f64 = probs
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| -p * p.ln())
                .sum();
            for (k, &p) in probs.iter().enumerate() {
                let indicator = if k == a.0 { 1.0 } else { 0.0 };
                let grad_log_pi = indicator - p;
                // dH/dz_k for a softmax row.
                let grad_entropy = if p > 0.0 { -p * (p.ln() + entropy) } else { 0.0 };
                let delta =
                    step_size * (advantage * grad_log_pi + self.entropy_coefficient * grad_entropy);
                if !delta.is_finite() {
                    return Err(Error::NumericalFailure(format!(
                        "non-finite policy update at step {t} (option {}, state {})",
                        w.0, state.0
                    )));
                }
                self.logits[lo + k] += delta;
            }
            state = traj.next_states[t];
        }
        Ok(())
    }
}
