//! Options, priors over options, and recorded trajectories.
//!
//! An option here is nothing but a discrete identifier `0..n_options`; all
//! structure lives in the option-conditioned policy and the discriminator.
//! The prior `p(option | start state)` is either fixed uniform or a learned
//! per-state softmax updated by a score-function rule.

use rand::Rng;

use crate::env::{ActionId, EnvSpec, StateId};
use crate::error::{Error, Result};

/// Index of an option, valid for one run's `n_options`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OptionId(pub usize);

/// Distribution over options conditioned on the start state.
#[derive(Debug, Clone, PartialEq)]
pub enum OptionPrior {
    /// `p(option | s) = 1 / n` everywhere.
    Uniform { n_options: usize },
    /// Per-state softmax over free logits, one row per state.
    Learned {
        n_options: usize,
        /// Row-major `[state][option]` logits.
        logits: Vec<f64>,
        n_states: usize,
    },
}

/// Numerically safe softmax (max subtraction), written into `out`.
pub(crate) fn softmax_into(logits: &[f64], out: &mut [f64]) {
    debug_assert_eq!(logits.len(), out.len());
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        let e = (z - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

impl OptionPrior {
    pub fn uniform(n_options: usize) -> Result<Self> {
        if n_options == 0 {
            return Err(Error::InvalidSpec("prior needs n_options >= 1".into()));
        }
        Ok(OptionPrior::Uniform { n_options })
    }

    /// A learned prior starting from all-zero logits (uniform).
    pub fn learned(n_options: usize, n_states: usize) -> Result<Self> {
        if n_options == 0 || n_states == 0 {
            return Err(Error::InvalidSpec(
                "prior needs n_options >= 1 and n_states >= 1".into(),
            ));
        }
        Ok(OptionPrior::Learned {
            n_options,
            logits: vec![0.0; n_states * n_options],
            n_states,
        })
    }

    /// A learned prior with explicit logits, for checkpoint reload.
    pub fn learned_from_logits(n_options: usize, n_states: usize, logits: Vec<f64>) -> Result<Self> {
        if logits.len() != n_states * n_options {
            return Err(Error::InvalidSpec(format!(
                "prior logits must hold {} x {} entries, got {}",
                n_states,
                n_options,
                logits.len()
            )));
        }
        Ok(OptionPrior::Learned {
            n_options,
            logits,
            n_states,
        })
    }

    pub fn n_options(&self) -> usize {
        match self {
            OptionPrior::Uniform { n_options } => *n_options,
            OptionPrior::Learned { n_options, .. } => *n_options,
        }
    }

    pub fn is_learned(&self) -> bool {
        matches!(self, OptionPrior::Learned { .. })
    }

    pub(crate) fn logits_row(&self, state: StateId) -> Option<&[f64]> {
        match self {
            OptionPrior::Uniform { .. } => None,
            OptionPrior::Learned {
                n_options, logits, ..
            } => {
                let lo = state.0 * n_options;
                Some(&logits[lo..lo + n_options])
            }
        }
    }

    fn check_state(&self, state: StateId) -> Result<()> {
        if let OptionPrior::Learned { n_states, .. } = self {
            if state.0 >= *n_states {
                return Err(Error::ContractViolation(format!(
                    "prior queried at state {} but covers {} states",
                    state.0, n_states
                )));
            }
        }
        Ok(())
    }

    /// `p(option | state)` as a dense vector.
    pub fn probs(&self, state: StateId) -> Result<Vec<f64>> {
        self.check_state(state)?;
        match self {
            OptionPrior::Uniform { n_options } => Ok(vec![1.0 / *n_options as f64; *n_options]),
            OptionPrior::Learned { n_options, .. } => {
                let row = self.logits_row(state).expect("learned prior has logits");
                let mut out = vec![0.0; *n_options];
                softmax_into(row, &mut out);
                Ok(out)
            }
        }
    }

    /// `log p(option | state)`.
    pub fn log_prob(&self, state: StateId, option: OptionId) -> Result<f64> {
        self.check_state(state)?;
        let n = self.n_options();
        if option.0 >= n {
            return Err(Error::ContractViolation(format!(
                "option {} out of range (n_options={n})",
                option.0
            )));
        }
        match self {
            OptionPrior::Uniform { n_options } => Ok(-(*n_options as f64).ln()),
            OptionPrior::Learned { .. } => {
                let row = self.logits_row(state).expect("learned prior has logits");
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
                Ok(row[option.0] - lse)
            }
        }
    }

    /// Draw an option from `p(· | state)`.
    pub fn sample<R: Rng + ?Sized>(&self, state: StateId, rng: &mut R) -> Result<OptionId> {
        let probs = self.probs(state)?;
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut pick = probs.len() - 1;
        for (i, &p) in probs.iter().enumerate() {
            cum += p;
            if u < cum {
                pick = i;
                break;
            }
        }
        Ok(OptionId(pick))
    }

    /// Shannon entropy of `p(· | state)` in nats.
    pub fn entropy(&self, state: StateId) -> Result<f64> {
        let probs = self.probs(state)?;
        Ok(probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum())
    }

    /// Score-function update of the logits at `state`:
    /// `logits += step * weight * (one_hot(option) - p(· | state))`.
    ///
    /// `weight` is the reinforcement signal for having chosen `option`
    /// (typically the option's intrinsic return). No-op statistics never
    /// leave the chosen state's row. Uniform priors reject the update.
    pub fn reinforce(
        &mut self,
        state: StateId,
        option: OptionId,
        weight: f64,
        step: f64,
    ) -> Result<()> {
        self.check_state(state)?;
        if option.0 >= self.n_options() {
            return Err(Error::ContractViolation(format!(
                "option {} out of range (n_options={})",
                option.0,
                self.n_options()
            )));
        }
        if !weight.is_finite() || !step.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "prior update with weight {weight}, step {step} at state {}",
                state.0
            )));
        }
        match self {
            OptionPrior::Uniform { .. } => Err(Error::ContractViolation(
                "cannot reinforce a uniform prior".into(),
            )),
            OptionPrior::Learned { n_options, logits, .. } => {
                let n = *n_options;
                let lo = state.0 * n;
                let mut probs = vec![0.0; n];
                softmax_into(&logits[lo..lo + n], &mut probs);
                for (i, p) in probs.iter().enumerate() {
                    let indicator = if i == option.0 { 1.0 } else { 0.0 };
                    logits[lo + i] += step * weight * (indicator - p);
                }
                Ok(())
            }
        }
    }
}

/// One recorded option execution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub option: OptionId,
    pub start_state: StateId,
    pub actions: Vec<ActionId>,
    /// `next_states[t]` is the state after `actions[t]`; the final state is
    /// the last entry (or `start_state` for an empty trajectory).
    pub next_states: Vec<StateId>,
}

impl Trajectory {
    pub fn new(option: OptionId, start_state: StateId) -> Self {
        Trajectory {
            option,
            start_state,
            actions: Vec::new(),
            next_states: Vec::new(),
        }
    }

    pub fn push(&mut self, action: ActionId, next_state: StateId) {
        self.actions.push(action);
        self.next_states.push(next_state);
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Final state of the execution.
    pub fn final_state(&self) -> StateId {
        self.next_states.last().copied().unwrap_or(self.start_state)
    }

    /// States in visit order including the start: `s_0, s_1, ..., s_T`.
    pub fn states(&self) -> Vec<StateId> {
        let mut out = Vec::with_capacity(self.next_states.len() + 1);
        out.push(self.start_state);
        out.extend_from_slice(&self.next_states);
        out
    }

    /// Check internal consistency against an environment: equal action and
    /// state counts, ids in range, every step on the support of P, and no
    /// transition out of a terminal state.
    pub fn validate(&self, env: &EnvSpec) -> Result<()> {
        if self.actions.len() != self.next_states.len() {
            return Err(Error::ContractViolation(format!(
                "trajectory has {} actions but {} next states",
                self.actions.len(),
                self.next_states.len()
            )));
        }
        let mut current = self.start_state;
        if current.0 >= env.n_states() {
            return Err(Error::ContractViolation("start state out of range".into()));
        }
        for (t, (&a, &next)) in self.actions.iter().zip(&self.next_states).enumerate() {
            if env.is_terminal(current) {
                return Err(Error::ContractViolation(format!(
                    "step {t} leaves terminal state {}",
                    current.0
                )));
            }
            if a.0 >= env.n_actions() || next.0 >= env.n_states() {
                return Err(Error::ContractViolation(format!(
                    "step {t} out of range: action {}, state {}",
                    a.0, next.0
                )));
            }
            if env.transition_prob(current, a, next) <= 0.0 {
                return Err(Error::ContractViolation(format!(
                    "step {t} transition {} -[{}]-> {} has zero probability",
                    current.0, a.0, next.0
                )));
            }
            current = next;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::make_chain;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_prior_basics() {
        let prior = OptionPrior::uniform(50).unwrap();
        let s = StateId(3);
        assert_relative_eq!(prior.log_prob(s, OptionId(7)).unwrap(), -(50f64).ln());
        // -ln 50 = -3.912 to three decimals.
        assert!((prior.log_prob(s, OptionId(0)).unwrap() + 3.912_023).abs() < 1e-6);
        assert_relative_eq!(prior.entropy(s).unwrap(), (50f64).ln(), epsilon = 1e-12);
        let probs = prior.probs(s).unwrap();
        assert_eq!(probs.len(), 50);
        assert_relative_eq!(probs.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn learned_prior_starts_uniform() {
        let prior = OptionPrior::learned(4, 3).unwrap();
        assert_relative_eq!(prior.entropy(StateId(1)).unwrap(), (4f64).ln());
        assert_relative_eq!(prior.log_prob(StateId(0), OptionId(2)).unwrap(), -(4f64).ln());
    }

    #[test]
    fn learned_prior_softmax_matches_hand_logits() {
        let logits = vec![0.0, 1.0, -1.0, 0.0, 0.0, 0.0];
        let prior = OptionPrior::learned_from_logits(3, 2, logits).unwrap();
        let probs = prior.probs(StateId(0)).unwrap();
        let z: f64 = 1.0 + 1f64.exp() + (-1f64).exp();
        assert_relative_eq!(probs[0], 1.0 / z, max_relative = 1e-12);
        assert_relative_eq!(probs[1], 1f64.exp() / z, max_relative = 1e-12);
        // Second state stayed uniform.
        assert_relative_eq!(prior.entropy(StateId(1)).unwrap(), (3f64).ln());
    }

    #[test]
    fn sample_frequencies_match_probs() {
        let logits = vec![0.0, (3f64).ln()];
        let prior = OptionPrior::learned_from_logits(2, 1, logits).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let mut ones = 0;
        for _ in 0..draws {
            if prior.sample(StateId(0), &mut rng).unwrap() == OptionId(1) {
                ones += 1;
            }
        }
        let freq = ones as f64 / draws as f64;
        assert!((freq - 0.75).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn reinforce_moves_mass_toward_rewarded_option() {
        let mut prior = OptionPrior::learned(3, 2).unwrap();
        for _ in 0..200 {
            prior.reinforce(StateId(0), OptionId(1), 1.0, 0.1).unwrap();
        }
        let probs = prior.probs(StateId(0)).unwrap();
        assert!(probs[1] > 0.9, "p = {probs:?}");
        // The other state's row is untouched.
        assert_relative_eq!(prior.entropy(StateId(1)).unwrap(), (3f64).ln());
    }

    #[test]
    fn reinforce_negative_weight_pushes_mass_away() {
        let mut prior = OptionPrior::learned(2, 1).unwrap();
        for _ in 0..100 {
            prior.reinforce(StateId(0), OptionId(0), -1.0, 0.1).unwrap();
        }
        let probs = prior.probs(StateId(0)).unwrap();
        assert!(probs[0] < 0.1, "p = {probs:?}");
    }

    #[test]
    fn reinforce_matches_finite_difference_of_log_prob() {
        // The score-function direction is the gradient of log p(option|s)
        // in the logits; check each coordinate against central differences.
        let logits = vec![0.3, -0.7, 1.1];
        let state = StateId(0);
        let option = OptionId(2);
        let h = 1e-6;
        for k in 0..3 {
            let mut plus = logits.clone();
            plus[k] += h;
            let mut minus = logits.clone();
            minus[k] -= h;
            let lp_plus = OptionPrior::learned_from_logits(3, 1, plus)
                .unwrap()
                .log_prob(state, option)
                .unwrap();
            let lp_minus = OptionPrior::learned_from_logits(3, 1, minus)
                .unwrap()
                .log_prob(state, option)
                .unwrap();
            let numeric = (lp_plus - lp_minus) / (2.0 * h);

            let mut moved = OptionPrior::learned_from_logits(3, 1, logits.clone()).unwrap();
            moved.reinforce(state, option, 1.0, 1.0).unwrap();
            let analytic = match (&moved, &OptionPrior::learned_from_logits(3, 1, logits.clone()).unwrap()) {
                (
                    OptionPrior::Learned { logits: after, .. },
                    OptionPrior::Learned { logits: before, .. },
                ) => after[k] - before[k],
                _ => unreachable!(),
            };
            assert_relative_eq!(analytic, numeric, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn uniform_prior_rejects_reinforce() {
        let mut prior = OptionPrior::uniform(4).unwrap();
        assert!(matches!(
            prior.reinforce(StateId(0), OptionId(0), 1.0, 0.1),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn out_of_range_option_rejected() {
        let prior = OptionPrior::uniform(4).unwrap();
        assert!(matches!(
            prior.log_prob(StateId(0), OptionId(4)),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn trajectory_final_state_and_states() {
        let mut traj = Trajectory::new(OptionId(0), StateId(2));
        assert_eq!(traj.final_state(), StateId(2));
        traj.push(ActionId(1), StateId(3));
        traj.push(ActionId(0), StateId(2));
        assert_eq!(traj.final_state(), StateId(2));
        assert_eq!(
            traj.states(),
            vec![StateId(2), StateId(3), StateId(2)]
        );
        assert_eq!(traj.len(), 2);
    }

    #[test]
    fn trajectory_validate_against_env() {
        let env = make_chain(3, 0.0).unwrap();
        let mut good = Trajectory::new(OptionId(0), StateId(0));
        good.push(ActionId(1), StateId(1));
        good.push(ActionId(1), StateId(2));
        good.validate(&env).unwrap();

        // Impossible jump: deterministic chain cannot move two cells.
        let mut bad = Trajectory::new(OptionId(0), StateId(0));
        bad.push(ActionId(1), StateId(2));
        assert!(matches!(
            bad.validate(&env),
            Err(Error::ContractViolation(_))
        ));
    }
}
