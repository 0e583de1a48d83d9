//! Ground-truth computations over enumerable environments.
//!
//! Because every environment carries its full transition tensor, the
//! distribution of final states under any tabular policy is computable
//! exactly by matrix propagation. That turns mutual information between
//! options and final states, and the capacity-achieving option prior, into
//! closed-form oracles that training runs are measured against.

use crate::env::{ActionId, EnvSpec, StateId};
use crate::error::{Error, Result};
use crate::option_core::{OptionId, OptionPrior, Trajectory};
use crate::policy::IntraOptionPolicy;

/// Enumeration guard: largest state count exact computations accept.
pub const MAX_EXACT_STATES: usize = 10_000;
/// Enumeration guard: longest horizon exact computations accept.
pub const MAX_EXACT_HORIZON: usize = 200;

/// Tolerance for "distribution sums to one" checks.
const SUM_TOL: f64 = 1e-10;

fn check_guards(env: &EnvSpec, horizon: usize) -> Result<()> {
    if env.n_states() > MAX_EXACT_STATES {
        return Err(Error::InvalidSpec(format!(
            "exact enumeration supports at most {MAX_EXACT_STATES} states, env has {}",
            env.n_states()
        )));
    }
    if horizon > MAX_EXACT_HORIZON {
        return Err(Error::InvalidSpec(format!(
            "exact enumeration supports horizons up to {MAX_EXACT_HORIZON}, got {horizon}"
        )));
    }
    Ok(())
}

/// `x ln x` with the measure-theoretic `0 ln 0 = 0` convention.
fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Exact distribution of the state reached after `horizon` steps of
/// `pi(. | ., w)` from `s0`. Terminal states absorb: mass that reaches them
/// stays, matching rollouts that stop on termination.
pub fn exact_final_state_distribution(
    env: &EnvSpec,
    policy: &IntraOptionPolicy,
    w: OptionId,
    s0: StateId,
    horizon: usize,
) -> Result<Vec<f64>> {
    check_guards(env, horizon)?;
    if s0.0 >= env.n_states() {
        return Err(Error::ContractViolation(format!(
            "start state {} out of range (S={})",
            s0.0,
            env.n_states()
        )));
    }
    if policy.n_states() != env.n_states() || policy.n_actions() != env.n_actions() {
        return Err(Error::ContractViolation(format!(
            "policy shaped for {}x{} but env has {}x{}",
            policy.n_states(),
            policy.n_actions(),
            env.n_states(),
            env.n_actions()
        )));
    }
    let s_count = env.n_states();

    // Policy-averaged transition matrix for this option, terminals absorbing.
    let mut m = vec![0.0; s_count * s_count];
    for s in 0..s_count {
        if env.is_terminal(StateId(s)) {
            m[s * s_count + s] = 1.0;
            continue;
        }
        let action_probs = policy.probs(StateId(s), w)?;
        for (a, &pa) in action_probs.iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            for (next, &p) in env.row(StateId(s), ActionId(a)).iter().enumerate() {
                m[s * s_count + next] += pa * p;
            }
        }
    }

    let mut dist = vec![0.0; s_count];
    dist[s0.0] = 1.0;
    let mut next = vec![0.0; s_count];
    for _ in 0..horizon {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (s, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for (sp, &p) in m[s * s_count..(s + 1) * s_count].iter().enumerate() {
                next[sp] += mass * p;
            }
        }
        std::mem::swap(&mut dist, &mut next);
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::NumericalFailure(format!(
            "final-state distribution sums to {total}"
        )));
    }
    Ok(dist)
}

/// Joint distribution p(option, final state | s0) for a full system of
/// prior, policies, and environment.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    n_options: usize,
    n_states: usize,
    /// Row-major `[option][state]`.
    p: Vec<f64>,
}

impl JointDistribution {
    /// Build from an explicit table; validates shape and normalization.
    pub fn from_table(n_options: usize, n_states: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != n_options * n_states {
            return Err(Error::InvalidSpec(format!(
                "joint table needs {} entries, got {}",
                n_options * n_states,
                p.len()
            )));
        }
        if p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidSpec("joint entries must be non-negative".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidSpec(format!("joint sums to {total}, not 1")));
        }
        Ok(JointDistribution {
            n_options,
            n_states,
            p,
        })
    }

    /// Exact joint of (option, final state) when options are drawn from
    /// `prior` at `s0` and executed for `horizon` steps.
    pub fn from_system(
        env: &EnvSpec,
        policy: &IntraOptionPolicy,
        prior: &OptionPrior,
        s0: StateId,
        horizon: usize,
    ) -> Result<Self> {
        if prior.n_options() != policy.n_options() {
            return Err(Error::ContractViolation(format!(
                "prior covers {} options but policy covers {}",
                prior.n_options(),
                policy.n_options()
            )));
        }
        let n_options = prior.n_options();
        let n_states = env.n_states();
        let prior_probs = prior.probs(s0)?;
        let mut p = vec![0.0; n_options * n_states];
        for w in 0..n_options {
            let dist = exact_final_state_distribution(env, policy, OptionId(w), s0, horizon)?;
            for (s, &q) in dist.iter().enumerate() {
                p[w * n_states + s] = prior_probs[w] * q;
            }
        }
        JointDistribution::from_table(n_options, n_states, p)
    }

    pub fn n_options(&self) -> usize {
        self.n_options
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn prob(&self, w: OptionId, s: StateId) -> f64 {
        self.p[w.0 * self.n_states + s.0]
    }

    fn state_marginal(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_states];
        for w in 0..self.n_options {
            for s in 0..self.n_states {
                m[s] += self.p[w * self.n_states + s];
            }
        }
        m
    }

    fn option_marginal(&self) -> Vec<f64> {
        (0..self.n_options)
            .map(|w| self.p[w * self.n_states..(w + 1) * self.n_states].iter().sum())
            .collect()
    }

    /// MI as marginal-state entropy minus option-conditional state entropy:
    /// `H(s_f) - H(s_f | option)`.
    pub fn mi_state_decomposition(&self) -> f64 {
        let h_s = -self.state_marginal().iter().map(|&m| xlnx(m)).sum::<f64>();
        let mut h_s_given_w = 0.0;
        for (w, &pw) in self.option_marginal().iter().enumerate() {
            if pw == 0.0 {
                continue;
            }
            for s in 0..self.n_states {
                let joint = self.p[w * self.n_states + s];
                h_s_given_w -= xlnx(joint / pw) * pw;
            }
        }
        h_s - h_s_given_w
    }

    /// MI as marginal-option entropy minus state-conditional option entropy:
    /// `H(option) - H(option | s_f)`. Equals [`Self::mi_state_decomposition`]
    /// up to floating-point noise; both are exposed so the agreement is
    /// checkable.
    pub fn mi_option_decomposition(&self) -> f64 {
        let h_w = -self.option_marginal().iter().map(|&m| xlnx(m)).sum::<f64>();
        let mut h_w_given_s = 0.0;
        for (s, &ms) in self.state_marginal().iter().enumerate() {
            if ms == 0.0 {
                continue;
            }
            for w in 0..self.n_options {
                let joint = self.p[w * self.n_states + s];
                h_w_given_s -= xlnx(joint / ms) * ms;
            }
        }
        h_w - h_w_given_s
    }
}

/// Exact mutual information between the option drawn at `s0` and the final
/// state after `horizon` steps, in nats. Non-negative and bounded by
/// `min(ln N, ln S)`.
pub fn exact_mi(
    env: &EnvSpec,
    policy: &IntraOptionPolicy,
    prior: &OptionPrior,
    s0: StateId,
    horizon: usize,
) -> Result<f64> {
    let joint = JointDistribution::from_system(env, policy, prior, s0, horizon)?;
    Ok(joint.mi_state_decomposition().max(0.0))
}

/// Plug-in MI of the empirical joint over `(option, state)` samples.
pub fn empirical_mi(samples: &[(OptionId, StateId)], n_options: usize, n_states: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::ContractViolation(
            "empirical MI needs at least one sample".into(),
        ));
    }
    let mut counts = vec![0.0; n_options * n_states];
    for &(w, s) in samples {
        if w.0 >= n_options || s.0 >= n_states {
            return Err(Error::ContractViolation(format!(
                "sample (option {}, state {}) out of range ({n_options} x {n_states})",
                w.0, s.0
            )));
        }
        counts[w.0 * n_states + s.0] += 1.0;
    }
    let total = samples.len() as f64;
    for c in &mut counts {
        *c /= total;
    }
    let joint = JointDistribution::from_table(n_options, n_states, counts)?;
    Ok(joint.mi_state_decomposition().max(0.0))
}

/// Result of the alternating capacity iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityResult {
    /// Capacity-achieving distribution over options.
    pub prior_probs: Vec<f64>,
    /// Channel capacity in nats: the largest achievable MI.
    pub capacity: f64,
    /// MI after each accepted iteration, starting from the uniform prior.
    /// Non-decreasing by construction.
    pub capacity_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest number of capacity iterations before giving up.
const CAPACITY_MAX_ITERS: usize = 10_000;

/// Maximize `I(option; s_f | s0)` over the prior simplex for fixed
/// intra-option policies, by the classic alternating (Blahut-Arimoto)
/// update. Starts from the uniform prior, so the result is never below the
/// uniform-prior MI; stops once an iteration improves capacity by less than
/// `tolerance`.
pub fn channel_capacity(
    env: &EnvSpec,
    policy: &IntraOptionPolicy,
    s0: StateId,
    horizon: usize,
    tolerance: f64,
) -> Result<CapacityResult> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "capacity tolerance must be positive, got {tolerance}"
        )));
    }
    let n_options = policy.n_options();
    let n_states = env.n_states();
    // Channel rows Q[w][.] = exact final-state distribution of option w.
    let mut q = vec![0.0; n_options * n_states];
    for w in 0..n_options {
        let dist = exact_final_state_distribution(env, policy, OptionId(w), s0, horizon)?;
        q[w * n_states..(w + 1) * n_states].copy_from_slice(&dist);
    }

    let mi_of = |p: &[f64]| -> f64 {
        let mut marginal = vec![0.0; n_states];
        for (w, &pw) in p.iter().enumerate() {
            for s in 0..n_states {
                marginal[s] += pw * q[w * n_states + s];
            }
        }
        let mut mi = 0.0;
        for (w, &pw) in p.iter().enumerate() {
            if pw == 0.0 {
                continue;
            }
            for s in 0..n_states {
                let qs = q[w * n_states + s];
                if qs > 0.0 {
                    mi += pw * qs * (qs / marginal[s]).ln();
                }
            }
        }
        mi.max(0.0)
    };

    let mut p = vec![1.0 / n_options as f64; n_options];
    let mut history = vec![mi_of(&p)];
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..CAPACITY_MAX_ITERS {
        iterations += 1;
        // Per-option information radius against the current marginal.
        let mut marginal = vec![0.0; n_states];
        for (w, &pw) in p.iter().enumerate() {
            for s in 0..n_states {
                marginal[s] += pw * q[w * n_states + s];
            }
        }
        let mut d = vec![0.0; n_options];
        for w in 0..n_options {
            for s in 0..n_states {
                let qs = q[w * n_states + s];
                if qs > 0.0 && marginal[s] > 0.0 {
                    d[w] += qs * (qs / marginal[s]).ln();
                }
            }
        }
        let mut p_next: Vec<f64> = p.iter().zip(&d).map(|(&pw, &dw)| pw * dw.exp()).collect();
        let z: f64 = p_next.iter().sum();
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "capacity iteration produced unnormalizable prior (sum {z})"
            )));
        }
        for v in &mut p_next {
            *v /= z;
        }
        let current = *history.last().expect("seeded with the uniform MI");
        let proposed = mi_of(&p_next);
        if proposed - current < tolerance {
            // Converged; keep the newer point only if it actually improves,
            // so the recorded history stays non-decreasing.
            if proposed > current {
                history.push(proposed);
                p = p_next;
            }
            converged = true;
            break;
        }
        history.push(proposed);
        p = p_next;
    }
    let capacity = *history.last().expect("nonempty");
    Ok(CapacityResult {
        prior_probs: p,
        capacity,
        capacity_history: history,
        iterations,
        converged,
    })
}

/// [`channel_capacity`] wrapped as a learned [`OptionPrior`] whose row at
/// `s0` realizes the capacity-achieving distribution (other states uniform).
pub fn optimal_prior(
    env: &EnvSpec,
    policy: &IntraOptionPolicy,
    s0: StateId,
    horizon: usize,
    tolerance: f64,
) -> Result<(OptionPrior, f64)> {
    let result = channel_capacity(env, policy, s0, horizon, tolerance)?;
    let n_options = result.prior_probs.len();
    let mut logits = vec![0.0; env.n_states() * n_options];
    for (w, &pw) in result.prior_probs.iter().enumerate() {
        logits[s0.0 * n_options + w] = pw.max(f64::MIN_POSITIVE).ln();
    }
    let prior = OptionPrior::learned_from_logits(n_options, env.n_states(), logits)?;
    Ok((prior, result.capacity))
}

/// Visit statistics over a batch of trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMetrics {
    /// Fraction of all visits per room, when the env labels rooms.
    pub room_fractions: Option<Vec<f64>>,
    /// Visit count per state (start states included).
    pub state_visits: Vec<f64>,
    /// Fraction of states visited at least once.
    pub coverage: f64,
}

/// Count every state occurrence (the start plus each transition target)
/// across the trajectories.
pub fn occupancy_metrics(trajs: &[Trajectory], env: &EnvSpec) -> Result<OccupancyMetrics> {
    if trajs.is_empty() {
        return Err(Error::ContractViolation(
            "occupancy metrics need at least one trajectory".into(),
        ));
    }
    let mut visits = vec![0.0; env.n_states()];
    for traj in trajs {
        for s in traj.states() {
            if s.0 >= env.n_states() {
                return Err(Error::ContractViolation(format!(
                    "trajectory visits state {} outside the env (S={})",
                    s.0,
                    env.n_states()
                )));
            }
            visits[s.0] += 1.0;
        }
    }
    let total: f64 = visits.iter().sum();
    let room_fractions = env.room_of().map(|rooms| {
        let n_rooms = env.n_rooms().unwrap_or(0);
        let mut fractions = vec![0.0; n_rooms];
        for (s, &count) in visits.iter().enumerate() {
            fractions[rooms[s]] += count / total;
        }
        fractions
    });
    let coverage = visits.iter().filter(|&&c| c > 0.0).count() as f64 / env.n_states() as f64;
    Ok(OccupancyMetrics {
        room_fractions,
        state_visits: visits,
        coverage,
    })
}
