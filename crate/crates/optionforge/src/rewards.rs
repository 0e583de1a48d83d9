//! Intrinsic reward definitions for the three training objectives.
//!
//! All rewards are in nats. Each objective pairs a discriminator form with
//! a prior: the final-state objective rewards `ln q(w|s0,sf) - ln p(w|s0)`,
//! the per-state and trajectory objectives reward `ln q(w|obs) + ln N`
//! against a fixed uniform prior. The known/unseen gap analysis returns the
//! closed-form reward difference between a perfectly discriminated and a
//! never-seen observation.

use crate::discriminator::{ConditioningKey, Discriminator, DiscriminatorKind};
use crate::env::{EnvSpec, StateId};
use crate::error::{Error, Result};
use crate::option_core::{OptionId, OptionPrior, Trajectory};

/// Which training objective is in play.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Vic,
    Diayn,
    Valor,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Vic => "vic",
            Algorithm::Diayn => "diayn",
            Algorithm::Valor => "valor",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "vic" => Ok(Algorithm::Vic),
            "diayn" => Ok(Algorithm::Diayn),
            "valor" => Ok(Algorithm::Valor),
            other => Err(Error::Parse(format!("unknown algorithm {other:?}"))),
        }
    }

    /// The discriminator conditioning form this objective trains.
    pub fn discriminator_kind(&self) -> DiscriminatorKind {
        match self {
            Algorithm::Vic => DiscriminatorKind::VicPair,
            Algorithm::Diayn => DiscriminatorKind::DiaynState,
            Algorithm::Valor => DiscriminatorKind::ValorTrajectory,
        }
    }
}

/// Borrowed view pairing an algorithm with its prior and discriminator;
/// validates the combination once so the reward functions stay branch-free.
pub struct IntrinsicRewardSpec<'a> {
    algorithm: Algorithm,
    prior: &'a OptionPrior,
    discriminator: &'a Discriminator,
}

impl<'a> IntrinsicRewardSpec<'a> {
    pub fn new(
        algorithm: Algorithm,
        prior: &'a OptionPrior,
        discriminator: &'a Discriminator,
    ) -> Result<Self> {
        if discriminator.kind() != algorithm.discriminator_kind() {
            return Err(Error::ContractViolation(format!(
                "{} rewards need a {} discriminator, got {}",
                algorithm.as_str(),
                algorithm.discriminator_kind().as_str(),
                discriminator.kind().as_str()
            )));
        }
        if prior.n_options() != discriminator.n_options() {
            return Err(Error::ContractViolation(format!(
                "prior covers {} options but discriminator covers {}",
                prior.n_options(),
                discriminator.n_options()
            )));
        }
        if matches!(algorithm, Algorithm::Diayn | Algorithm::Valor) && prior.is_learned() {
            return Err(Error::ContractViolation(format!(
                "{} fixes the option prior uniform; learned prior supplied",
                algorithm.as_str()
            )));
        }
        Ok(IntrinsicRewardSpec {
            algorithm,
            prior,
            discriminator,
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    fn check_algorithm(&self, expected: Algorithm) -> Result<()> {
        if self.algorithm != expected {
            return Err(Error::ContractViolation(format!(
                "called the {} reward on a {} spec",
                expected.as_str(),
                self.algorithm.as_str()
            )));
        }
        Ok(())
    }

    /// Final-state reward `ln q(w | s0, sf) - ln p(w | s0)`: one terminal
    /// value for the whole option execution.
    pub fn r_vic(&self, s0: StateId, sf: StateId, w: OptionId) -> Result<f64> {
        self.check_algorithm(Algorithm::Vic)?;
        let log_q = self
            .discriminator
            .predict_log_prob(&ConditioningKey::pair(s0, sf), w)?;
        let log_p = self.prior.log_prob(s0, w)?;
        Ok(log_q - log_p)
    }

    /// Per-state reward `ln q(w | s) + ln N` against the uniform prior.
    pub fn r_diayn(&self, s: StateId, w: OptionId) -> Result<f64> {
        self.check_algorithm(Algorithm::Diayn)?;
        let log_q = self
            .discriminator
            .predict_log_prob(&ConditioningKey::state(s), w)?;
        Ok(log_q + (self.prior.n_options() as f64).ln())
    }

    /// Trajectory reward `ln q(w | digest(traj)) + ln N`: one terminal value
    /// for the episode.
    pub fn r_valor(&self, env: &EnvSpec, traj: &Trajectory, w: OptionId) -> Result<f64> {
        self.check_algorithm(Algorithm::Valor)?;
        let log_q = self
            .discriminator
            .predict_log_prob(&ConditioningKey::trajectory(env, traj), w)?;
        Ok(log_q + (self.prior.n_options() as f64).ln())
    }
}

/// Closed-form intrinsic rewards under a uniform prior over `n` options:
/// a perfectly discriminated observation earns exactly `ln n`, a never-seen
/// one (posterior falls back to the prior) exactly 0. The gap `ln n` is why
/// these objectives are neutral about genuinely novel states.
pub fn reward_gap_analysis(n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::ContractViolation(
            "reward gap analysis needs at least one option".into(),
        ));
    }
    Ok(((n as f64).ln(), 0.0))
}
