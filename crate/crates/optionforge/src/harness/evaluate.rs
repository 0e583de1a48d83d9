//! Post-training evaluation of a checkpoint: fixed-count rollouts per
//! option with intrinsic-reward, discriminability, and occupancy summaries.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::harness::checkpoint::Checkpoint;
use crate::option_core::{OptionId, Trajectory};
use crate::oracle::{empirical_mi, occupancy_metrics};
use crate::rewards::{Algorithm, IntrinsicRewardSpec};
use crate::trainers::{detect_static_collapse, greedy_rollout, rollout};

#[derive(Debug, Clone, PartialEq)]
pub struct OptionEval {
    pub option: usize,
    pub mean_reward: f64,
    /// Most frequent final state across this option's rollouts.
    pub modal_final_state: usize,
    pub static_frac: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub episodes_per_option: usize,
    pub greedy: bool,
    pub per_option: Vec<OptionEval>,
    pub empirical_mi: f64,
    pub static_frac: f64,
    pub coverage: f64,
    pub room_fractions: Option<Vec<f64>>,
}

/// The intrinsic return a single rollout earns under the checkpointed
/// discriminator and prior (per-state rewards are averaged).
fn trajectory_reward(ck: &Checkpoint, traj: &Trajectory) -> Result<f64> {
    let env = &ck.config.train.env;
    let spec = IntrinsicRewardSpec::new(ck.config.train.algorithm, &ck.prior, &ck.discriminator)?;
    match ck.config.train.algorithm {
        Algorithm::Vic => spec.r_vic(traj.start_state, traj.final_state(), traj.option),
        Algorithm::Diayn => {
            if traj.next_states.is_empty() {
                return Ok(0.0);
            }
            let mut sum = 0.0;
            for &s in &traj.next_states {
                sum += spec.r_diayn(s, traj.option)?;
            }
            Ok(sum / traj.next_states.len() as f64)
        }
        Algorithm::Valor => spec.r_valor(env, traj, traj.option),
    }
}

/// Roll out `episodes` episodes per option and summarize. Sampling is
/// seeded from the checkpoint's training seed, so evaluations reproduce.
pub fn evaluate_checkpoint(ck: &Checkpoint, episodes: usize, greedy: bool) -> Result<EvalReport> {
    let train = &ck.config.train;
    let env = &train.env;
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed.wrapping_add(0xE7A1));
    let s0 = env.initial_state();

    let mut all_trajs = Vec::new();
    let mut per_option = Vec::new();
    let mut mi_samples = Vec::new();
    for w in 0..train.n_options {
        let w = OptionId(w);
        let mut trajs = Vec::with_capacity(episodes);
        let mut reward_sum = 0.0;
        for _ in 0..episodes {
            let traj = if greedy {
                greedy_rollout(env, &ck.policy, w, s0, train.horizon, &mut rng)?
            } else {
                rollout(env, &ck.policy, w, s0, train.horizon, &mut rng)?
            };
            reward_sum += trajectory_reward(ck, &traj)?;
            mi_samples.push((w, traj.final_state()));
            trajs.push(traj);
        }
        let mut finals = std::collections::BTreeMap::new();
        for t in &trajs {
            *finals.entry(t.final_state().0).or_insert(0usize) += 1;
        }
        let modal = finals
            .iter()
            .max_by_key(|(_, n)| **n)
            .map(|(s, _)| *s)
            .expect("episodes >= 1");
        per_option.push(OptionEval {
            option: w.0,
            mean_reward: reward_sum / episodes as f64,
            modal_final_state: modal,
            static_frac: detect_static_collapse(&trajs)?,
        });
        all_trajs.extend(trajs);
    }

    let occupancy = occupancy_metrics(&all_trajs, env)?;
    Ok(EvalReport {
        episodes_per_option: episodes,
        greedy,
        per_option,
        empirical_mi: empirical_mi(&mi_samples, train.n_options, env.n_states())?,
        static_frac: detect_static_collapse(&all_trajs)?,
        coverage: occupancy.coverage,
        room_fractions: occupancy.room_fractions,
    })
}

pub fn render_eval(report: &EvalReport) -> String {
    let mut out = format!(
        "{} episodes per option ({})\n",
        report.episodes_per_option,
        if report.greedy { "greedy" } else { "sampled" }
    );
    for o in &report.per_option {
        out.push_str(&format!(
            "option {:>3}: mean_r {:+.4}  modal final state {:>4}  static {:.2}\n",
            o.option, o.mean_reward, o.modal_final_state, o.static_frac
        ));
    }
    out.push_str(&format!(
        "empirical MI {:.4} nats   static fraction {:.2}   coverage {:.2}\n",
        report.empirical_mi, report.static_frac, report.coverage
    ));
    if let Some(rooms) = &report.room_fractions {
        let cells: Vec<String> = rooms
            .iter()
            .enumerate()
            .map(|(i, f)| format!("room {i}: {f:.3}"))
            .collect();
        out.push_str(&cells.join("  "));
        out.push('\n');
    }
    out
}
