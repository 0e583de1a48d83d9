//! Helpers shared by the integration suites: random fixtures, independent
//! finite-difference oracles, and Monte Carlo baselines.

#![allow(dead_code)] // each test binary uses its own subset

use optionforge::env::EnvSpec;
use optionforge::option_core::OptionId;
use optionforge::policy::IntraOptionPolicy;
use optionforge::trainers::rollout;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Policy with logits drawn uniformly from [-2, 2].
pub fn random_policy(env: &EnvSpec, n_options: usize, rng: &mut ChaCha8Rng) -> IntraOptionPolicy {
    let len = n_options * env.n_states() * env.n_actions();
    let logits: Vec<f64> = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
    IntraOptionPolicy::from_parts(
        n_options,
        env.n_states(),
        env.n_actions(),
        0.0,
        logits,
        vec![0.0; n_options * env.n_states()],
    )
    .expect("valid random policy")
}

/// Central finite difference of `f` at `x[i]`, one coordinate at a time.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = f(&probe);
        probe[i] = x[i] - h;
        let minus = f(&probe);
        probe[i] = x[i];
        grad.push((plus - minus) / (2.0 * h));
    }
    grad
}

/// Fraction of all visited states (starts included) lying in room 0 under
/// the uniform-random policy: the Monte Carlo exploration baseline.
pub fn random_room0_baseline(
    env: &EnvSpec,
    episodes: usize,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let rooms = env.room_of().expect("baseline needs rooms").to_vec();
    let uniform = IntraOptionPolicy::new(1, env.n_states(), env.n_actions(), 0.0)
        .expect("uniform policy");
    let mut in_room0 = 0usize;
    let mut total = 0usize;
    for _ in 0..episodes {
        let traj = rollout(env, &uniform, OptionId(0), env.initial_state(), horizon, rng)
            .expect("rollout");
        for s in traj.states() {
            if rooms[s.0] == 0 {
                in_room0 += 1;
            }
            total += 1;
        }
    }
    in_room0 as f64 / total as f64
}

/// Room-0 visit fraction aggregated over a set of trajectories.
pub fn room0_fraction(env: &EnvSpec, trajs: &[optionforge::option_core::Trajectory]) -> f64 {
    let rooms = env.room_of().expect("env has rooms");
    let mut in_room0 = 0usize;
    let mut total = 0usize;
    for traj in trajs {
        for s in traj.states() {
            if rooms[s.0] == 0 {
                in_room0 += 1;
            }
            total += 1;
        }
    }
    in_room0 as f64 / total as f64
}
