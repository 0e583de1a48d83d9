//! Small, fully enumerable environments.
//!
//! Every environment is a finite MDP with an explicit transition tensor
//! `P[s][a][s']`, a uniform action set, and episode semantics. Keeping the
//! tensor explicit is what lets the oracle module compute exact final-state
//! distributions and mutual information instead of estimating them.

use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance for row-stochasticity checks.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Index of a state, valid for one environment's lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

/// Index of an action; environments use a uniform action set, so every
/// action is valid in every state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub usize);

/// Outcome of a single environment step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepResult {
    pub next_state: StateId,
    /// True iff `next_state` is terminal.
    pub terminated: bool,
}

/// A fully enumerable MDP.
///
/// Immutable after construction; `step` is a pure function of
/// `(env, state, action, rng)`, so parallel rollouts only need independent
/// random streams.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    name: String,
    n_states: usize,
    n_actions: usize,
    /// Row-major `[s][a][s']` probability tensor.
    transition: Vec<f64>,
    initial_state: StateId,
    terminal_states: BTreeSet<usize>,
    horizon_default: usize,
    /// Room label per state, for maze layouts.
    room_of: Option<Vec<usize>>,
    /// Row-major `[s][feature_dim]` real feature vectors.
    features: Vec<f64>,
    feature_dim: usize,
    /// `(rows, cols)` when states form a grid; used for heat-map emission.
    grid_shape: Option<(usize, usize)>,
}

/// Actions shared by the grid environments.
pub mod actions {
    pub const UP: usize = 0;
    pub const DOWN: usize = 1;
    pub const LEFT: usize = 2;
    pub const RIGHT: usize = 3;
    /// Only present in `point_mass`.
    pub const STAY: usize = 4;

    /// Chain environments use a two-action set.
    pub const CHAIN_LEFT: usize = 0;
    pub const CHAIN_RIGHT: usize = 1;
}

impl EnvSpec {
    /// Build an environment from raw parts, validating every invariant.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        name: String,
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        initial_state: StateId,
        terminal_states: BTreeSet<usize>,
        horizon_default: usize,
        room_of: Option<Vec<usize>>,
        features: Vec<f64>,
        feature_dim: usize,
        grid_shape: Option<(usize, usize)>,
    ) -> Result<Self> {
        let env = EnvSpec {
            name,
            n_states,
            n_actions,
            transition,
            initial_state,
            terminal_states,
            horizon_default,
            room_of,
            features,
            feature_dim,
            grid_shape,
        };
        env.validate()?;
        Ok(env)
    }

    fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n_states == 0 || self.n_actions == 0 {
            return invalid("environment needs at least one state and action".into());
        }
        if self.horizon_default == 0 {
            return invalid("horizon_default must be positive".into());
        }
        if self.transition.len() != self.n_states * self.n_actions * self.n_states {
            return invalid(format!(
                "transition tensor has {} entries, expected {}",
                self.transition.len(),
                self.n_states * self.n_actions * self.n_states
            ));
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = self.row(StateId(s), ActionId(a));
                let mut sum = 0.0;
                for &p in row {
                    if !(0.0..=1.0).contains(&p) {
                        return invalid(format!("P[{s}][{a}] contains probability {p}"));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > ROW_SUM_TOL {
                    return invalid(format!("P[{s}][{a}] sums to {sum}, not 1"));
                }
            }
        }
        if self.initial_state.0 >= self.n_states {
            return invalid("initial_state out of range".into());
        }
        if self.terminal_states.contains(&self.initial_state.0) {
            return invalid("initial_state must not be terminal".into());
        }
        if self.terminal_states.iter().any(|&t| t >= self.n_states) {
            return invalid("terminal state out of range".into());
        }
        if let Some(rooms) = &self.room_of {
            if rooms.len() != self.n_states {
                return invalid("room_of must label every state".into());
            }
        }
        if self.feature_dim == 0 || self.features.len() != self.n_states * self.feature_dim {
            return invalid(format!(
                "features must hold {} x {} entries, got {}",
                self.n_states,
                self.feature_dim,
                self.features.len()
            ));
        }
        if let Some((rows, cols)) = self.grid_shape {
            if rows * cols != self.n_states {
                return invalid("grid_shape does not match state count".into());
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn initial_state(&self) -> StateId {
        self.initial_state
    }

    pub fn horizon_default(&self) -> usize {
        self.horizon_default
    }

    pub fn terminal_states(&self) -> &BTreeSet<usize> {
        &self.terminal_states
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal_states.contains(&s.0)
    }

    pub fn room_of(&self) -> Option<&[usize]> {
        self.room_of.as_deref()
    }

    /// Number of distinct room labels, if rooms are present.
    pub fn n_rooms(&self) -> Option<usize> {
        self.room_of
            .as_ref()
            .map(|rooms| rooms.iter().copied().max().map_or(0, |m| m + 1))
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Real feature vector of a state (grid centroids for the built-in
    /// environments); input for MLP discriminator backends.
    pub fn feature(&self, s: StateId) -> &[f64] {
        let lo = s.0 * self.feature_dim;
        &self.features[lo..lo + self.feature_dim]
    }

    pub fn grid_shape(&self) -> Option<(usize, usize)> {
        self.grid_shape
    }

    /// Transition probability `P[s][a][s']`.
    pub fn transition_prob(&self, s: StateId, a: ActionId, next: StateId) -> f64 {
        self.transition[(s.0 * self.n_actions + a.0) * self.n_states + next.0]
    }

    /// The full distribution row `P[s][a][·]`.
    pub fn row(&self, s: StateId, a: ActionId) -> &[f64] {
        let lo = (s.0 * self.n_actions + a.0) * self.n_states;
        &self.transition[lo..lo + self.n_states]
    }

    /// Draw one transition from `P[s][a][·]`.
    ///
    /// Stepping from a terminal state is a contract violation.
    pub fn step<R: Rng + ?Sized>(&self, s: StateId, a: ActionId, rng: &mut R) -> Result<StepResult> {
        if s.0 >= self.n_states {
            return Err(Error::ContractViolation(format!(
                "state {} out of range (S={})",
                s.0, self.n_states
            )));
        }
        if a.0 >= self.n_actions {
            return Err(Error::ContractViolation(format!(
                "action {} out of range (A={})",
                a.0, self.n_actions
            )));
        }
        if self.is_terminal(s) {
            return Err(Error::ContractViolation(format!(
                "cannot step from terminal state {}",
                s.0
            )));
        }
        let row = self.row(s, a);
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut next = self.n_states - 1;
        for (i, &p) in row.iter().enumerate() {
            cum += p;
            if u < cum {
                next = i;
                break;
            }
        }
        let next_state = StateId(next);
        Ok(StepResult {
            next_state,
            terminated: self.is_terminal(next_state),
        })
    }
}

/// Four-rooms gridworld: `side x side` cells split into four quadrant rooms
/// by thin walls, with one single-cell doorway in each of the four wall
/// segments. Moving into a wall or the grid border keeps the state.
///
/// The agent starts in the top-left corner of room 0. Transitions are
/// deterministic; there are no terminal states.
pub fn make_four_rooms(side: usize) -> Result<EnvSpec> {
    if side < 5 {
        return Err(Error::InvalidSpec(format!(
            "four_rooms needs side >= 5 so every room is at least 2x2, got {side}"
        )));
    }
    let n_states = side * side;
    let n_actions = 4;
    // Rows 0..row_split-1 are the top rooms, the rest the bottom rooms;
    // same split for columns.
    let row_split = side.div_ceil(2);
    let col_split = side.div_ceil(2);
    // One doorway per wall segment, at the middle of the segment.
    let door_row_top = row_split / 2;
    let door_row_bottom = row_split + (side - row_split) / 2;
    let door_col_left = col_split / 2;
    let door_col_right = col_split + (side - col_split) / 2;

    let room = |r: usize, c: usize| -> usize {
        match (r < row_split, c < col_split) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        }
    };
    // A unit move is allowed when it stays inside the grid and either keeps
    // the room or passes through a doorway cell pair.
    let allowed = |r: usize, c: usize, dr: isize, dc: isize| -> Option<(usize, usize)> {
        let nr = r.checked_add_signed(dr).filter(|&v| v < side)?;
        let nc = c.checked_add_signed(dc).filter(|&v| v < side)?;
        if room(r, c) == room(nr, nc) {
            return Some((nr, nc));
        }
        if dc != 0 {
            // Crossing the vertical wall.
            let door = if r < row_split { door_row_top } else { door_row_bottom };
            (r == door).then_some((nr, nc))
        } else {
            // Crossing the horizontal wall.
            let door = if c < col_split { door_col_left } else { door_col_right };
            (c == door).then_some((nr, nc))
        }
    };

    let mut transition = vec![0.0; n_states * n_actions * n_states];
    let mut room_of = vec![0usize; n_states];
    let mut features = Vec::with_capacity(n_states * 2);
    for r in 0..side {
        for c in 0..side {
            let s = r * side + c;
            room_of[s] = room(r, c);
            features.push(-1.0 + (2 * c + 1) as f64 / side as f64);
            features.push(-1.0 + (2 * r + 1) as f64 / side as f64);
            for (a, (dr, dc)) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)]
                .into_iter()
                .enumerate()
            {
                let (nr, nc) = allowed(r, c, dr, dc).unwrap_or((r, c));
                let next = nr * side + nc;
                transition[(s * n_actions + a) * n_states + next] = 1.0;
            }
        }
    }

    EnvSpec::from_parts(
        format!("four_rooms_{side}"),
        n_states,
        n_actions,
        transition,
        StateId(0),
        BTreeSet::new(),
        100,
        Some(room_of),
        features,
        2,
        Some((side, side)),
    )
}

/// An `n`-state line with two actions (left/right), starting at state 0.
/// The intended move succeeds with probability `1 - slip` and reverses with
/// probability `slip`; moves off either end keep the state.
pub fn make_chain(n: usize, slip: f64) -> Result<EnvSpec> {
    if n < 2 {
        return Err(Error::InvalidSpec(format!("chain needs n >= 2, got {n}")));
    }
    if !(0.0..=0.5).contains(&slip) {
        return Err(Error::InvalidSpec(format!(
            "chain slip must lie in [0, 0.5], got {slip}"
        )));
    }
    let n_actions = 2;
    let clamp = |s: isize| -> usize { s.clamp(0, n as isize - 1) as usize };
    let mut transition = vec![0.0; n * n_actions * n];
    let mut features = Vec::with_capacity(n);
    for s in 0..n {
        features.push(-1.0 + 2.0 * s as f64 / (n - 1) as f64);
        for (a, dir) in [-1isize, 1].into_iter().enumerate() {
            let intended = clamp(s as isize + dir);
            let reversed = clamp(s as isize - dir);
            transition[(s * n_actions + a) * n + intended] += 1.0 - slip;
            transition[(s * n_actions + a) * n + reversed] += slip;
        }
    }
    EnvSpec::from_parts(
        format!("chain_{n}"),
        n,
        n_actions,
        transition,
        StateId(0),
        BTreeSet::new(),
        20,
        None,
        features,
        1,
        Some((1, n)),
    )
}

/// A `grid x grid` discretization of a 2-D point mass: four unit moves plus
/// a stay action, deterministic, clamped at the borders. Each cell's feature
/// vector is its `(x, y)` centroid in `[-1, 1]^2`.
pub fn make_point_mass(grid: usize) -> Result<EnvSpec> {
    if grid < 3 {
        return Err(Error::InvalidSpec(format!(
            "point_mass needs grid >= 3, got {grid}"
        )));
    }
    let n_states = grid * grid;
    let n_actions = 5;
    let mut transition = vec![0.0; n_states * n_actions * n_states];
    let mut features = Vec::with_capacity(n_states * 2);
    for r in 0..grid {
        for c in 0..grid {
            let s = r * grid + c;
            features.push(-1.0 + (2 * c + 1) as f64 / grid as f64);
            features.push(-1.0 + (2 * r + 1) as f64 / grid as f64);
            for (a, (dr, dc)) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1), (0, 0)]
                .into_iter()
                .enumerate()
            {
                let nr = r
                    .checked_add_signed(dr)
                    .filter(|&v| v < grid)
                    .unwrap_or(r);
                let nc = c
                    .checked_add_signed(dc)
                    .filter(|&v| v < grid)
                    .unwrap_or(c);
                let next = nr * grid + nc;
                transition[(s * n_actions + a) * n_states + next] = 1.0;
            }
        }
    }
    let center = (grid / 2) * grid + grid / 2;
    EnvSpec::from_parts(
        format!("point_mass_{grid}"),
        n_states,
        n_actions,
        transition,
        StateId(center),
        BTreeSet::new(),
        100,
        None,
        features,
        2,
        Some((grid, grid)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_rows_stochastic(env: &EnvSpec) {
        for s in 0..env.n_states() {
            for a in 0..env.n_actions() {
                let sum: f64 = env.row(StateId(s), ActionId(a)).iter().sum();
                assert!(
                    (sum - 1.0).abs() <= ROW_SUM_TOL,
                    "row ({s},{a}) sums to {sum}"
                );
            }
        }
    }

    /// Breadth-first search over the support of P, the reachability oracle.
    fn reachable_from(env: &EnvSpec, start: usize) -> Vec<bool> {
        let mut seen = vec![false; env.n_states()];
        let mut queue = std::collections::VecDeque::from([start]);
        seen[start] = true;
        while let Some(s) = queue.pop_front() {
            for a in 0..env.n_actions() {
                for next in 0..env.n_states() {
                    if env.transition_prob(StateId(s), ActionId(a), StateId(next)) > 0.0
                        && !seen[next]
                    {
                        seen[next] = true;
                        queue.push_back(next);
                    }
                }
            }
        }
        seen
    }

    #[test]
    fn four_rooms_side5_shape() {
        let env = make_four_rooms(5).unwrap();
        assert_eq!(env.n_states(), 25);
        assert_eq!(env.n_actions(), 4);
        assert_eq!(env.n_rooms(), Some(4));
        assert!(env.terminal_states().is_empty());
        assert_rows_stochastic(&env);
        // Every room holds at least 2x2 cells.
        let rooms = env.room_of().unwrap();
        for room in 0..4 {
            assert!(rooms.iter().filter(|&&r| r == room).count() >= 4);
        }
    }

    #[test]
    fn four_rooms_wall_is_noop() {
        let env = make_four_rooms(5).unwrap();
        let s0 = env.initial_state();
        // Corner cell: moving up or left leaves the grid, so the state keeps.
        assert_eq!(env.transition_prob(s0, ActionId(actions::UP), s0), 1.0);
        assert_eq!(env.transition_prob(s0, ActionId(actions::LEFT), s0), 1.0);
    }

    #[test]
    fn four_rooms_too_small() {
        assert!(matches!(make_four_rooms(4), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn four_rooms_side7_all_reachable() {
        let env = make_four_rooms(7).unwrap();
        let seen = reachable_from(&env, env.initial_state().0);
        assert!(seen.iter().all(|&v| v), "some states unreachable");
    }

    #[test]
    fn four_rooms_strongly_connected() {
        let env = make_four_rooms(7).unwrap();
        for start in 0..env.n_states() {
            assert!(reachable_from(&env, start).iter().all(|&v| v));
        }
    }

    #[test]
    fn four_rooms_room_changes_only_at_doorways() {
        // Deterministic env: check every (s, a) pair directly against the
        // room map. A move may change rooms only when both sides of the
        // doorway see each other with probability 1.
        let env = make_four_rooms(7).unwrap();
        let rooms = env.room_of().unwrap();
        let mut crossings = 0;
        for s in 0..env.n_states() {
            for a in 0..env.n_actions() {
                let next = (0..env.n_states())
                    .find(|&n| env.transition_prob(StateId(s), ActionId(a), StateId(n)) > 0.5)
                    .unwrap();
                if rooms[s] != rooms[next] {
                    crossings += 1;
                    // The reverse move crosses back through the same doorway.
                    let back = (0..env.n_actions()).any(|b| {
                        env.transition_prob(StateId(next), ActionId(b), StateId(s)) > 0.5
                    });
                    assert!(back, "doorway {s}->{next} is one-way");
                }
            }
        }
        // Four doorways, each crossable from both sides.
        assert_eq!(crossings, 8);
    }

    #[test]
    fn chain_deterministic_two_states() {
        let env = make_chain(2, 0.0).unwrap();
        assert_eq!(
            env.transition_prob(StateId(0), ActionId(actions::CHAIN_RIGHT), StateId(1)),
            1.0
        );
        assert_eq!(
            env.transition_prob(StateId(1), ActionId(actions::CHAIN_LEFT), StateId(0)),
            1.0
        );
    }

    #[test]
    fn chain_slip_probabilities() {
        let env = make_chain(3, 0.1).unwrap();
        let p = |s, a, n| env.transition_prob(StateId(s), ActionId(a), StateId(n));
        assert!((p(1, actions::CHAIN_RIGHT, 2) - 0.9).abs() < 1e-15);
        assert!((p(1, actions::CHAIN_RIGHT, 0) - 0.1).abs() < 1e-15);
        // Walking off an end keeps the state with the intended-move mass.
        assert!((p(0, actions::CHAIN_LEFT, 0) - 0.9).abs() < 1e-15);
        assert!((p(0, actions::CHAIN_LEFT, 1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn chain_rows_stochastic() {
        assert_rows_stochastic(&make_chain(5, 0.0).unwrap());
        assert_rows_stochastic(&make_chain(5, 0.3).unwrap());
    }

    #[test]
    fn chain_invalid_params() {
        assert!(matches!(make_chain(1, 0.0), Err(Error::InvalidSpec(_))));
        assert!(matches!(make_chain(3, 0.6), Err(Error::InvalidSpec(_))));
        assert!(matches!(make_chain(3, -0.1), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn point_mass_stay_and_features() {
        let env = make_point_mass(3).unwrap();
        let center = env.initial_state();
        assert_eq!(
            env.transition_prob(center, ActionId(actions::STAY), center),
            1.0
        );
        assert_eq!(env.feature(center), &[0.0, 0.0]);
    }

    #[test]
    fn point_mass_shape() {
        let env = make_point_mass(5).unwrap();
        assert_eq!(env.n_states(), 25);
        assert_eq!(env.n_actions(), 5);
        assert_rows_stochastic(&env);
        assert!(matches!(make_point_mass(2), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn step_deterministic_env() {
        let env = make_point_mass(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let res = env
            .step(env.initial_state(), ActionId(actions::RIGHT), &mut rng)
            .unwrap();
        assert_eq!(res.next_state, StateId(5));
        assert!(!res.terminated);
    }

    #[test]
    fn step_matches_slip_frequencies() {
        // Monte Carlo against the transition row.
        let env = make_chain(3, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 100_000;
        let mut hits = 0;
        for _ in 0..draws {
            let res = env
                .step(StateId(1), ActionId(actions::CHAIN_RIGHT), &mut rng)
                .unwrap();
            if res.next_state == StateId(2) {
                hits += 1;
            }
        }
        let freq = hits as f64 / draws as f64;
        assert!((freq - 0.9).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn step_from_terminal_rejected() {
        // Hand-built 2-state env where state 1 is terminal.
        let transition = vec![
            // s=0: both actions go to 1
            0.0, 1.0, 0.0, 1.0, // s=1: self loops (rows must still be stochastic)
            0.0, 1.0, 0.0, 1.0,
        ];
        let env = EnvSpec::from_parts(
            "pit".into(),
            2,
            2,
            transition,
            StateId(0),
            BTreeSet::from([1]),
            5,
            None,
            vec![0.0, 1.0],
            1,
            None,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let res = env.step(StateId(0), ActionId(0), &mut rng).unwrap();
        assert!(res.terminated);
        assert!(matches!(
            env.step(StateId(1), ActionId(0), &mut rng),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn invalid_tensor_rejected() {
        let bad = EnvSpec::from_parts(
            "bad".into(),
            2,
            1,
            vec![0.5, 0.4, 0.0, 1.0],
            StateId(0),
            BTreeSet::new(),
            5,
            None,
            vec![0.0, 1.0],
            1,
            None,
        );
        assert!(matches!(bad, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let env = make_chain(5, 0.2).unwrap();
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = env.initial_state();
            let mut states = vec![s];
            for step in 0..30 {
                let a = ActionId(step % 2);
                s = env.step(s, a, &mut rng).unwrap().next_state;
                states.push(s);
            }
            states
        };
        assert_eq!(run(9), run(9));
    }
}
