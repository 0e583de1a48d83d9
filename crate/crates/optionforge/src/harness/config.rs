//! Run configuration: building environments and training setups from
//! `key=value` files and echoing them back out.

use crate::env::{make_chain, make_four_rooms, make_point_mass, EnvSpec};
use crate::error::{Error, Result};
use crate::harness::kv::KvMap;
use crate::rewards::Algorithm;
use crate::trainers::{DiscBackendKind, TrainConfig};

/// Constructor parameters for a named environment; unlike the built
/// environment itself this is cheap to store and echo into files.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvConfig {
    Chain { n: usize, slip: f64 },
    FourRooms { side: usize },
    PointMass { grid: usize },
}

impl EnvConfig {
    pub fn build(&self) -> Result<EnvSpec> {
        match *self {
            EnvConfig::Chain { n, slip } => make_chain(n, slip),
            EnvConfig::FourRooms { side } => make_four_rooms(side),
            EnvConfig::PointMass { grid } => make_point_mass(grid),
        }
    }

    /// Read `name` plus the matching size keys from an `env.`-stripped map.
    pub fn from_kv(map: &KvMap) -> Result<Self> {
        let allowed: &[&str] = &["name", "n", "slip", "side", "grid"];
        for key in map.keys() {
            if !allowed.contains(&key) {
                return Err(Error::InvalidSpec(format!("unknown env key {key:?}")));
            }
        }
        let name = map.require("name")?;
        let cfg = match name {
            "chain" => EnvConfig::Chain {
                n: map
                    .get_usize("n")?
                    .ok_or_else(|| Error::Parse("chain needs env.n".into()))?,
                slip: map.get_f64("slip")?.unwrap_or(0.0),
            },
            "four_rooms" => EnvConfig::FourRooms {
                side: map
                    .get_usize("side")?
                    .ok_or_else(|| Error::Parse("four_rooms needs env.side".into()))?,
            },
            "point_mass" => EnvConfig::PointMass {
                grid: map
                    .get_usize("grid")?
                    .ok_or_else(|| Error::Parse("point_mass needs env.grid".into()))?,
            },
            other => {
                return Err(Error::InvalidSpec(format!("unknown environment {other:?}")))
            }
        };
        // Surface bad sizes at parse time rather than first use.
        cfg.build()?;
        Ok(cfg)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut map = KvMap::new();
        match *self {
            EnvConfig::Chain { n, slip } => {
                map.set("name", "chain");
                map.set("n", n);
                map.set("slip", slip);
            }
            EnvConfig::FourRooms { side } => {
                map.set("name", "four_rooms");
                map.set("side", side);
            }
            EnvConfig::PointMass { grid } => {
                map.set("name", "point_mass");
                map.set("grid", grid);
            }
        }
        map
    }
}

/// One run's full description: the environment recipe plus the training
/// configuration built on it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub train: TrainConfig,
}

const TRAIN_KEYS: &[&str] = &[
    "algorithm",
    "n_options",
    "horizon",
    "episodes",
    "policy_step",
    "disc_step",
    "prior_step",
    "entropy_coefficient",
    "gamma",
    "seed",
    "vic_reset_period",
    "eval_every",
    "checkpoint_every",
    "disc_backend",
    "disc_alpha",
    "mlp_hidden",
];

impl RunConfig {
    /// Read a map with `env.` and `train.` sections. `env.name`,
    /// `train.algorithm` and `train.n_options` are required; everything
    /// else falls back to the defaults of [`TrainConfig::new`].
    pub fn from_kv(map: &KvMap) -> Result<Self> {
        for key in map.keys() {
            if !key.starts_with("env.") && !key.starts_with("train.") {
                return Err(Error::InvalidSpec(format!("unknown config key {key:?}")));
            }
        }
        let env_cfg = EnvConfig::from_kv(&map.strip_prefix("env"))?;
        let train_map = map.strip_prefix("train");
        for key in train_map.keys() {
            if !TRAIN_KEYS.contains(&key) {
                return Err(Error::InvalidSpec(format!("unknown train key {key:?}")));
            }
        }
        let algorithm = Algorithm::parse(train_map.require("algorithm")?)?;
        let n_options = train_map
            .get_usize("n_options")?
            .ok_or_else(|| Error::Parse("missing key \"train.n_options\"".into()))?;
        let mut train = TrainConfig::new(algorithm, env_cfg.build()?, n_options);
        if let Some(v) = train_map.get_usize("horizon")? {
            train.horizon = v;
        }
        if let Some(v) = train_map.get_usize("episodes")? {
            train.episodes = v;
        }
        if let Some(v) = train_map.get_f64("policy_step")? {
            train.policy_step = v;
        }
        if let Some(v) = train_map.get_f64("disc_step")? {
            train.disc_step = v;
        }
        if let Some(v) = train_map.get_f64("prior_step")? {
            train.prior_step = v;
        }
        if let Some(v) = train_map.get_f64("entropy_coefficient")? {
            train.entropy_coefficient = v;
        }
        if let Some(v) = train_map.get_f64("gamma")? {
            train.gamma = v;
        }
        if let Some(v) = train_map.get_u64("seed")? {
            train.seed = v;
        }
        if let Some(v) = train_map.get_usize("vic_reset_period")? {
            train.vic_reset_period = v;
        }
        if let Some(v) = train_map.get_usize("eval_every")? {
            train.eval_every = v;
        }
        if let Some(v) = train_map.get_usize("checkpoint_every")? {
            train.checkpoint_every = v;
        }
        if let Some(v) = train_map.get("disc_backend") {
            train.disc_backend = DiscBackendKind::parse(v)?;
        }
        if let Some(v) = train_map.get_f64("disc_alpha")? {
            train.disc_alpha = v;
        }
        if let Some(v) = train_map.get_usize_slice("mlp_hidden")? {
            train.mlp_hidden = v;
        }
        train.validate()?;
        Ok(RunConfig {
            env: env_cfg,
            train,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KvMap::parse(text)?)
    }

    /// Full echo: every field written explicitly, so a reloaded config is
    /// equal regardless of which defaults were in force when it was parsed.
    pub fn to_kv(&self) -> KvMap {
        let mut map = KvMap::new();
        map.extend_prefixed("env", &self.env.to_kv());
        let t = &self.train;
        map.set("train.algorithm", t.algorithm.as_str());
        map.set("train.n_options", t.n_options);
        map.set("train.horizon", t.horizon);
        map.set("train.episodes", t.episodes);
        map.set("train.policy_step", t.policy_step);
        map.set("train.disc_step", t.disc_step);
        map.set("train.prior_step", t.prior_step);
        map.set("train.entropy_coefficient", t.entropy_coefficient);
        map.set("train.gamma", t.gamma);
        map.set("train.seed", t.seed);
        map.set("train.vic_reset_period", t.vic_reset_period);
        map.set("train.eval_every", t.eval_every);
        map.set("train.checkpoint_every", t.checkpoint_every);
        map.set("train.disc_backend", t.disc_backend.as_str());
        map.set("train.disc_alpha", t.disc_alpha);
        let hidden = t
            .mlp_hidden
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        map.set("train.mlp_hidden", hidden);
        map
    }

    pub fn render(&self) -> String {
        self.to_kv().render()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::parse(
            "env.name=point_mass\nenv.grid=5\ntrain.algorithm=diayn\ntrain.n_options=8\n",
        )
        .unwrap();
        assert_eq!(cfg.train.horizon, 100);
        assert_eq!(cfg.train.episodes, 2000);
        assert_eq!(cfg.train.seed, 0);
        assert_eq!(cfg.train.disc_backend, DiscBackendKind::Tabular);
        assert_eq!(cfg.env, EnvConfig::PointMass { grid: 5 });
    }

    #[test]
    fn chain_horizon_default_follows_env() {
        let cfg = RunConfig::parse(
            "env.name=chain\nenv.n=7\ntrain.algorithm=vic\ntrain.n_options=2\n",
        )
        .unwrap();
        assert_eq!(cfg.train.horizon, 20);
        assert_eq!(cfg.env, EnvConfig::Chain { n: 7, slip: 0.0 });
    }

    #[test]
    fn full_round_trip_is_equal() {
        let text = "env.name=four_rooms\nenv.side=11\ntrain.algorithm=diayn\n\
                    train.n_options=8\ntrain.seed=3\ntrain.policy_step=0.05\n\
                    train.disc_backend=mlp\ntrain.mlp_hidden=16 8\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.train.mlp_hidden, vec![16, 8]);
        let reloaded = RunConfig::parse(&cfg.render()).unwrap();
        assert_eq!(cfg, reloaded);
        assert_eq!(cfg.render(), reloaded.render());
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::parse(
            "env.name=chain\nenv.n=2\ntrain.algorithm=vic\ntrain.n_options=2\ntrain.typo=1\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(_)), "{err}");
        let err = RunConfig::parse(
            "env.name=chain\nenv.n=2\nxyz=1\ntrain.algorithm=vic\ntrain.n_options=2\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(_)), "{err}");
    }

    #[test]
    fn invalid_values_rejected() {
        // Bad env size surfaces at parse.
        assert!(RunConfig::parse(
            "env.name=chain\nenv.n=1\ntrain.algorithm=vic\ntrain.n_options=2\n"
        )
        .is_err());
        // Bad gamma surfaces through TrainConfig validation.
        assert!(RunConfig::parse(
            "env.name=chain\nenv.n=3\ntrain.algorithm=vic\ntrain.n_options=2\ntrain.gamma=0\n"
        )
        .is_err());
    }
}
