//! Checkpoint files: the full learner state (policy, prior, discriminator)
//! plus the config that produced it, in the same `key=value` format as
//! configs. Every float is written in shortest round-trip form, so a
//! reloaded checkpoint compares equal to the saved one.

use std::collections::BTreeMap;
use std::path::Path;

use crate::discriminator::{Discriminator, DiscriminatorBackend, TableKey};
use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::kv::KvMap;
use crate::option_core::OptionPrior;
use crate::policy::IntraOptionPolicy;
use crate::trainers::DiscBackendKind;

const FORMAT_TAG: &str = "optionforge-checkpoint-v1";

/// A trained (or in-training) learner state with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub policy: IntraOptionPolicy,
    pub prior: OptionPrior,
    pub discriminator: Discriminator,
}

fn encode_table_key(key: &TableKey) -> String {
    match key {
        TableKey::Pair(s0, sf) => format!("pair.{s0}.{sf}"),
        TableKey::State(s) => format!("state.{s}"),
        TableKey::Digest(bits) => {
            let hex: Vec<String> = bits.iter().map(|b| format!("{b:016x}")).collect();
            format!("digest.{}", hex.join("-"))
        }
    }
}

fn decode_table_key(text: &str) -> Result<TableKey> {
    let bad = || Error::Parse(format!("malformed table key {text:?}"));
    if let Some(rest) = text.strip_prefix("pair.") {
        let (a, b) = rest.split_once('.').ok_or_else(bad)?;
        return Ok(TableKey::Pair(
            a.parse().map_err(|_| bad())?,
            b.parse().map_err(|_| bad())?,
        ));
    }
    if let Some(rest) = text.strip_prefix("state.") {
        return Ok(TableKey::State(rest.parse().map_err(|_| bad())?));
    }
    if let Some(rest) = text.strip_prefix("digest.") {
        if rest.is_empty() {
            return Ok(TableKey::Digest(Vec::new()));
        }
        let bits = rest
            .split('-')
            .map(|h| u64::from_str_radix(h, 16).map_err(|_| bad()))
            .collect::<Result<Vec<u64>>>()?;
        return Ok(TableKey::Digest(bits));
    }
    Err(bad())
}

impl Checkpoint {
    pub fn to_kv(&self) -> KvMap {
        let mut map = self.config.to_kv();
        map.set("format", FORMAT_TAG);
        map.set_f64_slice("policy.logits", self.policy.logits());
        map.set_f64_slice("policy.baseline", self.policy.baseline());
        match &self.prior {
            OptionPrior::Uniform { .. } => map.set("prior.kind", "uniform"),
            OptionPrior::Learned { logits, .. } => {
                map.set("prior.kind", "learned");
                map.set_f64_slice("prior.logits", logits);
            }
        }
        match self.discriminator.backend() {
            DiscriminatorBackend::Tabular(table) => {
                for (key, counts) in table.counts() {
                    map.set_f64_slice(format!("disc.count.{}", encode_table_key(key)), counts);
                }
            }
            DiscriminatorBackend::Mlp(mlp) => {
                map.set_f64_slice("disc.params", &mlp.params());
            }
        }
        map
    }

    pub fn render(&self) -> String {
        self.to_kv().render()
    }

    pub fn from_kv(map: &KvMap) -> Result<Self> {
        match map.get("format") {
            Some(FORMAT_TAG) => {}
            Some(other) => {
                return Err(Error::Parse(format!(
                    "unsupported checkpoint format {other:?}"
                )))
            }
            None => {
                return Err(Error::Parse(
                    "not a checkpoint file (missing format key)".into(),
                ))
            }
        }
        let mut config_map = KvMap::new();
        for key in map.keys() {
            if key.starts_with("env.") || key.starts_with("train.") {
                config_map.set(key, map.get(key).expect("listed key"));
            }
        }
        let config = RunConfig::from_kv(&config_map)?;
        let env = config.env.build()?;
        let train = &config.train;

        let logits = map
            .get_f64_slice("policy.logits")?
            .ok_or_else(|| Error::Parse("missing key \"policy.logits\"".into()))?;
        let baseline = map
            .get_f64_slice("policy.baseline")?
            .ok_or_else(|| Error::Parse("missing key \"policy.baseline\"".into()))?;
        let policy = IntraOptionPolicy::from_parts(
            train.n_options,
            env.n_states(),
            env.n_actions(),
            train.entropy_coefficient,
            logits,
            baseline,
        )?;

        let prior = match map.require("prior.kind")? {
            "uniform" => OptionPrior::uniform(train.n_options)?,
            "learned" => {
                let logits = map
                    .get_f64_slice("prior.logits")?
                    .ok_or_else(|| Error::Parse("missing key \"prior.logits\"".into()))?;
                OptionPrior::learned_from_logits(train.n_options, env.n_states(), logits)?
            }
            other => return Err(Error::Parse(format!("unknown prior kind {other:?}"))),
        };

        let kind = train.algorithm.discriminator_kind();
        let discriminator = match train.disc_backend {
            DiscBackendKind::Tabular => {
                let mut counts = BTreeMap::new();
                for key in map.keys() {
                    if let Some(rest) = key.strip_prefix("disc.count.") {
                        let table_key = decode_table_key(rest)?;
                        let row = map
                            .get_f64_slice(key)?
                            .expect("listed key parses as float row");
                        counts.insert(table_key, row);
                    }
                }
                Discriminator::tabular_from_counts(
                    kind,
                    train.n_options,
                    &env,
                    train.disc_alpha,
                    counts,
                )?
            }
            DiscBackendKind::Mlp => {
                let params = map
                    .get_f64_slice("disc.params")?
                    .ok_or_else(|| Error::Parse("missing key \"disc.params\"".into()))?;
                Discriminator::mlp_from_params(
                    kind,
                    train.n_options,
                    &env,
                    &train.mlp_hidden,
                    &params,
                )?
            }
        };

        Ok(Checkpoint {
            config,
            policy,
            prior,
            discriminator,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KvMap::parse(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())
            .map_err(|e| Error::Io(format!("writing {}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}
