//! Flat key-value run configuration.
//!
//! One TOML file without sections. Each key belongs to exactly one group:
//! the master `seed`, run settings, learner hyperparameters or simulator
//! settings. Unknown keys are rejected.

use std::path::Path;

use anyhow::{bail, Context, Result};
use cartelscan_core::learn::hyper::HYPER_KEYS;
use cartelscan_core::learn::Hyperparameters;
use cartelscan_core::sim::{MarketConfig, CONFIG_KEYS};
use serde::{Deserialize, Serialize};

use crate::InputError;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    /// Split/train/test repetitions of `evaluate` and `report`.
    pub repetitions: usize,
    /// Largest number of 4-offer subgroups per tender.
    pub subgroup_cap: u64,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            repetitions: cartelscan_core::eval::DEFAULT_REPETITIONS,
            subgroup_cap: cartelscan_core::screens::DEFAULT_SUBGROUP_CAP,
        }
    }
}

pub const RUN_KEYS: [&str; 2] = ["repetitions", "subgroup_cap"];

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub run: RunSettings,
    pub hyper: Hyperparameters,
    /// Its `seed` always equals the master seed.
    pub sim: MarketConfig,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            run: RunSettings::default(),
            hyper: Hyperparameters::default(),
            sim: MarketConfig::default(),
        }
    }
}

fn typed<T: serde::de::DeserializeOwned>(table: toml::Table, what: &str) -> Result<T> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| InputError(format!("{what}: {}", e.message())).into())
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| InputError(format!("config: {e}")))?;
        let (mut run, mut hyper, mut sim) = (toml::Table::new(), toml::Table::new(), toml::Table::new());
        let mut seed = None;
        for (k, v) in table {
            if k == "seed" {
                let s = v
                    .as_integer()
                    .filter(|s| *s >= 0)
                    .ok_or_else(|| InputError("config: seed must be a non-negative integer".into()))?;
                seed = Some(s as u64);
            } else if RUN_KEYS.contains(&k.as_str()) {
                run.insert(k, v);
            } else if HYPER_KEYS.contains(&k.as_str()) {
                hyper.insert(k, v);
            } else if CONFIG_KEYS.contains(&k.as_str()) {
                sim.insert(k, v);
            } else {
                bail!(InputError(format!("config: unknown key '{k}'")));
            }
        }
        let mut s = Settings {
            seed: seed.unwrap_or(DEFAULT_SEED),
            run: typed(run, "config")?,
            hyper: typed(hyper, "config")?,
            sim: typed(sim, "config")?,
        };
        s.sim.seed = s.seed;
        Ok(s)
    }

    /// Reads `path` if given, then applies the `--seed` override.
    pub fn resolve(path: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        let mut s = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| InputError(format!("cannot read config file {}: {e}", p.display())))?;
                Self::from_toml(&text).with_context(|| format!("in {}", p.display()))?
            }
            None => Self::default(),
        };
        if let Some(seed) = seed {
            s.seed = seed;
            s.sim.seed = seed;
        }
        Ok(s)
    }

    /// Every resolved key, flat, in a stable order.
    pub fn to_toml(&self) -> String {
        let mut out = format!("seed = {}\n", self.seed);
        for part in [
            toml::to_string(&self.run),
            toml::to_string(&self.hyper),
            toml::to_string(&MarketConfigWithoutSeed(&self.sim)),
        ] {
            out.push_str(&part.expect("settings serialize to TOML"));
        }
        out
    }
}

struct MarketConfigWithoutSeed<'a>(&'a MarketConfig);

impl Serialize for MarketConfigWithoutSeed<'_> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut table = toml::Table::try_from(self.0).map_err(serde::ser::Error::custom)?;
        table.remove("seed");
        table.serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_groups_are_disjoint() {
        for k in RUN_KEYS.iter().chain(HYPER_KEYS.iter()) {
            assert!(!CONFIG_KEYS.contains(k), "{k}");
        }
        assert!(!RUN_KEYS.iter().any(|k| HYPER_KEYS.contains(k)));
    }

    #[test]
    fn overrides_and_round_trip() {
        let s = Settings::from_toml("seed = 7\nrepetitions = 3\nrf_trees = 50\ndays = 10\n").unwrap();
        assert_eq!((s.seed, s.sim.seed, s.run.repetitions), (7, 7, 3));
        assert_eq!(s.hyper.rf_trees, 50);
        assert_eq!(s.sim.days, 10);
        let back = Settings::from_toml(&s.to_toml()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn unknown_key_is_an_input_error() {
        let e = Settings::from_toml("trees = 5").unwrap_err();
        assert!(e.downcast_ref::<InputError>().is_some());
        assert!(e.to_string().contains("trees"));
        let e = Settings::from_toml("rf_trees = \"many\"").unwrap_err();
        assert!(e.downcast_ref::<InputError>().is_some());
    }
}
