//! Experiment configuration (JSON). Unknown fields are rejected and parse
//! errors name the offending field path.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::env::EnvSpec;
use crate::error::{Error, Result};
use crate::meta::EvictionConfig;

/// Parse JSON, reporting the field path on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let msg = e.into_inner().to_string();
        // nested trackers report their own path first; join the two
        match msg.strip_prefix("at `") {
            Some(rest) if path == "." => Error::Config(format!("at `{rest}")),
            Some(rest) => Error::Config(format!("at `{path}.{rest}")),
            None => Error::Config(format!("at `{path}`: {msg}")),
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyName {
    #[serde(rename = "meta")]
    Meta,
    #[serde(rename = "meta-doubling")]
    MetaDoubling,
    #[serde(rename = "oracle")]
    Oracle,
    #[serde(rename = "safe-singleton")]
    SafeSingleton,
    #[serde(rename = "uniform")]
    Uniform,
    /// Reserved names; parsed so configs can mention them, rejected when run.
    #[serde(rename = "exp3s")]
    Exp3S,
    #[serde(rename = "sw-ucb")]
    SlidingWindowUcb,
    #[serde(rename = "adswitch")]
    AdSwitch,
}

impl PolicyName {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyName::Meta => "meta",
            PolicyName::MetaDoubling => "meta-doubling",
            PolicyName::Oracle => "oracle",
            PolicyName::SafeSingleton => "safe-singleton",
            PolicyName::Uniform => "uniform",
            PolicyName::Exp3S => "exp3s",
            PolicyName::SlidingWindowUcb => "sw-ucb",
            PolicyName::AdSwitch => "adswitch",
        }
    }

    pub fn needs_ground_truth(self) -> bool {
        matches!(self, PolicyName::Oracle | PolicyName::SafeSingleton)
    }

    pub fn is_meta(self) -> bool {
        matches!(self, PolicyName::Meta | PolicyName::MetaDoubling)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub name: PolicyName,
    #[serde(default)]
    pub eviction: EvictionConfig,
}

impl PolicySpec {
    pub fn named(name: PolicyName) -> Self {
        PolicySpec {
            name,
            eviction: EvictionConfig::default(),
        }
    }
}

/// Either a number of seeds (`0..n`) or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    Count(u64),
    List(Vec<u64>),
}

impl SeedSpec {
    pub fn resolve(&self, offset: u64) -> Vec<u64> {
        let base: Vec<u64> = match self {
            SeedSpec::Count(n) => (0..*n).collect(),
            SeedSpec::List(v) => v.clone(),
        };
        base.into_iter().map(|s| s.wrapping_add(offset)).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    /// Per-trial rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Aggregated summary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    /// JSON-lines event log of every trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<PathBuf>,
}

fn default_curve_points() -> usize {
    64
}

fn default_round_cap() -> usize {
    crate::ground_truth::DEFAULT_ROUND_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub policy: PolicySpec,
    /// Horizons to run; defaults to the environment's own horizon.
    #[serde(default)]
    pub horizons: Vec<usize>,
    pub seeds: SeedSpec,
    #[serde(default)]
    pub outputs: OutputPaths,
    /// Worker threads; `None` uses every core.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
    /// Points kept of each mean regret curve.
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,
    /// Largest horizon for which ground truth is computed.
    #[serde(default = "default_round_cap")]
    pub ground_truth_cap: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = parse_json(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.eviction.validate()?;
        if self.horizons.contains(&0) {
            return Err(Error::Config("horizons must be positive".into()));
        }
        if let SeedSpec::List(v) = &self.seeds {
            if v.is_empty() {
                return Err(Error::Config("seed list is empty".into()));
            }
        }
        if let SeedSpec::Count(0) = self.seeds {
            return Err(Error::Config("seed count must be positive".into()));
        }
        if self.parallelism == Some(0) {
            return Err(Error::Config("parallelism must be positive".into()));
        }
        Ok(())
    }

    pub fn horizons(&self) -> Vec<usize> {
        if self.horizons.is_empty() {
            vec![self.env.horizon()]
        } else {
            self.horizons.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "env": {"kind": "piecewise", "T": 100, "K": 2, "seed": 1, "num_segments": 2, "min_gap": 0.5},
        "policy": {"name": "meta"},
        "seeds": 3
    }"#;

    #[test]
    fn minimal_config_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.horizons(), vec![100]);
        assert_eq!(cfg.policy.eviction, EvictionConfig::default());
        assert_eq!(cfg.seeds.resolve(10), vec![10, 11, 12]);
        assert_eq!(cfg.curve_points, 64);
    }

    #[test]
    fn unknown_field_reports_path() {
        let text = MINIMAL.replace(
            r#""name": "meta""#,
            r#""name": "meta", "eviction": {"c0": 2, "bogus": 1}"#,
        );
        match ExperimentConfig::from_json(&text) {
            Err(Error::Config(msg)) => assert!(msg.contains("policy.eviction"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn explicit_seed_list_and_policy_names() {
        let text = MINIMAL
            .replace(r#""seeds": 3"#, r#""seeds": [5, 9]"#)
            .replace(r#""meta""#, r#""meta-doubling""#);
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(cfg.seeds.resolve(0), vec![5, 9]);
        assert_eq!(cfg.policy.name, PolicyName::MetaDoubling);
        assert!(ExperimentConfig::from_json(&MINIMAL.replace(r#""meta""#, r#""ucb""#)).is_err());
    }

    #[test]
    fn invalid_values() {
        let bad_c0 = MINIMAL.replace(
            r#""name": "meta""#,
            r#""name": "meta", "eviction": {"c0": -1}"#,
        );
        assert!(matches!(
            ExperimentConfig::from_json(&bad_c0),
            Err(Error::Config(_))
        ));
        let zero_seeds = MINIMAL.replace(r#""seeds": 3"#, r#""seeds": 0"#);
        assert!(matches!(
            ExperimentConfig::from_json(&zero_seeds),
            Err(Error::Config(_))
        ));
    }
}
