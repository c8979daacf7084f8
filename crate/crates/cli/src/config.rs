use std::fs;
use std::path::{Path, PathBuf};

use blocked_bandits::env::GeneratorSpec;
use blocked_bandits::harness::{Algorithm, SweepSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// Configuration of `bbandit run`: one algorithm on one instance, over
/// one or more seeds. Give either `instance` (generated per seed) or
/// `instance_file` (a fixed exported instance).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_file: Option<PathBuf>,
    pub algorithm: Algorithm,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Also write each seed's recommendations as JSON lines.
    #[serde(default)]
    pub event_log: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.instance, &self.instance_file) {
            (Some(spec), None) => spec.validate()?,
            (None, Some(_)) => {}
            _ => {
                return Err(CliError::Config(
                    "give exactly one of `instance` and `instance_file`".into(),
                ))
            }
        }
        if self.seeds.is_empty() {
            return Err(CliError::Config("`seeds` must not be empty".into()));
        }
        self.algorithm.validate()?;
        Ok(())
    }
}

/// Configuration of `bbandit sweep`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub instances: Vec<GeneratorSpec>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub horizons: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl SweepConfig {
    pub fn spec(&self) -> SweepSpec {
        SweepSpec {
            instances: self.instances.clone(),
            algorithms: self.algorithms.clone(),
            seeds: self.seeds.clone(),
            horizons: self.horizons.clone(),
        }
    }
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Seed list given on the command line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Seeds(pub Vec<u64>);

/// Parses `--seeds`: `a..b` (half-open), a comma list, or a bare count `n`
/// meaning `0..n`.
pub fn parse_seeds(text: &str) -> Result<Seeds, String> {
    let bad = |_| format!("cannot parse seeds `{text}`");
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (
            a.trim().parse().map_err(bad)?,
            b.trim().parse().map_err(bad)?,
        );
        (a..b).collect()
    } else if text.contains(',') {
        text.split(',')
            .map(|s| s.trim().parse().map_err(bad))
            .collect::<Result<_, _>>()?
    } else {
        (0..text.trim().parse::<u64>().map_err(bad)?).collect()
    };
    if seeds.is_empty() {
        return Err(format!("seeds `{text}` select nothing"));
    }
    Ok(Seeds(seeds))
}
