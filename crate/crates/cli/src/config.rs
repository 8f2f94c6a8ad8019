//! Flag and config-file merging: flags win over the file, the file over defaults.
//!
//! The config file is a JSON object. Keys are flag names in snake case
//! (`batch_k`, `tau_temp`). A nested object named after the subcommand with
//! dashes replaced by underscores (`"train_encoder": {...}`) overrides
//! top-level keys for that subcommand only.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Default)]
pub struct ConfigFile {
    top: Map<String, Value>,
    section: Map<String, Value>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>, subcommand: &str) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let Value::Object(top) = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?
        else {
            return Err(CliError::config("config file must hold a JSON object"));
        };
        let key = subcommand.replace('-', "_");
        let section = match top.get(&key) {
            Some(Value::Object(m)) => m.clone(),
            Some(_) => return Err(CliError::config(format!("config section {key:?} must be an object"))),
            None => Map::new(),
        };
        Ok(ConfigFile { top, section })
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> CliResult<Option<T>> {
        match self.section.get(key).or_else(|| self.top.get(key)) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| CliError::config(format!("config key {key:?}: {e}"))),
        }
    }

    pub fn pick<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    pub fn pick_or<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    pub fn require<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> CliResult<T> {
        self.pick(flag, key)?
            .ok_or_else(|| CliError::config(format!("missing required --{}", key.replace('_', "-"))))
    }
}

/// Axis lengths written `32x32` or `8x8x8` on the command line, or as a
/// string or integer array in the config file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dims(pub Vec<usize>);

impl FromStr for Dims {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let dims = s
            .split(['x', 'X', ','])
            .map(|p| p.trim().parse::<usize>().map_err(|_| format!("bad dimension list {s:?}")))
            .collect::<Result<Vec<_>, _>>()?;
        if dims.is_empty() || dims.contains(&0) {
            return Err(format!("bad dimension list {s:?}"));
        }
        Ok(Dims(dims))
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join("x"))
    }
}

impl<'de> Deserialize<'de> for Dims {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            List(Vec<usize>),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::List(v) => Ok(Dims(v)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_forms() {
        assert_eq!("32x32".parse::<Dims>().unwrap(), Dims(vec![32, 32]));
        assert_eq!("4x8X16".parse::<Dims>().unwrap().to_string(), "4x8x16");
        assert_eq!("256,128".parse::<Dims>().unwrap(), Dims(vec![256, 128]));
        assert!("0x4".parse::<Dims>().is_err());
        assert!("ax4".parse::<Dims>().is_err());
        let d: Dims = serde_json::from_str("[8, 8]").unwrap();
        assert_eq!(d, Dims(vec![8, 8]));
    }

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 3, "epochs": 5, "train_encoder": {"epochs": 9}}"#).unwrap();
        let c = ConfigFile::load(Some(&p), "train-encoder").unwrap();
        assert_eq!(c.pick_or(None, "seed", 0u64).unwrap(), 3);
        assert_eq!(c.pick_or(Some(4u64), "seed", 0).unwrap(), 4);
        assert_eq!(c.pick_or(None, "epochs", 1usize).unwrap(), 9);
        assert_eq!(c.pick_or(None, "batch_k", 10usize).unwrap(), 10);
        assert!(c.require::<u64>(None, "port").is_err());
        let other = ConfigFile::load(Some(&p), "embed").unwrap();
        assert_eq!(other.pick_or(None, "epochs", 1usize).unwrap(), 5);
        std::fs::write(&p, "[1]").unwrap();
        assert!(ConfigFile::load(Some(&p), "embed").is_err());
    }
}
