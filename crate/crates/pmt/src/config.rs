//! Run configuration files and seed resolution.
//!
//! A config file is JSON (`.json`) or TOML (anything else) holding any subset
//! of the [`RunConfig`] fields; missing fields take their defaults.

use std::collections::hash_map::RandomState;
use std::hash::{BuildHasher, Hasher};
use std::path::Path;

use pmt_core::RunConfig;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// The file set `master_seed` explicitly.
    pub seed_given: bool,
}

pub fn parse_config(text: &str, json: bool) -> Result<LoadedConfig> {
    let (config, seed_given) = if json {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let seed_given = value.get("master_seed").is_some();
        (serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?, seed_given)
    } else {
        let value: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let seed_given = value.contains_key("master_seed");
        (value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?, seed_given)
    };
    Ok(LoadedConfig { config, seed_given })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    parse_config(&text, json).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Picks the master seed: the command line wins over the config file. With
/// neither, strict mode fails and otherwise a fresh seed is drawn.
pub fn resolve_seed(cli_seed: Option<u64>, loaded: &LoadedConfig, strict: bool) -> Result<(u64, bool)> {
    match (cli_seed, loaded.seed_given) {
        (Some(s), _) => Ok((s, false)),
        (None, true) => Ok((loaded.config.master_seed, false)),
        (None, false) if strict => Err(Error::Usage("--strict requires --seed or master_seed in the config".into())),
        (None, false) => Ok((random_seed(), true)),
    }
}

fn random_seed() -> u64 {
    let mut h = RandomState::new().build_hasher();
    h.write_u128(std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_nanos()));
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files() {
        let t = parse_config("N = 50\nn1 = 10\n", false).unwrap();
        assert_eq!((t.config.trials, t.config.n1, t.config.bootstraps), (50, 10, 100));
        assert!(!t.seed_given);
        let j = parse_config(r#"{"bootstraps": 7, "master_seed": 3}"#, true).unwrap();
        assert_eq!((j.config.bootstraps, j.config.master_seed), (7, 3));
        assert!(j.seed_given);
        assert!(parse_config("unknown = 1", false).is_err());
    }

    #[test]
    fn seed_resolution() {
        let none = LoadedConfig { config: RunConfig::default(), seed_given: false };
        assert_eq!(resolve_seed(Some(4), &none, true).unwrap(), (4, false));
        assert!(resolve_seed(None, &none, true).is_err());
        assert!(resolve_seed(None, &none, false).unwrap().1);
        let given = LoadedConfig { config: RunConfig { master_seed: 9, ..RunConfig::default() }, seed_given: true };
        assert_eq!(resolve_seed(None, &given, true).unwrap(), (9, false));
    }
}
