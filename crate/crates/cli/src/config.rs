//! Plain-text key=value run configuration with command-line overrides.
//!
//! A config file holds one `key = value` pair per line; `#` starts a
//! comment. Every key can also be given as a CLI flag of the same name,
//! which wins over the file. The fully resolved set is echoed into each
//! run's output directory so a run can be reproduced from its artifacts.

use fairrep::error::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    map: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "{}:{}: expected `key = value`, got {raw:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { map })
    }

    /// Flag overrides: later sources win.
    pub fn set(&mut self, key: &str, value: String) {
        self.map.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::InvalidConfig(format!("key {key}: cannot parse {raw:?}"))
            }),
        }
    }

    pub fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    /// Comma-separated list of floats.
    pub fn parse_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|p| {
                    p.trim().parse::<f64>().map_err(|_| {
                        Error::InvalidConfig(format!("key {key}: bad float {p:?}"))
                    })
                })
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    /// Resolved `key = value` lines, sorted, for the config echo.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.map {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}
