//! `key = value` configuration files. Keys are the long flag names without
//! the leading dashes; blank lines and lines starting with `#` are ignored.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::read_to_string;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    path: Option<PathBuf>,
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg =
            Self::parse(&read_to_string(path)?).map_err(|m| Error::Config(format!("{}: {m}", path.display())))?;
        cfg.path = Some(path.to_path_buf());
        Ok(cfg)
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
            let key = k.trim().trim_start_matches("--").replace('_', "-");
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(format!("line {}: {key} is set twice", n + 1));
            }
        }
        Ok(Self { path: None, values })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| {
                    let origin = self
                        .path
                        .as_ref()
                        .map_or_else(|| "config".into(), |p| p.display().to_string());
                    Error::Config(format!("{origin}: invalid value {v:?} for {key}: {e}"))
                })
            })
            .transpose()
    }

    /// `flag` if given, else the config value, else `default`.
    pub fn resolve<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }
}
