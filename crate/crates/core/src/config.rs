//! Flat key=value configuration files.
//!
//! One assignment per line, `#` starts a comment line, blank lines are
//! skipped. Values keep everything after the first `=`, so they may
//! themselves contain `=`. When a key is assigned twice the last
//! assignment wins.

use std::fmt::Display;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A parsed config file: assignments in file order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigFile {
    entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(format!(
                    "line {}: expected key=value, got {line:?}",
                    idx + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::config(format!("line {}: empty key", idx + 1)));
            }
            entries.push((key.to_owned(), value.to_owned()));
        }
        Ok(ConfigFile { entries })
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Latest value assigned to `key`, if any.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Keys in first-seen order, deduplicated.
    pub fn keys(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for (k, _) in &self.entries {
            if !seen.contains(&k.as_str()) {
                seen.push(k.as_str());
            }
        }
        seen
    }

    /// Latest value for `key` parsed as `T`; `Ok(None)` when absent.
    pub fn get_parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                Error::config(format!("key {key}: cannot parse {raw:?}: {e}"))
            }),
        }
    }

    /// Latest value for `key` as a strict `true`/`false` boolean.
    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some("true") => Ok(Some(true)),
            Some("false") => Ok(Some(false)),
            Some(raw) => Err(Error::config(format!(
                "key {key}: expected true or false, got {raw:?}"
            ))),
        }
    }
}
