//! Flat `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment line, blank lines are
//! ignored. Keys are free-form here; the CLI layer owns the schema and
//! rejects keys it does not know, so typos fail loudly instead of being
//! silently dropped.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::{Error, Result};

/// A parsed configuration file: ordered `(key, value)` pairs plus the
/// source path for error messages.
#[derive(Clone, Debug)]
pub struct ConfigFile {
    path: PathBuf,
    pairs: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::ConfigFile {
            file: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let fail = |line: usize, reason: String| Error::ConfigFile {
            file: path.to_path_buf(),
            reason: format!("line {line}: {reason}"),
        };
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail(i + 1, "expected 'key = value'".into()))?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(fail(i + 1, "empty key".into()));
            }
            if pairs.iter().any(|(k, _)| k == key) {
                return Err(fail(i + 1, format!("duplicate key '{key}'")));
            }
            pairs.push((key.to_string(), value.to_string()));
        }
        Ok(ConfigFile {
            path: path.to_path_buf(),
            pairs,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|(k, _)| k.as_str())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Typed lookup: absent keys are `Ok(None)`, unparseable values name
    /// the file and key.
    pub fn get_parse<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| Error::ConfigFile {
                file: self.path.clone(),
                reason: format!("key '{key}': cannot parse '{raw}': {e}"),
            }),
        }
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some("true") => Ok(Some(true)),
            Some("false") => Ok(Some(false)),
            Some(raw) => Err(Error::ConfigFile {
                file: self.path.clone(),
                reason: format!("key '{key}': expected true or false, got '{raw}'"),
            }),
        }
    }

    /// Rejects the first key not present in `known`.
    pub fn require_known(&self, known: &[&str]) -> Result<()> {
        for key in self.keys() {
            if !known.contains(&key) {
                return Err(Error::ConfigFile {
                    file: self.path.clone(),
                    reason: format!("unknown key '{key}'"),
                });
            }
        }
        Ok(())
    }
}
