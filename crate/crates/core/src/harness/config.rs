//! Plain-text `key = value` configuration with `[section]` headers.
//!
//! ```text
//! # comment
//! [lattice]
//! dim = 2
//! extent = 12
//! spacing = 0.05
//! ```
//!
//! Lists are comma separated; `;` separates records inside a list value.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed configuration. Reads are tracked so that keys nothing asked for
/// can be reported.
#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<(String, String), Entry>,
    used: RefCell<BTreeSet<(String, String)>>,
}

impl Clone for Config {
    fn clone(&self) -> Self {
        Config { entries: self.entries.clone(), used: RefCell::new(self.used.borrow().clone()) }
    }
}

fn key(section: &str, name: &str) -> (String, String) {
    (section.to_string(), name.to_string())
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::ConfigParse { line, msg: format!("unterminated section header `{s}`") })?
                    .trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                    return Err(Error::ConfigParse { line, msg: format!("bad section name `{name}`") });
                }
                section = name.to_string();
                continue;
            }
            let (name, value) = s
                .split_once('=')
                .ok_or_else(|| Error::ConfigParse { line, msg: format!("expected `key = value`, found `{s}`") })?;
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::ConfigParse { line, msg: format!("bad key `{name}`") });
            }
            let value = value.trim().to_string();
            if let Some(prev) = entries.insert(key(&section, name), Entry { value, line }) {
                return Err(Error::ConfigParse { line, msg: format!("duplicate key `{name}` (first on line {})", prev.line) });
            }
        }
        Ok(Config { entries, used: RefCell::new(BTreeSet::new()) })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets or replaces a value; overrides carry line 0.
    pub fn set(&mut self, section: &str, name: &str, value: impl Into<String>) {
        self.entries.insert(key(section, name), Entry { value: value.into(), line: 0 });
    }

    pub fn contains(&self, section: &str, name: &str) -> bool {
        self.entries.contains_key(&key(section, name))
    }

    pub fn raw(&self, section: &str, name: &str) -> Option<(&str, usize)> {
        let k = key(section, name);
        let e = self.entries.get(&k)?;
        self.used.borrow_mut().insert(k);
        Some((e.value.as_str(), e.line))
    }

    pub fn get<T: FromStr>(&self, section: &str, name: &str) -> Result<Option<T>> {
        match self.raw(section, name) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::ConfigParse { line, msg: format!("cannot parse `{v}` for {section}.{name}") }),
        }
    }

    pub fn get_or<T: FromStr>(&self, section: &str, name: &str, default: T) -> Result<T> {
        Ok(self.get(section, name)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, section: &str, name: &str) -> Result<T> {
        self.get(section, name)?
            .ok_or_else(|| Error::ConfigParse { line: 0, msg: format!("missing key {section}.{name}") })
    }

    pub fn list<T: FromStr>(&self, section: &str, name: &str) -> Result<Option<Vec<T>>> {
        match self.raw(section, name) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(|p| {
                    let p = p.trim();
                    p.parse().map_err(|_| Error::ConfigParse { line, msg: format!("cannot parse `{p}` in {section}.{name}") })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub fn list_or<T: FromStr>(&self, section: &str, name: &str, default: Vec<T>) -> Result<Vec<T>> {
        Ok(self.list(section, name)?.unwrap_or(default))
    }

    /// `;`-separated records of comma-separated numbers.
    pub fn records(&self, section: &str, name: &str) -> Result<Option<Vec<Vec<f64>>>> {
        match self.raw(section, name) {
            None => Ok(None),
            Some((v, line)) => v
                .split(';')
                .filter(|r| !r.trim().is_empty())
                .map(|r| {
                    r.split(',')
                        .map(|p| {
                            let p = p.trim();
                            p.parse::<f64>().map_err(|_| Error::ConfigParse {
                                line,
                                msg: format!("cannot parse `{p}` in {section}.{name}"),
                            })
                        })
                        .collect()
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    /// Fails on the first key no getter has read.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        for (k, e) in &self.entries {
            if !used.contains(k) {
                let name = if k.0.is_empty() { k.1.clone() } else { format!("{}.{}", k.0, k.1) };
                return Err(Error::ConfigParse { line: e.line, msg: format!("unknown key {name}") });
            }
        }
        Ok(())
    }

    /// Canonical `section.key=value` lines in sorted order.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for ((sec, name), e) in &self.entries {
            s.push_str(&format!("{sec}.{name}={}\n", e.value));
        }
        s
    }

    /// SHA-256 of the canonical form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }
}
