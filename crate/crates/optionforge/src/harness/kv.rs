//! Flat `key=value` text files.
//!
//! The format is deliberately primitive: one `key=value` pair per line,
//! `#` comments, blank lines ignored, keys sorted on write. Floats are
//! written with Rust's shortest round-trip formatting, so every value
//! parses back to the identical bit pattern.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Ordered key-value map with typed accessors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvMap {
    entries: BTreeMap<String, String>,
}

impl KvMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parse the textual form. Duplicate keys and lines without `=` are
    /// rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim_start();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(Error::Parse(format!(
                    "line {}: expected key=value, got {line:?}",
                    idx + 1
                )));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse(format!("line {}: empty key", idx + 1)));
            }
            if entries.insert(key.clone(), value.to_string()).is_some() {
                return Err(Error::Parse(format!("duplicate key {key:?}")));
            }
        }
        Ok(KvMap { entries })
    }

    /// Render with keys sorted, one pair per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn set_f64_slice(&mut self, key: impl Into<String>, values: &[f64]) {
        let joined = values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        self.entries.insert(key.into(), joined);
    }

    pub fn set_u64_slice(&mut self, key: impl Into<String>, values: &[u64]) {
        let joined = values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        self.entries.insert(key.into(), joined);
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Parse(format!("missing key {key:?}")))
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("key {key:?}: {e}")))
            })
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.trim()
                    .parse::<u64>()
                    .map_err(|e| Error::Parse(format!("key {key:?}: {e}")))
            })
            .transpose()
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("key {key:?}: {e}")))
            })
            .transpose()
    }

    pub fn get_f64_slice(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key)
            .map(|v| {
                v.split_whitespace()
                    .map(|tok| {
                        tok.parse::<f64>()
                            .map_err(|e| Error::Parse(format!("key {key:?}: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn get_u64_slice(&self, key: &str) -> Result<Option<Vec<u64>>> {
        self.get(key)
            .map(|v| {
                v.split_whitespace()
                    .map(|tok| {
                        tok.parse::<u64>()
                            .map_err(|e| Error::Parse(format!("key {key:?}: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn get_usize_slice(&self, key: &str) -> Result<Option<Vec<usize>>> {
        self.get(key)
            .map(|v| {
                v.split_whitespace()
                    .map(|tok| {
                        tok.parse::<usize>()
                            .map_err(|e| Error::Parse(format!("key {key:?}: {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    /// Sub-map of keys under `prefix.`, with the prefix stripped.
    pub fn strip_prefix(&self, prefix: &str) -> KvMap {
        let mut entries = BTreeMap::new();
        let full = format!("{prefix}.");
        for (k, v) in &self.entries {
            if let Some(rest) = k.strip_prefix(&full) {
                entries.insert(rest.to_string(), v.clone());
            }
        }
        KvMap { entries }
    }

    /// Merge `other` under `prefix.`.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &KvMap) {
        for (k, v) in &other.entries {
            self.entries.insert(format!("{prefix}.{k}"), v.clone());
        }
    }
}
