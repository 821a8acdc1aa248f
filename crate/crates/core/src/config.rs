//! Experiment files: TOML parsing, canonical text, fingerprints and
//! path-addressed overrides.
//!
//! The canonical text of a configuration is its parsed value tree written
//! back out with keys in sorted order, so formatting, comments and key order
//! in the source file do not change the fingerprint.

use std::path::Path;

use serde::de::DeserializeOwned;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::{Error, Result};

/// A parsed configuration tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigDoc {
    pub root: Table,
}

impl ConfigDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let root: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::schema("config", e.message().to_string()))?;
        Ok(Self { root })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        Self::parse(&text)
    }

    pub fn canonical_text(&self) -> String {
        toml::to_string(&self.root).expect("a parsed table always serializes")
    }

    /// Lowercase hex of the first 64 bits of SHA-256 over the canonical text.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Deserialize into a schema type, reporting the offending field path.
    pub fn deserialize<T: DeserializeOwned>(&self) -> Result<T> {
        let value = Value::Table(self.root.clone());
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::schema(
                if path == "." { "config".into() } else { path },
                e.into_inner().to_string(),
            )
        })
    }

    pub fn get(&self, path: &str) -> Option<&Value> {
        let mut cur: Option<&Value> = None;
        let mut table = &self.root;
        for (i, seg) in path.split('.').enumerate() {
            if i > 0 {
                table = cur?.as_table()?;
            }
            cur = table.get(seg);
        }
        cur
    }

    /// Overwrite an existing numeric field addressed by a dotted path.
    ///
    /// `policy.<name>` is shorthand for `policy.<name>.value`. Integer fields
    /// receive the rounded value. Paths that do not name an existing number
    /// are a schema error.
    pub fn set_number(&mut self, path: &str, value: f64) -> Result<()> {
        let mut segs: Vec<&str> = path.split('.').collect();
        if segs.len() == 2 && segs[0] == "policy" {
            segs.push("value");
        }
        let (last, parents) = segs.split_last().ok_or_else(|| Error::schema(path, "empty path"))?;
        let mut table = &mut self.root;
        for seg in parents {
            table = table
                .get_mut(*seg)
                .and_then(Value::as_table_mut)
                .ok_or_else(|| Error::schema(path, format!("no table '{seg}'")))?;
        }
        match table.get_mut(*last) {
            Some(Value::Float(f)) => *f = value,
            Some(Value::Integer(i)) => {
                if !value.is_finite() {
                    return Err(Error::schema(path, "integer field needs a finite value"));
                }
                *i = value.round() as i64;
            }
            Some(_) => return Err(Error::schema(path, "field is not numeric")),
            None => return Err(Error::schema(path, "no such field")),
        }
        Ok(())
    }

    /// Set or replace a string field (used for the regime sweep axis).
    pub fn set_string(&mut self, key: &str, value: &str) {
        self.root.insert(key.to_string(), Value::String(value.to_string()));
    }

    /// Record `do(name = value)` pins in the `intervention` table.
    pub fn set_intervention(&mut self, pins: &[(String, f64)]) {
        let mut t = Table::new();
        for (k, v) in pins {
            t.insert(k.clone(), Value::Float(*v));
        }
        self.root.insert("intervention".into(), Value::Table(t));
    }
}

/// Parse `name=value[,name=value...]`.
pub fn parse_assignments(spec: &str) -> Result<Vec<(String, f64)>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("expected name=value, got '{pair}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("'{}' is not a number", v.trim())))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}
