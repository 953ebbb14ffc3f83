//! Flat declarative key-value config dialect with dotted sections:
//!
//! ```text
//! # comment
//! css.segment_length = 4.0
//! scheme = sentence+word
//! ```
//!
//! Keys are dotted lowercase identifiers, values run to the end of the line.
//! Duplicate keys are rejected; typed accessors track which keys were read so
//! unknown keys can be reported.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (number, raw) in text.lines().enumerate() {
            let context = || format!("config line {}", number + 1);
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(context(), format!("expected 'key = value', got '{line}'")));
            };
            let key = key.trim();
            let value = value.trim();
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '.' || c == '_')
                || key.starts_with('.')
                || key.ends_with('.')
            {
                return Err(Error::parse(context(), format!("bad key '{key}'")));
            }
            if value.is_empty() {
                return Err(Error::parse(context(), format!("key '{key}' has no value")));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::parse(context(), format!("duplicate key '{key}'")));
            }
        }
        Ok(ConfigMap { entries })
    }

    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { context, message } => Error::Parse {
                context: format!("{}: {context}", path.display()),
                message,
            },
            other => other,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

/// Typed view over a [`ConfigMap`] that records the touched keys.
pub struct ConfigReader<'a> {
    map: &'a ConfigMap,
    touched: std::cell::RefCell<Vec<String>>,
}

impl<'a> ConfigReader<'a> {
    pub fn new(map: &'a ConfigMap) -> Self {
        ConfigReader {
            map,
            touched: std::cell::RefCell::new(Vec::new()),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.touched.borrow_mut().push(key.to_string());
        self.map.get(key)
    }

    pub fn str_or<'b>(&'b self, key: &str, default: &'b str) -> &'b str {
        self.raw(key).unwrap_or(default)
    }

    pub fn opt_str(&self, key: &str) -> Option<String> {
        self.raw(key).map(str::to_owned)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::parse(key.to_string(), format!("expected a number, got '{v}'"))),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::parse(key.to_string(), format!("expected an integer, got '{v}'"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.u64_or(key, default as u64)? as usize)
    }

    /// Fails if the underlying map holds keys never read through this view.
    pub fn reject_unknown(&self) -> Result<()> {
        let touched = self.touched.borrow();
        let unknown: Vec<&str> = self
            .map
            .keys()
            .filter(|k| !touched.iter().any(|t| t == k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::parse(
                "config".to_string(),
                format!("unknown keys: {}", unknown.join(", ")),
            ))
        }
    }
}
