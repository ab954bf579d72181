//! `key = value` configuration files.
//!
//! One entry per line; `#` starts a comment; blank lines are ignored. Keys
//! are lowercase ASCII letters, digits, `_` and `-`. Values run to the end of
//! the line (comments stripped) and must be non-empty. Duplicate keys are an
//! error.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const MAX_CONFIG_BYTES: usize = 1 << 16;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

fn valid_key(k: &str) -> bool {
    !k.is_empty()
        && k.len() <= 64
        && k.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'-')
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile> {
        if text.len() > MAX_CONFIG_BYTES {
            return Err(Error::Parse(format!("config larger than {MAX_CONFIG_BYTES} bytes")));
        }
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !valid_key(k) {
                return Err(Error::Parse(format!("line {}: bad key `{k}`", i + 1)));
            }
            if v.is_empty() {
                return Err(Error::Parse(format!("line {}: empty value for `{k}`", i + 1)));
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Parse(format!("line {}: duplicate key `{k}`", i + 1)));
            }
        }
        Ok(ConfigFile { entries })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ConfigFile> {
        let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse(format!("config is not UTF-8: {e}")))?;
        ConfigFile::parse(text)
    }

    pub fn read(path: &Path) -> Result<ConfigFile> {
        ConfigFile::from_bytes(&std::fs::read(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Parsed value of `key`, if present.
    pub fn get_parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Parse(format!("bad value `{v}` for `{key}`"))),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Errors on the first key not in `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(k) => Err(Error::Parse(format!("unknown config key `{k}`"))),
            None => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_entries_and_comments() {
        let c = ConfigFile::parse("# run\nmodel = jordan  # preset\n\nh=0.125\nforcing = bump:amp=1,width=0.5\n").unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.get("model"), Some("jordan"));
        assert_eq!(c.get_parsed::<f64>("h").unwrap(), Some(0.125));
        assert_eq!(c.get("forcing"), Some("bump:amp=1,width=0.5"));
        assert_eq!(c.get_parsed::<f64>("k").unwrap(), None);
        assert!(c.get_parsed::<usize>("model").is_err());
    }

    #[test]
    fn rejects_malformed_lines() {
        for bad in ["h", "H = 1", "h =", "h = 1\nh = 2", "= 3", "a b = 1"] {
            assert!(ConfigFile::parse(bad).is_err(), "{bad:?}");
        }
        assert!(ConfigFile::from_bytes(&[0xff, 0xfe]).is_err());
    }

    #[test]
    fn key_whitelist() {
        let c = ConfigFile::parse("h = 1\nell = 2").unwrap();
        assert!(c.check_keys(&["h", "ell"]).is_ok());
        assert!(c.check_keys(&["h"]).is_err());
    }
}
