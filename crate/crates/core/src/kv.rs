//! Flat `key = value` text format used for run configs and provenance
//! records.
//!
//! * One entry per line; surrounding whitespace is trimmed.
//! * Blank lines and lines starting with `#` are ignored.
//! * Keys use `[A-Za-z0-9_.-]`; a repeated key is an error.
//! * Values are raw text up to the end of the line.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Ordered key/value map.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KvMap {
    entries: Vec<(String, String)>,
}

fn valid_key(k: &str) -> bool {
    !k.is_empty() && k.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
}

impl KvMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = KvMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !valid_key(k) {
                return Err(Error::Config(format!("line {}: invalid key {k:?}", n + 1)));
            }
            if map.contains(k) {
                return Err(Error::Config(format!("line {}: duplicate key {k:?}", n + 1)));
            }
            map.entries.push((k.to_string(), v.to_string()));
        }
        Ok(map)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Insert or replace, keeping the original position of existing keys.
    pub fn set(&mut self, key: &str, value: impl Display) {
        debug_assert!(valid_key(key), "{key}");
        let v = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = v,
            None => self.entries.push((key.to_string(), v)),
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.iter().any(|(k, _)| k == key)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Parsed value, `None` if absent, an error if present but malformed.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.get_str(key)
            .map(|v| v.parse::<T>().map_err(|e| Error::Config(format!("{key} = {v:?}: {e}"))))
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        self.get(key)?.ok_or_else(|| Error::Config(format!("missing key {key}")))
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: Display,
    {
        self.get_str(key)
            .map(|v| {
                v.split(',')
                    .map(|s| s.trim().parse::<T>().map_err(|e| Error::Config(format!("{key} = {v:?}: {e}"))))
                    .collect()
            })
            .transpose()
    }

    /// Entries of `other` override entries here.
    pub fn overlay(&mut self, other: &KvMap) {
        for (k, v) in &other.entries {
            self.set(k, v);
        }
    }

    /// Keys under `prefix.` with the prefix stripped.
    pub fn section(&self, prefix: &str) -> KvMap {
        let p = format!("{prefix}.");
        KvMap {
            entries: self
                .entries
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(&p).map(|s| (s.to_string(), v.clone())))
                .collect(),
        }
    }

    /// Insert every entry of `other` under `prefix.`.
    pub fn nest(&mut self, prefix: &str, other: &KvMap) {
        for (k, v) in &other.entries {
            self.set(&format!("{prefix}.{k}"), v);
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Fail on any key not in `known`.
    pub fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        match self.keys().find(|k| !known.contains(k)) {
            Some(k) => Err(Error::Config(format!("unknown key {k:?}"))),
            None => Ok(()),
        }
    }
}

impl Display for KvMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print_round_trip() {
        let text = "# run\narch = rrcnn1\n\nseed=7\nwidths = 32, 64,128\n";
        let m = KvMap::parse(text).unwrap();
        assert_eq!(m.get_str("arch"), Some("rrcnn1"));
        assert_eq!(m.require::<u64>("seed").unwrap(), 7);
        assert_eq!(m.get_list::<usize>("widths").unwrap(), Some(vec![32, 64, 128]));
        assert_eq!(KvMap::parse(&m.to_string()).unwrap(), m);
    }

    #[test]
    fn errors_name_the_line() {
        let err = KvMap::parse("a = 1\nnonsense\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        assert!(KvMap::parse("a = 1\na = 2").is_err());
        assert!(KvMap::parse("a b = 1").is_err());
    }

    #[test]
    fn overlay_prefers_the_newer_value() {
        let mut base = KvMap::parse("a = 1\nb = 2").unwrap();
        base.overlay(&KvMap::parse("b = 3\nc = 4").unwrap());
        assert_eq!(base.to_string(), "a = 1\nb = 3\nc = 4\n");
    }
}
