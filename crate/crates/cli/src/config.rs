//! `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Command-line flags
//! take precedence over file values.

use std::collections::BTreeMap;
use std::path::Path;

/// Keys a config file may set.
pub const KNOWN_KEYS: [&str; 10] = ["grid", "tol", "seed", "t", "k", "samples", "pairs", "deltas", "R", "size"];

#[derive(Debug, Default, Clone)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected `key = value`", lineno + 1))?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(format!("config line {}: unknown key `{key}` (known: {})", lineno + 1, KNOWN_KEYS.join(", ")));
            }
            values.insert(key.to_string(), value.trim().trim_matches('"').to_string());
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// The flag value if given, else the file value, else `default`.
    pub fn pick<T: std::str::FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, String> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.get(key) {
            Some(s) => s.parse().map_err(|_| format!("config key `{key}`: cannot parse `{s}`")),
            None => Ok(default),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let c = Config::parse("# comment\ngrid = 2048\ntol=1e-6\n").unwrap();
        assert_eq!(c.pick(None, "grid", 8192usize).unwrap(), 2048);
        assert_eq!(c.pick(Some(512usize), "grid", 8192).unwrap(), 512);
        assert_eq!(c.pick(None, "samples", 400usize).unwrap(), 400);
        assert!((c.pick(None, "tol", 1e-7f64).unwrap() - 1e-6).abs() < 1e-20);
    }

    #[test]
    fn unknown_keys_and_bad_lines_are_rejected() {
        assert!(Config::parse("colour = blue").is_err());
        assert!(Config::parse("grid 2048").is_err());
        assert!(Config::parse("grid = many").unwrap().pick(None, "grid", 1usize).is_err());
    }
}
