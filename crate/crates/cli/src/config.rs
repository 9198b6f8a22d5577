//! Flat `key = value` config files and value resolution.
//!
//! A value comes from, in order: the command-line flag (clap also fills it
//! from the `ATOMSIM_*` environment variable), a preset, the config file,
//! and finally the built-in default. Every resolved value is recorded so the
//! effective configuration can be echoed into the run manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected `key = value`", n + 1)))?;
        let key = normalize(k);
        if key.is_empty() {
            return Err(CliError::usage(format!("config line {}: empty key", n + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::usage(format!("config line {}: duplicate key `{key}`", n + 1)));
        }
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub struct Resolver {
    file: BTreeMap<String, String>,
    seen: BTreeSet<String>,
    effective: BTreeMap<String, Value>,
}

impl Resolver {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", p.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        Ok(Self {
            file,
            ..Self::default()
        })
    }

    fn from_file<T>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.seen.insert(key.to_string());
        match self.file.get(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::usage(format!("config key `{key}` = `{raw}`: {e}"))),
            None => Ok(None),
        }
    }

    fn record<T: Serialize>(&mut self, key: &str, value: &T) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.effective.insert(key.to_string(), v);
    }

    /// Resolve an optional value; records it only when present.
    pub fn optional<T>(&mut self, key: &str, cli: Option<T>, preset: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let file = self.from_file(key)?;
        let v = cli.or(preset).or(file);
        if let Some(v) = &v {
            self.record(key, v);
        }
        Ok(v)
    }

    pub fn or_default<T>(&mut self, key: &str, cli: Option<T>, preset: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let v = self.optional(key, cli, preset)?.unwrap_or(default);
        self.record(key, &v);
        Ok(v)
    }

    pub fn required<T>(&mut self, key: &str, cli: Option<T>, preset: Option<T>) -> Result<T, CliError>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        self.optional(key, cli, preset)?
            .ok_or_else(|| CliError::usage(format!("missing required value `--{}`", key.replace('_', "-"))))
    }

    /// Boolean switch: set on the command line, or `true`/`false` in the file.
    pub fn flag(&mut self, key: &str, cli: bool) -> Result<bool, CliError> {
        let v = cli || self.from_file::<bool>(key)?.unwrap_or(false);
        self.record(key, &v);
        Ok(v)
    }

    /// Record a derived value that did not come from a flag.
    pub fn note<T: Serialize>(&mut self, key: &str, value: &T) {
        self.record(key, value);
    }

    /// Reject config keys the command never asked for and return the
    /// effective configuration.
    pub fn finish(self) -> Result<BTreeMap<String, Value>, CliError> {
        let unknown: Vec<&String> = self.file.keys().filter(|k| !self.seen.contains(*k)).collect();
        if !unknown.is_empty() {
            let names: Vec<&str> = unknown.iter().map(|s| s.as_str()).collect();
            return Err(CliError::usage(format!("unknown config keys: {}", names.join(", "))));
        }
        Ok(self.effective)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_normalizes_keys() {
        let cfg = parse_config("# run\nomega-r = 1e-3  # recoil\n\nDelta=0.2\n").unwrap();
        assert_eq!(cfg["omega_r"], "1e-3");
        assert_eq!(cfg["delta"], "0.2");
        assert!(parse_config("oops").is_err());
        assert!(parse_config("a=1\nA=2").is_err());
    }

    #[test]
    fn precedence_flag_preset_file_default() {
        let mut r = Resolver {
            file: parse_config("delta = 0.5\np0 = 7").unwrap(),
            ..Default::default()
        };
        assert_eq!(r.or_default("delta", Some(0.1), Some(0.3), 0.0).unwrap(), 0.1);
        assert_eq!(r.or_default("p0", None, Some(45.0), 0.0).unwrap(), 45.0);
        assert_eq!(r.or_default("x0", None::<f64>, None, 1.5).unwrap(), 1.5);
        let eff = r.finish().unwrap();
        assert_eq!(eff["delta"], 0.1);
    }

    #[test]
    fn file_fills_missing_flag_and_unknown_keys_fail() {
        let mut r = Resolver {
            file: parse_config("delta = 0.5\nbogus = 1").unwrap(),
            ..Default::default()
        };
        assert_eq!(r.required::<f64>("delta", None, None).unwrap(), 0.5);
        assert!(r.required::<f64>("p0", None, None).is_err());
        assert!(r.finish().is_err());
    }

    #[test]
    fn bad_file_value_is_usage_error() {
        let mut r = Resolver {
            file: parse_config("delta = abc").unwrap(),
            ..Default::default()
        };
        let err = r.required::<f64>("delta", None, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
