//! Flat `key = value` configuration with `#` comments.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result};

use crate::invalid;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str, origin: &str, allowed: &[&str]) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("{origin}:{}: expected key = value", n + 1)))?;
            let key = key.trim().replace('-', "_");
            if !allowed.contains(&key.as_str()) {
                return Err(invalid(format!("{origin}:{}: unknown key {key:?}", n + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path, allowed: &[&str]) -> Result<Self> {
        if !path.is_file() {
            return Err(invalid(format!(
                "config file not found: {}",
                path.display()
            )));
        }
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, &path.display().to_string(), allowed)
    }

    /// Overrides `key` when `value` is present.
    pub fn set<V: Display>(&mut self, key: &str, value: Option<V>) {
        if let Some(v) = value {
            self.values.insert(key.to_string(), v.to_string());
        }
    }

    pub fn insert<V: Display>(&mut self, key: &str, value: V) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .filter(|v| !v.is_empty())
    }

    pub fn parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| invalid(format!("bad value for {key}: {v:?}: {e}")))
            })
            .transpose()
    }

    pub fn or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.parsed(key)?
            .ok_or_else(|| invalid(format!("missing required setting {key}")))
    }

    pub fn render(&self, header: &str) -> String {
        let mut s = format!("# {header}\n");
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn write(&self, path: &Path, header: &str) -> Result<()> {
        std::fs::write(path, self.render(header))
            .with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEYS: &[&str] = &["a", "sigma_e"];

    #[test]
    fn parse_comments_and_dashes() {
        let s = Settings::parse("# top\na = 1 # trailing\n\nsigma-e=0.05\n", "t", KEYS).unwrap();
        assert_eq!(s.get("a"), Some("1"));
        assert_eq!(s.parsed::<f64>("sigma_e").unwrap(), Some(0.05));
    }

    #[test]
    fn unknown_and_malformed_rejected() {
        assert!(Settings::parse("b = 1", "t", KEYS).is_err());
        assert!(Settings::parse("a 1", "t", KEYS).is_err());
        let s = Settings::parse("a = x", "t", KEYS).unwrap();
        assert!(s.parsed::<f64>("a").is_err());
    }

    #[test]
    fn flags_override_and_render_round_trips() {
        let mut s = Settings::parse("a = 1", "t", KEYS).unwrap();
        s.set("a", Some(2));
        s.set::<f64>("sigma_e", None);
        assert_eq!(s.or("a", 0).unwrap(), 2);
        assert_eq!(s.or("sigma_e", 0.5).unwrap(), 0.5);
        let back = Settings::parse(&s.render("echo"), "t", KEYS).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn floats_render_exactly() {
        let mut s = Settings::default();
        let v = 0.1f64 + 0.2;
        s.insert("a", v);
        assert_eq!(s.parsed::<f64>("a").unwrap(), Some(v));
        s.insert("a", 0.0f64);
        assert_eq!(s.get("a"), Some("0"));
    }
}
