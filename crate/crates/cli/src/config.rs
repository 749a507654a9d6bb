//! `key=value` settings files. Flags given on the command line win over
//! values from the file, which win over built-in defaults.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

const KNOWN_KEYS: &[&str] = &[
    "beta",
    "radius",
    "alpha",
    "seed",
    "batch-size",
    "selection-mode",
    "replacement-mode",
    "tau",
    "dim",
    "encoder-seed",
];

#[derive(Debug, Default, Clone, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "config line {}: expected key=value",
                    idx + 1
                )));
            };
            let key = key.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "config line {}: unknown key `{key}`",
                    idx + 1
                )));
            }
            values.insert(key, value.trim().to_owned());
        }
        Ok(Settings { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Settings::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    /// Resolves `key`: the flag value if present, else the file value, else
    /// `default`.
    pub fn resolve<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence() {
        let s = Settings::parse("beta = 0.3\n# comment\nradius=10 # trailing\n").unwrap();
        assert_eq!(s.resolve("beta", None, 0.5).unwrap(), 0.3);
        assert_eq!(s.resolve("beta", Some(0.7), 0.5).unwrap(), 0.7);
        assert_eq!(s.resolve::<usize>("radius", None, 4000).unwrap(), 10);
        assert_eq!(s.resolve::<u64>("alpha", None, 5).unwrap(), 5);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(Settings::parse("beta\n").is_err());
        assert!(Settings::parse("gamma=1\n").is_err());
        let s = Settings::parse("radius=wide").unwrap();
        assert!(s.resolve::<usize>("radius", None, 1).is_err());
        assert!(Settings::parse("batch_size=8").is_ok());
    }
}
