//! Plain `key = value` run configuration. Blank lines and `#` comments are
//! ignored; command-line flags override anything read here.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, allowed)
    }

    pub fn parse(text: &str, allowed: &[&str]) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", i + 1)))?;
            let key = k.trim().replace('-', "_");
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::Config(format!("config line {}: unknown key `{key}`", i + 1)));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    /// The flag if given, else the file value, parsed.
    pub fn pick<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| CliError::Config(format!("invalid `{key}` value `{v}`: {e}")))
            })
            .transpose()
    }

    pub fn require<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.pick(key, flag)?
            .ok_or_else(|| CliError::Config(format!("missing required `{key}` (flag or config file)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_and_comments_skip() {
        let c = ConfigFile::parse("# run\nseed = 4\nrestarts=2 # fewer\n\n", &["seed", "restarts"]).unwrap();
        assert_eq!(c.pick::<u64>("seed", None).unwrap(), Some(4));
        assert_eq!(c.pick("seed", Some(9u64)).unwrap(), Some(9));
        assert_eq!(c.require::<usize>("restarts", None).unwrap(), 2);
        assert!(c.require::<String>("data", None).is_err());
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(ConfigFile::parse("colour = red", &["seed"]).is_err());
        assert!(ConfigFile::parse("seed", &["seed"]).is_err());
        let c = ConfigFile::parse("seed = x", &["seed"]).unwrap();
        assert!(c.pick::<u64>("seed", None).is_err());
    }
}
