//! Line-oriented `key = value` run configuration, shared by config files
//! and stage manifests. A manifest written by one run parses back as a
//! config for the next, which is what makes stages re-runnable
//! bit-identically.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parsed config entries. Commands consume the keys they understand via
/// [`RunConfig::take`]; whatever remains at the end is an unknown key and
/// fails the run.
#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
    origin: String,
}

impl RunConfig {
    pub fn empty() -> Self {
        RunConfig::default()
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: origin.into(),
                    line: ln + 1,
                    msg: format!("expected `key = value`, got {line:?}"),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(Error::Parse {
                    path: origin.into(),
                    line: ln + 1,
                    msg: "empty key".into(),
                });
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(Error::Parse {
                    path: origin.into(),
                    line: ln + 1,
                    msg: format!("duplicate key {key:?}"),
                });
            }
        }
        Ok(RunConfig { entries, origin: origin.into() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Remove and return a raw entry.
    pub fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    /// Remove and parse an entry.
    pub fn take_parse<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                Error::Config(format!("config key {key:?}: cannot parse {raw:?}: {e}"))
            }),
        }
    }

    /// Fail on leftover (unknown) keys.
    pub fn finish(self) -> Result<()> {
        if let Some(key) = self.entries.keys().next() {
            return Err(Error::Config(format!(
                "unknown config key {key:?} in {}",
                if self.origin.is_empty() { "<flags>" } else { &self.origin }
            )));
        }
        Ok(())
    }
}

/// Flag > config file > default.
pub fn resolve<T>(flag: Option<T>, cfg: &mut RunConfig, key: &str, default: T) -> Result<T>
where
    T: FromStr,
    T::Err: Display,
{
    match flag {
        Some(v) => {
            cfg.take(key); // the flag overrides; drop the config entry
            Ok(v)
        }
        None => Ok(cfg.take_parse(key)?.unwrap_or(default)),
    }
}

/// A resolved-configuration manifest: `# `-comment provenance lines first,
/// then plain `key = value` lines that parse back as a [`RunConfig`].
pub struct Manifest {
    comments: Vec<String>,
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(stage: &str) -> Self {
        Manifest {
            comments: vec![format!("stage: {stage}")],
            entries: Vec::new(),
        }
    }

    pub fn comment(&mut self, text: impl Display) {
        self.comments.push(text.to_string());
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str(&format!("# {c}\n"));
        }
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}
