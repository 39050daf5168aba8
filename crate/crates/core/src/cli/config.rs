//! Flat `key = value` run configuration with `--set` overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

/// Every accepted top-level key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "root seed for every random choice"),
    ("outdir", "directory that receives <run-id>/ folders"),
    ("adoptions", "adoption log, user,app[,timestamp]"),
    ("num_users", "user count; inferred from the data when absent"),
    ("num_apps", "app count; inferred from the data when absent"),
    ("normalize", "default network normalization: none, max or total"),
    ("use_popularity", "include the popularity channel when training"),
    ("protocol", "ablation, comparison, future or transfer"),
    ("train_fraction", "app-level training share, instead of folds"),
    ("folds", "k for k-fold cross-validation over apps"),
    ("min_users", "drop apps with fewer adopters"),
    ("repeats", "number of repeats"),
    ("user_subset", "all or low_activity"),
    ("ks", "comma-separated MP-k cutoffs"),
    ("comparison_fractions", "comma-separated training shares for the comparison protocol"),
    ("observable_fraction", "share of users visible in the transfer protocol"),
    ("max_iters", "solver iteration cap"),
    ("grad_tol", "projected-gradient tolerance"),
    ("obj_tol", "relative objective-change tolerance"),
    ("init_alpha", "starting network weight"),
    ("init_s", "starting susceptibility"),
    ("init_jitter", "multiplicative jitter on the start"),
    ("allow_negative_alpha", "lift the sign constraint on network weights"),
    ("fix_s_to_zero", "pin every susceptibility to zero"),
    ("fix_alpha_to_zero", "pin every network weight to zero"),
    ("step", "newton or gradient"),
    ("params", "trained parameter file for predict"),
    ("teacher", "synthetic sidecar; train on target users with context adopters as evidence"),
    ("apps", "comma-separated app ids to score, or all"),
    ("num_context_users", "synthetic context users"),
    ("edge_density", "comma-separated per-network edge densities"),
    ("weights", "synthetic edge weights: unit or uniform"),
    ("w_max", "upper end of uniform edge weights"),
    ("topology", "random or bipartite"),
    ("alpha", "comma-separated planted network weights"),
    ("alpha_pop", "planted popularity weight"),
    ("s_rate", "rate of the exponential susceptibility prior"),
    ("base_popularity", "mean latent popularity of synthetic apps"),
];

const NETWORK_FIELDS: &[&str] = &["kind", "normalize", "symmetrize"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("key {key:?} set twice (line {line})")]
    Duplicate { key: String, line: usize },
    #[error("unknown key {key:?}{}", suggestion_text(.suggestion))]
    UnknownKey { key: String, suggestion: Option<String> },
    #[error("{key} = {value:?}: expected {expected}")]
    InvalidValue { key: String, value: String, expected: String },
    #[error("missing required key {0:?}")]
    Missing(String),
    #[error("{key}: file not found: {path}")]
    MissingFile { key: String, path: String },
    #[error("{0}")]
    Invalid(String),
}

fn suggestion_text(s: &Option<String>) -> String {
    match s {
        Some(s) => format!(" (did you mean {s:?}?)"),
        None => String::new(),
    }
}

fn closest<'a>(word: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<String> {
    let limit = (word.len() / 3).max(2);
    candidates
        .into_iter()
        .map(|c| (strsim::damerau_levenshtein(word, c), c))
        .filter(|&(d, _)| d <= limit)
        .min()
        .map(|(_, c)| c.to_string())
}

fn valid_network_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Checks a key against the schema, suggesting the nearest known key on a miss.
pub fn check_key(key: &str) -> Result<(), ConfigError> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        return Ok(());
    }
    let unknown = |suggestion| Err(ConfigError::UnknownKey { key: key.to_string(), suggestion });
    if let Some(rest) = key.strip_prefix("network.") {
        let mut parts = rest.splitn(2, '.');
        let name = parts.next().unwrap_or("");
        if !valid_network_name(name) {
            return unknown(None);
        }
        return match parts.next() {
            None => Ok(()),
            Some(field) if NETWORK_FIELDS.contains(&field) => Ok(()),
            Some(field) => {
                unknown(closest(field, NETWORK_FIELDS.iter().copied()).map(|f| format!("network.{name}.{f}")))
            }
        };
    }
    unknown(closest(key, KEYS.iter().map(|(k, _)| *k)))
}

/// One candidate network declared by `network.<name> = path`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkEntry {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Keys in order of first appearance; overrides replace values in place.
    entries: Vec<(String, String)>,
    /// Relative paths resolve against this directory.
    base_dir: PathBuf,
}

impl RunConfig {
    pub fn empty(base_dir: impl Into<PathBuf>) -> Self {
        Self { entries: Vec::new(), base_dir: base_dir.into() }
    }

    /// Parses config text. Collects every syntax and schema problem rather than
    /// stopping at the first.
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, Vec<ConfigError>> {
        let mut cfg = Self::empty(base_dir);
        let mut errors = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                errors.push(ConfigError::Syntax { line, message: format!("expected key = value, got {trimmed:?}") });
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if let Err(e) = check_key(key) {
                errors.push(e);
                continue;
            }
            if cfg.get(key).is_some() {
                errors.push(ConfigError::Duplicate { key: key.to_string(), line });
                continue;
            }
            cfg.entries.push((key.to_string(), value.to_string()));
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(errors)
        }
    }

    pub fn load(path: &Path) -> Result<Self, Vec<ConfigError>> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| vec![ConfigError::Io { path: path.display().to_string(), message: e.to_string() }])?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    /// Applies a `key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(ConfigError::Invalid(format!("--set expects key=value, got {assignment:?}")));
        };
        let (key, value) = (key.trim(), value.trim());
        check_key(key)?;
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value.to_string(),
            None => self.entries.push((key.to_string(), value.to_string())),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    /// Resolved key/value pairs, sorted, for manifests and run ids.
    pub fn canonical(&self) -> BTreeMap<String, String> {
        self.entries.iter().cloned().collect()
    }

    pub fn parse_value<T: FromStr>(&self, key: &str, expected: &str) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| invalid(key, v, expected)),
        }
    }

    pub fn value_or<T: FromStr>(&self, key: &str, expected: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.parse_value(key, expected)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str, expected: &str) -> Result<T, ConfigError> {
        self.parse_value(key, expected)?.ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    /// Comma-separated list; an empty value is an empty list.
    pub fn list<T: FromStr>(&self, key: &str, expected: &str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some(v) = self.get(key) else { return Ok(None) };
        if v.is_empty() {
            return Ok(Some(Vec::new()));
        }
        v.split(',')
            .map(|item| item.trim().parse().map_err(|_| invalid(key, v, expected)))
            .collect::<Result<_, _>>()
            .map(Some)
    }

    /// Parses a value through a `FromStr` whose error is a readable message.
    pub fn choice<T: FromStr<Err = String>>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e: String| invalid(key, v, &e)),
        }
    }

    pub fn resolve(&self, value: &str) -> PathBuf {
        let p = Path::new(value);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Path value of `key`, checked to exist.
    pub fn existing_path(&self, key: &str) -> Result<Option<PathBuf>, ConfigError> {
        let Some(v) = self.get(key) else { return Ok(None) };
        let path = self.resolve(v);
        if !path.is_file() {
            return Err(ConfigError::MissingFile { key: key.to_string(), path: path.display().to_string() });
        }
        Ok(Some(path))
    }

    /// Declared networks in order of appearance.
    pub fn networks(&self) -> Vec<NetworkEntry> {
        self.entries
            .iter()
            .filter_map(|(k, v)| {
                let name = k.strip_prefix("network.")?;
                (!name.contains('.')).then(|| NetworkEntry { name: name.to_string(), path: self.resolve(v) })
            })
            .collect()
    }

    /// Per-network options that name a network without a path.
    pub fn orphan_network_options(&self) -> Vec<String> {
        let declared: Vec<String> = self.networks().into_iter().map(|n| n.name).collect();
        self.entries
            .iter()
            .filter_map(|(k, _)| {
                let rest = k.strip_prefix("network.")?;
                let (name, _) = rest.split_once('.')?;
                (!declared.iter().any(|d| d == name)).then(|| k.clone())
            })
            .collect()
    }
}

fn invalid(key: &str, value: &str, expected: &str) -> ConfigError {
    ConfigError::InvalidValue { key: key.to_string(), value: value.to_string(), expected: expected.to_string() }
}

/// Parses `true/false/1/0/yes/no`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flag(pub bool);

impl FromStr for Flag {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "true" | "1" | "yes" | "on" => Ok(Flag(true)),
            "false" | "0" | "no" | "off" => Ok(Flag(false)),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
