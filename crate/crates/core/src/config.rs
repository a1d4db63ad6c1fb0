//! Run configuration: a flat `key = value` file plus command-line
//! overrides.
//!
//! ```text
//! # experiment 12
//! corpus = data/corpus.filtered.jsonl
//! seed = 13
//! error_type = polarity_affix_del
//! error_type = placeholder_ding
//! backend = base/1=table:scores/base-1
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Dashes and
//! underscores in keys are interchangeable. List keys may repeat; any other
//! key may appear once. Unknown keys are an error.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::FilterConfig;
use crate::eval::{ReportFormat, TiePolicy};
use crate::perturb::ErrorType;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: unknown key {key:?}")]
    UnknownKey { path: String, line: usize, key: String },
    #[error("{path}:{line}: key {key:?} set twice")]
    DuplicateKey { path: String, line: usize, key: String },
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: String, line: usize },
    #[error("{key}: invalid value {value:?}: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("missing setting {0:?} (flag --{flag} or config key {0})", flag = .0.replace('_', "-"))]
    Missing(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

const SCALAR_KEYS: &[&str] = &[
    "source",
    "target",
    "tsv",
    "tag",
    "origin",
    "corpus",
    "resources",
    "out",
    "seed",
    "machine",
    "store",
    "format",
    "max_tokens",
    "max_ratio",
    "tie_policy",
    "exclude_unresolved",
    "addr",
    "ui_dir",
    "ngram_order",
    "ngram_k",
    "timeout_secs",
    "length_unit",
];

const LIST_KEYS: &[&str] = &["error_type", "backend", "onebest", "testset", "reports"];

/// Where a scoring backend gets its numbers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendKind {
    /// Score table file, or a directory of per-test-set tables.
    Table(PathBuf),
    /// n-gram model trained on a text file or a corpus file.
    Ngram(PathBuf),
    /// Child process speaking the line protocol.
    External(String),
    /// HTTP endpoint speaking the line protocol.
    Http(String),
}

/// `NAME=KIND:PATH`, with KIND one of `table`, `ngram`, `external`. An
/// external target starting with `http://` or `https://` is an endpoint;
/// anything else is a command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendSpec {
    pub name: String,
    pub kind: BackendKind,
}

impl FromStr for BackendSpec {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| ConfigError::InvalidValue {
            key: "backend".into(),
            value: s.into(),
            reason: reason.into(),
        };
        let (name, rest) = s.split_once('=').ok_or_else(|| bad("expected NAME=KIND:PATH"))?;
        let (kind, target) = rest
            .split_once(':')
            .ok_or_else(|| bad("expected NAME=KIND:PATH"))?;
        let (name, target) = (name.trim(), target.trim());
        if name.is_empty() || target.is_empty() {
            return Err(bad("name and path must be non-empty"));
        }
        let kind = match kind.trim() {
            "table" => BackendKind::Table(target.into()),
            "ngram" => BackendKind::Ngram(target.into()),
            "external" if target.starts_with("http://") || target.starts_with("https://") => {
                BackendKind::Http(target.into())
            }
            "external" => BackendKind::External(target.into()),
            _ => return Err(bad("kind must be table, ngram or external")),
        };
        Ok(BackendSpec {
            name: name.to_string(),
            kind,
        })
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            BackendKind::Table(p) => write!(f, "{}=table:{}", self.name, p.display()),
            BackendKind::Ngram(p) => write!(f, "{}=ngram:{}", self.name, p.display()),
            BackendKind::External(c) | BackendKind::Http(c) => write!(f, "{}=external:{c}", self.name),
        }
    }
}

/// `NAME=PATH` pairing a backend with its 1-best translations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OnebestSpec {
    pub backend: String,
    pub path: PathBuf,
}

impl FromStr for OnebestSpec {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('=') {
            Some((b, p)) if !b.trim().is_empty() && !p.trim().is_empty() => Ok(OnebestSpec {
                backend: b.trim().to_string(),
                path: p.trim().into(),
            }),
            _ => Err(ConfigError::InvalidValue {
                key: "onebest".into(),
                value: s.into(),
                reason: "expected NAME=PATH".into(),
            }),
        }
    }
}

/// Every setting a subcommand may read. Unset values fall back to the
/// defaults of the accessor methods.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tsv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resources: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub machine: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub store: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tie_policy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclude_unresolved: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub addr: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ui_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ngram_order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ngram_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length_unit: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub error_types: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub backends: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub onebest: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub testsets: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub reports: Vec<PathBuf>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

impl RunConfig {
    /// Parses config text; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
                path: origin.into(),
                line: i + 1,
            })?;
            let key = key.trim().replace('-', "_");
            let value = value.trim();
            if !SCALAR_KEYS.contains(&key.as_str()) && !LIST_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey {
                    path: origin.into(),
                    line: i + 1,
                    key,
                });
            }
            if SCALAR_KEYS.contains(&key.as_str()) && !seen.insert(key.clone()) {
                return Err(ConfigError::DuplicateKey {
                    path: origin.into(),
                    line: i + 1,
                    key,
                });
            }
            cfg.set(&key, value)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "source" => self.source = Some(v.into()),
            "target" => self.target = Some(v.into()),
            "tsv" => self.tsv = Some(v.into()),
            "tag" => self.tag = Some(v.into()),
            "origin" => self.origin = Some(v.into()),
            "corpus" => self.corpus = Some(v.into()),
            "resources" => self.resources = Some(v.into()),
            "out" => self.out = Some(v.into()),
            "seed" => self.seed = Some(parse_value(key, v)?),
            "machine" => self.machine = Some(v.into()),
            "store" => self.store = Some(v.into()),
            "format" => self.format = Some(v.into()),
            "max_tokens" => self.max_tokens = Some(parse_value(key, v)?),
            "max_ratio" => self.max_ratio = Some(parse_value(key, v)?),
            "tie_policy" => self.tie_policy = Some(v.into()),
            "exclude_unresolved" => self.exclude_unresolved = Some(parse_value(key, v)?),
            "addr" => self.addr = Some(v.into()),
            "ui_dir" => self.ui_dir = Some(v.into()),
            "ngram_order" => self.ngram_order = Some(parse_value(key, v)?),
            "ngram_k" => self.ngram_k = Some(parse_value(key, v)?),
            "timeout_secs" => self.timeout_secs = Some(parse_value(key, v)?),
            "length_unit" => self.length_unit = Some(v.into()),
            "error_type" => self.error_types.push(v.into()),
            "backend" => self.backends.push(v.into()),
            "onebest" => self.onebest.push(v.into()),
            "testset" => self.testsets.push(v.into()),
            "reports" => self.reports.push(v.into()),
            _ => unreachable!("key checked by caller"),
        }
        Ok(())
    }

    /// Layers `flags` over `self`: every value set in `flags` wins, and a
    /// non-empty list in `flags` replaces the configured list.
    pub fn overlay(mut self, flags: RunConfig) -> RunConfig {
        macro_rules! scalar {
            ($($f:ident),*) => { $( if flags.$f.is_some() { self.$f = flags.$f; } )* };
        }
        macro_rules! list {
            ($($f:ident),*) => { $( if !flags.$f.is_empty() { self.$f = flags.$f; } )* };
        }
        scalar!(
            source,
            target,
            tsv,
            tag,
            origin,
            corpus,
            resources,
            out,
            seed,
            machine,
            store,
            format,
            max_tokens,
            max_ratio,
            tie_policy,
            exclude_unresolved,
            addr,
            ui_dir,
            ngram_order,
            ngram_k,
            timeout_secs,
            length_unit
        );
        list!(error_types, backends, onebest, testsets, reports);
        self
    }

    pub fn require<'a, T>(value: &'a Option<T>, key: &str) -> Result<&'a T, ConfigError> {
        value.as_ref().ok_or_else(|| ConfigError::Missing(key.into()))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Requested error types; all of them when none are given.
    pub fn error_types(&self) -> Result<Vec<ErrorType>, ConfigError> {
        if self.error_types.is_empty() {
            return Ok(ErrorType::ALL.to_vec());
        }
        let mut out = Vec::new();
        for t in &self.error_types {
            let et: ErrorType = parse_value("error_type", t)?;
            if !out.contains(&et) {
                out.push(et);
            }
        }
        Ok(out)
    }

    pub fn backend_specs(&self) -> Result<Vec<BackendSpec>, ConfigError> {
        let specs = self
            .backends
            .iter()
            .map(|b| b.parse())
            .collect::<Result<Vec<BackendSpec>, _>>()?;
        for (i, s) in specs.iter().enumerate() {
            if specs[..i].iter().any(|o| o.name == s.name) {
                return Err(ConfigError::InvalidValue {
                    key: "backend".into(),
                    value: s.to_string(),
                    reason: "backend names must be unique".into(),
                });
            }
        }
        Ok(specs)
    }

    pub fn onebest_specs(&self) -> Result<Vec<OnebestSpec>, ConfigError> {
        self.onebest.iter().map(|s| s.parse()).collect()
    }

    pub fn filter(&self) -> Result<FilterConfig, ConfigError> {
        let d = FilterConfig::default();
        let cfg = FilterConfig {
            max_tokens: self.max_tokens.unwrap_or(d.max_tokens),
            max_ratio: self.max_ratio.unwrap_or(d.max_ratio),
        };
        if !(cfg.max_ratio.is_finite() && cfg.max_ratio >= 1.0) {
            return Err(ConfigError::InvalidValue {
                key: "max_ratio".into(),
                value: cfg.max_ratio.to_string(),
                reason: "must be a finite number >= 1".into(),
            });
        }
        Ok(cfg)
    }

    pub fn format(&self) -> Result<ReportFormat, ConfigError> {
        match &self.format {
            None => Ok(ReportFormat::Tsv),
            Some(f) => parse_value("format", f),
        }
    }

    pub fn tie_policy(&self) -> Result<TiePolicy, ConfigError> {
        match &self.tie_policy {
            None => Ok(TiePolicy::Against),
            Some(t) => parse_value("tie_policy", t),
        }
    }
}
