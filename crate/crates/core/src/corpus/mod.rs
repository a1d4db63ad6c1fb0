//! Parallel text ingestion, tokenization and length filtering.
//!
//! Every downstream stage consumes [`SentencePair`] values produced here.
//! The canonical on-disk form is newline-delimited JSON with the fields
//! `id`, `source`, `target`, `origin` and `dataset_tag`.

mod filter;
mod tokenize;

use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::{filter_pairs, FilterConfig, FilterOutcome, RemovalReason};
pub use tokenize::{detokenize, tokenize, Token, TokenizedSentence};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line count mismatch: {source_lines} source lines vs {target_lines} target lines")]
    LineCountMismatch {
        source_lines: usize,
        target_lines: usize,
    },
    #[error("malformed row at line {line}: expected at least two tab-separated columns")]
    MalformedRow { line: usize },
    #[error("empty segment at line {line}")]
    EmptySegment { line: usize },
    #[error("{path}: invalid UTF-8 at line {line}")]
    InvalidUtf8 { path: PathBuf, line: usize },
    #[error("cannot tokenize empty input")]
    EmptyInput,
    #[error("duplicate pair id {0}")]
    DuplicateId(String),
    #[error("{path}:{line}: {message}")]
    BadRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid origin {0:?}")]
    BadOrigin(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CorpusError {
    fn io(path: &Path, source: io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Who produced a reference translation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Origin {
    Human,
    Machine(String),
}

impl Origin {
    pub fn engine(&self) -> Option<&str> {
        match self {
            Origin::Human => None,
            Origin::Machine(engine) => Some(engine),
        }
    }

    pub fn is_machine(&self) -> bool {
        matches!(self, Origin::Machine(_))
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Human => f.write_str("human"),
            Origin::Machine(engine) => write!(f, "machine:{engine}"),
        }
    }
}

impl FromStr for Origin {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "human" => Ok(Origin::Human),
            Some(("machine", engine)) if !engine.is_empty() => Ok(Origin::Machine(engine.to_string())),
            _ => Err(CorpusError::BadOrigin(s.to_string())),
        }
    }
}

impl From<Origin> for String {
    fn from(o: Origin) -> String {
        o.to_string()
    }
}

impl TryFrom<String> for Origin {
    type Error = CorpusError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// One source sentence with one reference translation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub id: String,
    pub source: String,
    pub target: String,
    pub origin: Origin,
    pub dataset_tag: String,
}

fn read_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut lines = Vec::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| CorpusError::io(path, e))?;
        if n == 0 {
            break;
        }
        if buf.last() == Some(&b'\n') {
            buf.pop();
            if buf.last() == Some(&b'\r') {
                buf.pop();
            }
        }
        let line = String::from_utf8(buf.clone()).map_err(|_| CorpusError::InvalidUtf8 {
            path: path.to_path_buf(),
            line: lines.len() + 1,
        })?;
        lines.push(line);
    }
    Ok(lines)
}

fn make_pair(
    line: usize,
    source: &str,
    target: &str,
    origin: &Origin,
    tag: &str,
) -> Result<SentencePair, CorpusError> {
    if source.trim().is_empty() || target.trim().is_empty() {
        return Err(CorpusError::EmptySegment { line });
    }
    Ok(SentencePair {
        id: format!("{tag}:{line}"),
        source: source.to_string(),
        target: target.to_string(),
        origin: origin.clone(),
        dataset_tag: tag.to_string(),
    })
}

/// Reads line-aligned source and target files. Ids are `<tag>:<line>`,
/// counting from one.
pub fn read_parallel(
    source_path: &Path,
    target_path: &Path,
    dataset_tag: &str,
    origin: &Origin,
) -> Result<Vec<SentencePair>, CorpusError> {
    let sources = read_lines(source_path)?;
    let targets = read_lines(target_path)?;
    if sources.len() != targets.len() {
        return Err(CorpusError::LineCountMismatch {
            source_lines: sources.len(),
            target_lines: targets.len(),
        });
    }
    sources
        .iter()
        .zip(&targets)
        .enumerate()
        .map(|(i, (s, t))| make_pair(i + 1, s, t, origin, dataset_tag))
        .collect()
}

/// Reads a tab-separated file whose first two columns are source and target.
pub fn read_tsv(path: &Path, dataset_tag: &str, origin: &Origin) -> Result<Vec<SentencePair>, CorpusError> {
    read_lines(path)?
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut cols = row.split('\t');
            match (cols.next(), cols.next()) {
                (Some(s), Some(t)) => make_pair(i + 1, s, t, origin, dataset_tag),
                _ => Err(CorpusError::MalformedRow { line: i + 1 }),
            }
        })
        .collect()
}

/// Writes pairs in the canonical newline-delimited JSON layout.
pub fn write_corpus(path: &Path, pairs: &[SentencePair]) -> Result<(), CorpusError> {
    write_jsonl(path, pairs).map_err(|e| CorpusError::io(path, e))
}

/// Loads a canonical corpus file, rejecting duplicate ids.
pub fn read_corpus(path: &Path) -> Result<Vec<SentencePair>, CorpusError> {
    let pairs: Vec<SentencePair> = read_jsonl(path)?;
    let mut seen = std::collections::HashSet::new();
    for p in &pairs {
        if !seen.insert(p.id.as_str()) {
            return Err(CorpusError::DuplicateId(p.id.clone()));
        }
    }
    Ok(pairs)
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub(crate) fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CorpusError> {
    read_lines(path)?
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CorpusError::BadRecord {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
