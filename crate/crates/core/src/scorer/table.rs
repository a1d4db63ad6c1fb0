//! Precomputed score tables.
//!
//! Format: one row per scored sequence,
//! `pair_id <TAB> variant <TAB> logprob,logprob,...`, with the EOS
//! position last.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{request_id, ScoreRequest, ScorerBackend, ScorerError, TokenLogProbs, Variant};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTableRow {
    pub pair_id: String,
    pub variant: Variant,
    pub logprobs: TokenLogProbs,
}

pub fn read_score_table(path: &Path) -> Result<Vec<ScoreTableRow>, ScorerError> {
    let text = fs::read_to_string(path).map_err(|source| ScorerError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let bad = |line: usize, message: String| ScorerError::TableFormat {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        let [pair_id, variant, list] = cols[..] else {
            return Err(bad(line, format!("expected 3 columns, found {}", cols.len())));
        };
        let variant: Variant = variant
            .parse()
            .map_err(|e: ScorerError| bad(line, e.to_string()))?;
        let values = list
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(line, format!("bad log-probability: {e}")))?;
        let logprobs = TokenLogProbs::new(values).map_err(|e| bad(line, e.to_string()))?;
        rows.push(ScoreTableRow {
            pair_id: pair_id.to_string(),
            variant,
            logprobs,
        });
    }
    Ok(rows)
}

/// Writes rows with shortest round-trip float formatting.
pub fn write_score_table(path: &Path, rows: &[ScoreTableRow]) -> Result<(), ScorerError> {
    let io_err = |source| ScorerError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(fs::File::create(path).map_err(io_err)?);
    for row in rows {
        let list: Vec<String> = row.logprobs.values().iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}\t{}\t{}", row.pair_id, row.variant, list.join(",")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Serves log-probabilities from a score table, keyed by request id.
#[derive(Debug, Clone)]
pub struct TableBackend {
    name: String,
    entries: HashMap<String, TokenLogProbs>,
}

impl TableBackend {
    pub fn new(name: impl Into<String>, rows: Vec<ScoreTableRow>) -> Self {
        let entries = rows
            .into_iter()
            .map(|r| (request_id(&r.pair_id, r.variant), r.logprobs))
            .collect();
        TableBackend {
            name: name.into(),
            entries,
        }
    }

    pub fn load(name: impl Into<String>, path: &Path) -> Result<Self, ScorerError> {
        Ok(Self::new(name, read_score_table(path)?))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl ScorerBackend for TableBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn token_logprobs(&self, request: &ScoreRequest) -> Result<TokenLogProbs, ScorerError> {
        self.entries
            .get(&request.id)
            .cloned()
            .ok_or_else(|| ScorerError::MissingEntry(request.id.clone()))
    }
}
