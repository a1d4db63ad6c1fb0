//! File-backed record store.
//!
//! A store directory holds three files:
//!
//! - `base.jsonl`: the records as classified, written once;
//! - `decisions.jsonl`: every applied decision, appended and synced before
//!   it is acknowledged;
//! - `state.jsonl`: the current records, rewritten atomically after each
//!   decision.
//!
//! Opening a store replays the decision log over the base records, so the
//! state file is a convenience and never the source of truth.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{apply_decision, Decision, DecisionKind, Status, ValidateError, ValidationRecord};
use crate::perturb::{ErrorType, PhenomenonSpans, TokenSpan};

pub const BASE_FILE: &str = "base.jsonl";
pub const LOG_FILE: &str = "decisions.jsonl";
pub const STATE_FILE: &str = "state.jsonl";

/// One line of the decision log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub id: String,
    pub decision: DecisionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manually_derived_correct: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub timestamp: String,
    pub reviewer: String,
    pub expected_version: u64,
}

impl LogEntry {
    fn decision(&self) -> Decision {
        Decision {
            kind: self.decision,
            manually_derived_correct: self.manually_derived_correct.clone(),
            note: self.note.clone(),
        }
    }
}

/// Result of a submitted decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applied {
    pub record: ValidationRecord,
    /// The same decision had already been applied; nothing changed.
    pub replayed: bool,
}

/// Display projection of a pending record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueItem {
    pub id: String,
    pub error_type: ErrorType,
    pub source: String,
    pub human_correct: String,
    pub human_contrastive: String,
    pub machine_reference: String,
    pub phenomenon_spans: PhenomenonSpans,
    pub machine_spans: Vec<TokenSpan>,
    pub version: u64,
}

impl From<&ValidationRecord> for QueueItem {
    fn from(r: &ValidationRecord) -> Self {
        QueueItem {
            id: r.id.clone(),
            error_type: r.error_type,
            source: r.source.clone(),
            human_correct: r.human_correct.clone(),
            human_contrastive: r.human_contrastive.clone(),
            machine_reference: r.machine_reference.clone(),
            phenomenon_spans: r.phenomenon_spans.clone(),
            machine_spans: r.machine_spans.clone(),
            version: r.version,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueuePage {
    pub items: Vec<QueueItem>,
    /// Pass back as `cursor` for the next page; absent on the last page.
    pub next_cursor: Option<String>,
}

/// Record counts per status, overall and per error type. Every status and
/// error type is listed, with zeros where nothing matches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreStats {
    pub total: usize,
    pub by_status: BTreeMap<Status, usize>,
    pub by_error_type: BTreeMap<ErrorType, BTreeMap<Status, usize>>,
}

impl StoreStats {
    pub fn of(records: &[ValidationRecord]) -> Self {
        let zeros: BTreeMap<Status, usize> = Status::ALL.iter().map(|&s| (s, 0)).collect();
        let mut by_status = zeros.clone();
        let mut by_error_type: BTreeMap<ErrorType, BTreeMap<Status, usize>> =
            ErrorType::ALL.iter().map(|&e| (e, zeros.clone())).collect();
        for r in records {
            *by_status.get_mut(&r.status).unwrap() += 1;
            *by_error_type
                .get_mut(&r.error_type)
                .unwrap()
                .get_mut(&r.status)
                .unwrap() += 1;
        }
        StoreStats {
            total: records.len(),
            by_status,
            by_error_type,
        }
    }

    pub fn count(&self, status: Status) -> usize {
        self.by_status[&status]
    }
}

pub struct RecordStore {
    dir: PathBuf,
    records: Vec<ValidationRecord>,
    index: HashMap<String, usize>,
    /// Decision and resulting record per (id, expected version).
    outcomes: HashMap<(String, u64), (Decision, ValidationRecord)>,
    log: File,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ValidateError + '_ {
    move |source| ValidateError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ValidateError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ValidateError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Writes through a temporary file and a rename.
fn write_atomic<T: Serialize>(path: &Path, items: &[T]) -> Result<(), ValidateError> {
    let tmp = path.with_extension("jsonl.tmp");
    {
        let file = File::create(&tmp).map_err(io_err(&tmp))?;
        let mut w = BufWriter::new(file);
        for item in items {
            serde_json::to_writer(&mut w, item).map_err(|e| io_err(&tmp)(e.into()))?;
            w.write_all(b"\n").map_err(io_err(&tmp))?;
        }
        let file = w.into_inner().map_err(|e| io_err(&tmp)(e.into_error()))?;
        file.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

impl RecordStore {
    /// Creates a new store. Refuses to overwrite an existing one.
    pub fn create(dir: &Path, records: Vec<ValidationRecord>) -> Result<Self, ValidateError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let base = dir.join(BASE_FILE);
        if base.exists() || dir.join(LOG_FILE).exists() {
            return Err(ValidateError::StoreExists(dir.to_path_buf()));
        }
        let index = build_index(&records)?;
        write_atomic(&base, &records)?;
        let log_path = dir.join(LOG_FILE);
        File::create(&log_path).map_err(io_err(&log_path))?;
        let store = RecordStore {
            dir: dir.to_path_buf(),
            records,
            index,
            outcomes: HashMap::new(),
            log: open_log(&log_path)?,
        };
        store.write_state()?;
        Ok(store)
    }

    /// Opens a store and replays its decision log.
    pub fn open(dir: &Path) -> Result<Self, ValidateError> {
        let records: Vec<ValidationRecord> = read_lines(&dir.join(BASE_FILE))?;
        let index = build_index(&records)?;
        let log_path = dir.join(LOG_FILE);
        let entries: Vec<LogEntry> = if log_path.exists() {
            read_lines(&log_path)?
        } else {
            Vec::new()
        };
        let mut store = RecordStore {
            dir: dir.to_path_buf(),
            records,
            index,
            outcomes: HashMap::new(),
            log: open_log(&log_path)?,
        };
        for (i, entry) in entries.iter().enumerate() {
            let corrupt = |message: String| ValidateError::Corrupt {
                path: log_path.clone(),
                line: i + 1,
                message,
            };
            let &idx = store
                .index
                .get(&entry.id)
                .ok_or_else(|| corrupt(format!("unknown record {}", entry.id)))?;
            let decision = entry.decision();
            let next = apply_decision(&store.records[idx], &decision, entry.expected_version)
                .map_err(|e| corrupt(e.to_string()))?;
            store.outcomes.insert(
                (entry.id.clone(), entry.expected_version),
                (decision, next.clone()),
            );
            store.records[idx] = next;
        }
        store.write_state()?;
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn records(&self) -> &[ValidationRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&ValidationRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    /// Applies a decision and makes it durable before returning.
    ///
    /// Resubmitting a decision that was already applied at
    /// `expected_version` returns the recorded result without applying it
    /// again.
    pub fn submit(
        &mut self,
        id: &str,
        decision: &Decision,
        expected_version: u64,
        reviewer: &str,
    ) -> Result<Applied, ValidateError> {
        let &idx = self
            .index
            .get(id)
            .ok_or_else(|| ValidateError::UnknownRecord(id.to_string()))?;
        if let Some((prev, result)) = self.outcomes.get(&(id.to_string(), expected_version)) {
            if same_decision(prev, decision) {
                return Ok(Applied {
                    record: result.clone(),
                    replayed: true,
                });
            }
        }
        let next = apply_decision(&self.records[idx], decision, expected_version)?;
        let entry = LogEntry {
            id: id.to_string(),
            decision: decision.kind,
            manually_derived_correct: next
                .manually_derived_correct
                .clone()
                .filter(|_| decision.kind == DecisionKind::MarkContrastive),
            note: decision.note.clone(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            reviewer: reviewer.to_string(),
            expected_version,
        };
        self.append(&entry)?;
        self.outcomes.insert(
            (id.to_string(), expected_version),
            (entry.decision(), next.clone()),
        );
        self.records[idx] = next.clone();
        self.write_state()?;
        Ok(Applied {
            record: next,
            replayed: false,
        })
    }

    fn append(&mut self, entry: &LogEntry) -> Result<(), ValidateError> {
        let path = self.dir.join(LOG_FILE);
        let mut line = serde_json::to_vec(entry).map_err(|e| io_err(&path)(e.into()))?;
        line.push(b'\n');
        self.log.write_all(&line).map_err(io_err(&path))?;
        self.log.sync_data().map_err(io_err(&path))
    }

    fn write_state(&self) -> Result<(), ValidateError> {
        write_atomic(&self.dir.join(STATE_FILE), &self.records)
    }

    /// Pending records with id greater than `cursor`, in id order.
    pub fn queue(&self, cursor: Option<&str>, limit: usize) -> QueuePage {
        let mut pending: Vec<&ValidationRecord> = self
            .records
            .iter()
            .filter(|r| r.status == Status::NeedsReview)
            .filter(|r| cursor.is_none_or(|c| r.id.as_str() > c))
            .collect();
        pending.sort_by(|a, b| a.id.cmp(&b.id));
        let more = pending.len() > limit;
        let items: Vec<QueueItem> = pending.into_iter().take(limit).map(QueueItem::from).collect();
        let next_cursor = if more {
            items.last().map(|i| i.id.clone())
        } else {
            None
        };
        QueuePage { items, next_cursor }
    }

    pub fn stats(&self) -> StoreStats {
        StoreStats::of(&self.records)
    }
}

/// Decisions compare equal after the trimming `apply_decision` applies.
fn same_decision(a: &Decision, b: &Decision) -> bool {
    let text = |d: &Decision| {
        d.manually_derived_correct
            .as_deref()
            .map(str::trim)
            .map(str::to_string)
    };
    a.kind == b.kind && text(a) == text(b) && a.note == b.note
}

fn build_index(records: &[ValidationRecord]) -> Result<HashMap<String, usize>, ValidateError> {
    let mut index = HashMap::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if index.insert(r.id.clone(), i).is_some() {
            return Err(ValidateError::DuplicateRecord(r.id.clone()));
        }
    }
    Ok(index)
}

fn open_log(path: &Path) -> Result<File, ValidateError> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))
}
