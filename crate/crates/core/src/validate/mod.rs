//! Validation of machine references against human-derived minimal pairs.
//!
//! A machine reference is accepted when it shares the phenomenon-bearing
//! tokens of the human correct variant, sent to review when it shares those
//! of the human contrastive variant instead, and dropped otherwise.
//! Reviewed records either keep the machine reference as a correct
//! variant, turn it into the contrastive variant of a hand-corrected pair,
//! or drop it.

mod store;

use std::collections::HashMap;
use std::fmt;
use std::io;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{tokenize, Origin, SentencePair, TokenizedSentence};
use crate::perturb::{
    decapitalize, ErrorType, MinimalPair, PerturbError, Perturber, PhenomenonSpans, RuleResources, Skipped,
    TokenSpan,
};

pub use store::{
    Applied, LogEntry, QueueItem, QueuePage, RecordStore, StoreStats, BASE_FILE, LOG_FILE, STATE_FILE,
};

#[derive(Debug, Error)]
pub enum ValidateError {
    #[error("phenomenon span {span:?} is out of range for {len} tokens")]
    SpanOutOfRange { span: Option<TokenSpan>, len: usize },
    #[error("record {id}: expected version {expected}, found {actual}")]
    VersionConflict { id: String, expected: u64, actual: u64 },
    #[error("record {id}: cannot {decision} from {from}")]
    IllegalTransition {
        id: String,
        from: Status,
        decision: DecisionKind,
    },
    #[error("record {0}: mark_contrastive needs a manually derived correct variant")]
    MissingCorrectedText(String),
    #[error("record {0}: the corrected text equals the machine reference")]
    UnchangedCorrectedText(String),
    #[error("unknown record {0}")]
    UnknownRecord(String),
    #[error("duplicate record {0}")]
    DuplicateRecord(String),
    #[error("unresolved reviews: {}", .0.join(", "))]
    UnresolvedReviews(Vec<String>),
    #[error("a record store already exists in {0}")]
    StoreExists(PathBuf),
    #[error("{path}:{line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Perturb(#[from] PerturbError),
}

/// Phenomenon-bearing tokens of one variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhenomenonKey {
    pub error_type: ErrorType,
    pub tokens: Vec<String>,
    /// The key starts at the first token of its sentence.
    pub initial: bool,
}

impl PhenomenonKey {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Extracts the key tokens of `variant_text` for `error_type`.
///
/// The key is the material inside the phenomenon spans, with one extension:
/// for the genitive rule the governing preposition in front of the span is
/// included. For the placeholder rule the key is the set of candidate
/// nouns, in sentence order.
pub fn extract_phenomenon_key(
    variant_text: &str,
    error_type: ErrorType,
    spans: &[TokenSpan],
    resources: &RuleResources,
) -> Result<PhenomenonKey, ValidateError> {
    let t = tokenize(variant_text).map_err(|_| ValidateError::SpanOutOfRange { span: None, len: 0 })?;
    if spans.is_empty() {
        return Err(ValidateError::SpanOutOfRange {
            span: None,
            len: t.len(),
        });
    }
    for s in spans {
        if s.end < s.start || s.end > t.len() {
            return Err(ValidateError::SpanOutOfRange {
                span: Some(*s),
                len: t.len(),
            });
        }
    }
    if error_type == ErrorType::PlaceholderDing {
        let nouns = crate::perturb::noun_candidate_indices(&t, resources);
        return Ok(PhenomenonKey {
            error_type,
            tokens: nouns.iter().map(|&i| t.token(i).to_string()).collect(),
            initial: false,
        });
    }
    let mut tokens = Vec::new();
    let mut initial = false;
    for (n, s) in spans.iter().enumerate() {
        let mut start = s.start;
        if error_type == ErrorType::HypercorrectGenitive && start > 0 && !s.is_empty() {
            start -= 1;
        }
        if n == 0 && start == 0 && !s.is_empty() {
            initial = true;
        }
        tokens.extend((start..s.end).map(|i| t.token(i).to_string()));
    }
    Ok(PhenomenonKey {
        error_type,
        tokens,
        initial,
    })
}

fn same_token(a: &str, b: &str, fold: bool) -> bool {
    a == b || (fold && decapitalize(a) == decapitalize(b))
}

/// Position of `key` as a contiguous run in `hay`. Sentence-initial
/// capitalization is ignored on either side.
fn find_key(hay: &TokenizedSentence, key: &PhenomenonKey) -> Option<TokenSpan> {
    let k = &key.tokens;
    if k.is_empty() || k.len() > hay.len() {
        return None;
    }
    (0..=hay.len() - k.len())
        .find(|&p| {
            k.iter().enumerate().all(|(j, w)| {
                let fold = j == 0 && (p == 0 || key.initial);
                same_token(hay.token(p + j), w, fold)
            })
        })
        .map(|p| TokenSpan::new(p, p + k.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    AutoAccept,
    NeedsReview,
    UseAsContrastive,
    Dropped,
    ReviewedAccept,
    ReviewedContrastive,
    ReviewedDrop,
}

impl Status {
    pub const ALL: [Status; 7] = [
        Status::AutoAccept,
        Status::NeedsReview,
        Status::UseAsContrastive,
        Status::Dropped,
        Status::ReviewedAccept,
        Status::ReviewedContrastive,
        Status::ReviewedDrop,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Status::AutoAccept => "AUTO_ACCEPT",
            Status::NeedsReview => "NEEDS_REVIEW",
            Status::UseAsContrastive => "USE_AS_CONTRASTIVE",
            Status::Dropped => "DROPPED",
            Status::ReviewedAccept => "REVIEWED_ACCEPT",
            Status::ReviewedContrastive => "REVIEWED_CONTRASTIVE",
            Status::ReviewedDrop => "REVIEWED_DROP",
        }
    }

    pub fn is_terminal(self) -> bool {
        self != Status::NeedsReview
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of matching one machine reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub status: Status,
    /// Where the matched key sits in the machine reference.
    pub machine_spans: Vec<TokenSpan>,
}

/// Classifies `machine_reference` against the human pair.
///
/// For the placeholder rule the phenomenon is injected rather than
/// preserved, so any machine reference with a candidate noun is accepted.
pub fn classify_candidate(
    machine_reference: &str,
    human: &MinimalPair,
    resources: &RuleResources,
) -> Result<Classification, ValidateError> {
    let dropped = Classification {
        status: Status::Dropped,
        machine_spans: Vec::new(),
    };
    let Ok(hay) = tokenize(machine_reference) else {
        return Ok(dropped);
    };
    if human.error_type == ErrorType::PlaceholderDing {
        let nouns = crate::perturb::noun_candidate_indices(&hay, resources);
        return Ok(if nouns.is_empty() {
            dropped
        } else {
            Classification {
                status: Status::AutoAccept,
                machine_spans: nouns.iter().map(|&i| TokenSpan::new(i, i + 1)).collect(),
            }
        });
    }
    let spans = &human.phenomenon_spans;
    let correct = extract_phenomenon_key(&human.correct, human.error_type, &spans.correct, resources)?;
    if let Some(s) = find_key(&hay, &correct) {
        return Ok(Classification {
            status: Status::AutoAccept,
            machine_spans: vec![s],
        });
    }
    let contrastive = extract_phenomenon_key(
        &human.contrastive,
        human.error_type,
        &spans.contrastive,
        resources,
    )?;
    if let Some(s) = find_key(&hay, &contrastive) {
        return Ok(Classification {
            status: Status::NeedsReview,
            machine_spans: vec![s],
        });
    }
    Ok(dropped)
}

/// Store key of a record: one sentence can yield a pair for several error
/// types, so the pair id alone is not unique.
pub fn record_id(error_type: ErrorType, pair_id: &str) -> String {
    format!("{error_type}/{pair_id}")
}

/// A human pair, the machine reference for the same source, and the
/// review state of that reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationRecord {
    /// See [`record_id`].
    pub id: String,
    pub pair_id: String,
    pub error_type: ErrorType,
    pub source: String,
    #[serde(rename = "correct")]
    pub human_correct: String,
    #[serde(rename = "contrastive")]
    pub human_contrastive: String,
    pub phenomenon_spans: PhenomenonSpans,
    pub ref_origin: Origin,
    pub machine_reference: String,
    pub machine_spans: Vec<TokenSpan>,
    pub engine_name: String,
    pub status: Status,
    pub version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reviewer_note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manually_derived_correct: Option<String>,
}

impl ValidationRecord {
    pub fn new(human: &MinimalPair, machine_reference: &str, engine_name: &str, c: Classification) -> Self {
        ValidationRecord {
            id: record_id(human.error_type, &human.id),
            pair_id: human.id.clone(),
            error_type: human.error_type,
            source: human.source.clone(),
            human_correct: human.correct.clone(),
            human_contrastive: human.contrastive.clone(),
            phenomenon_spans: human.phenomenon_spans.clone(),
            ref_origin: human.ref_origin.clone(),
            machine_reference: machine_reference.to_string(),
            machine_spans: c.machine_spans,
            engine_name: engine_name.to_string(),
            status: c.status,
            version: 0,
            reviewer_note: None,
            manually_derived_correct: None,
        }
    }
}

/// Machine references matched to human pairs by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateOutcome {
    pub records: Vec<ValidationRecord>,
    /// Human pairs with no machine reference.
    pub missing_machine: Vec<String>,
}

/// Classifies the machine reference of every human pair, in parallel and in
/// human test-set order.
pub fn validate_candidates(
    human_pairs: &[MinimalPair],
    machine_refs: &[SentencePair],
    resources: &RuleResources,
) -> Result<CandidateOutcome, ValidateError> {
    let by_id: HashMap<&str, &SentencePair> = machine_refs.iter().map(|p| (p.id.as_str(), p)).collect();
    let results: Vec<Option<ValidationRecord>> = human_pairs
        .par_iter()
        .map(|h| {
            let Some(m) = by_id.get(h.id.as_str()) else {
                return Ok(None);
            };
            let engine = m.origin.engine().unwrap_or("unknown");
            let c = classify_candidate(&m.target, h, resources)?;
            Ok(Some(ValidationRecord::new(h, &m.target, engine, c)))
        })
        .collect::<Result<_, ValidateError>>()?;
    let mut out = CandidateOutcome::default();
    for (h, r) in human_pairs.iter().zip(results) {
        match r {
            Some(r) => out.records.push(r),
            None => out.missing_machine.push(h.id.clone()),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Accept,
    MarkContrastive,
    Drop,
}

impl fmt::Display for DecisionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecisionKind::Accept => "accept",
            DecisionKind::MarkContrastive => "mark_contrastive",
            DecisionKind::Drop => "drop",
        })
    }
}

/// A reviewer's verdict on one NEEDS_REVIEW record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    #[serde(rename = "decision")]
    pub kind: DecisionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manually_derived_correct: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Decision {
    pub fn accept() -> Self {
        Decision {
            kind: DecisionKind::Accept,
            manually_derived_correct: None,
            note: None,
        }
    }

    pub fn mark_contrastive(correct: impl Into<String>) -> Self {
        Decision {
            kind: DecisionKind::MarkContrastive,
            manually_derived_correct: Some(correct.into()),
            note: None,
        }
    }

    pub fn drop_record() -> Self {
        Decision {
            kind: DecisionKind::Drop,
            manually_derived_correct: None,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Applies a decision with a compare-and-set on the record version.
pub fn apply_decision(
    record: &ValidationRecord,
    decision: &Decision,
    expected_version: u64,
) -> Result<ValidationRecord, ValidateError> {
    if record.version != expected_version {
        return Err(ValidateError::VersionConflict {
            id: record.id.clone(),
            expected: expected_version,
            actual: record.version,
        });
    }
    if record.status != Status::NeedsReview {
        return Err(ValidateError::IllegalTransition {
            id: record.id.clone(),
            from: record.status,
            decision: decision.kind,
        });
    }
    let mut next = record.clone();
    match decision.kind {
        DecisionKind::Accept => next.status = Status::ReviewedAccept,
        DecisionKind::Drop => next.status = Status::ReviewedDrop,
        DecisionKind::MarkContrastive => {
            let text = decision
                .manually_derived_correct
                .as_deref()
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .ok_or_else(|| ValidateError::MissingCorrectedText(record.id.clone()))?;
            if text == record.machine_reference.trim() {
                return Err(ValidateError::UnchangedCorrectedText(record.id.clone()));
            }
            next.status = Status::ReviewedContrastive;
            next.manually_derived_correct = Some(text.to_string());
        }
    }
    if decision.note.is_some() {
        next.reviewer_note = decision.note.clone();
    }
    next.version += 1;
    Ok(next)
}

/// Token-level difference between two sentences as one span per side:
/// everything between the longest common prefix and suffix.
fn diff_spans(a: &TokenizedSentence, b: &TokenizedSentence) -> PhenomenonSpans {
    let (x, y) = (a.surfaces(), b.surfaces());
    let prefix = x.iter().zip(&y).take_while(|(p, q)| p == q).count();
    let max_suffix = x.len().min(y.len()) - prefix;
    let suffix = x
        .iter()
        .rev()
        .zip(y.iter().rev())
        .take(max_suffix)
        .take_while(|(p, q)| p == q)
        .count();
    PhenomenonSpans::single(
        TokenSpan::new(prefix, x.len() - suffix),
        TokenSpan::new(prefix, y.len() - suffix),
    )
}

/// The machine-reference test set and the records it could not use.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MachineSetOutcome {
    pub pairs: Vec<MinimalPair>,
    /// Accepted references where the rule found no site to perturb.
    pub skipped: Vec<Skipped>,
    /// NEEDS_REVIEW records left out because exclusion was requested.
    pub excluded_unresolved: Vec<String>,
}

/// Builds minimal pairs from machine references.
///
/// Accepted references are perturbed with the same rule as the human set;
/// a reference marked contrastive is paired with its hand-corrected
/// version. Dropped records contribute nothing.
pub fn build_machine_testset(
    records: &[ValidationRecord],
    perturber: &Perturber<'_>,
    seed: u64,
    exclude_unresolved: bool,
) -> Result<MachineSetOutcome, ValidateError> {
    let pending: Vec<String> = records
        .iter()
        .filter(|r| r.status == Status::NeedsReview)
        .map(|r| r.id.clone())
        .collect();
    if !pending.is_empty() && !exclude_unresolved {
        return Err(ValidateError::UnresolvedReviews(pending));
    }
    let results: Vec<Result<Option<MinimalPair>, PerturbError>> = records
        .par_iter()
        .map(|r| machine_pair(r, perturber, seed))
        .collect();
    let mut out = MachineSetOutcome {
        excluded_unresolved: pending,
        ..Default::default()
    };
    for (r, res) in records.iter().zip(results) {
        match res {
            Ok(Some(p)) => out.pairs.push(p),
            Ok(None) => {}
            Err(e) => match e.skip_reason() {
                Some(reason) => out.skipped.push(Skipped {
                    id: r.id.clone(),
                    reason: reason.to_string(),
                }),
                None => return Err(e.into()),
            },
        }
    }
    Ok(out)
}

fn machine_pair(
    r: &ValidationRecord,
    perturber: &Perturber<'_>,
    seed: u64,
) -> Result<Option<MinimalPair>, PerturbError> {
    let origin = Origin::Machine(r.engine_name.clone());
    match r.status {
        Status::AutoAccept | Status::ReviewedAccept => {
            let sp = SentencePair {
                id: r.pair_id.clone(),
                source: r.source.clone(),
                target: r.machine_reference.clone(),
                origin,
                dataset_tag: String::new(),
            };
            perturber.apply(&sp, r.error_type, seed).map(Some)
        }
        Status::ReviewedContrastive | Status::UseAsContrastive => {
            let Some(correct) = r.manually_derived_correct.clone() else {
                return Ok(None);
            };
            let (Ok(c), Ok(x)) = (tokenize(&correct), tokenize(&r.machine_reference)) else {
                return Err(PerturbError::EmptyTarget);
            };
            Ok(Some(MinimalPair {
                id: r.pair_id.clone(),
                error_type: r.error_type,
                source: r.source.clone(),
                phenomenon_spans: diff_spans(&c, &x),
                correct,
                contrastive: r.machine_reference.clone(),
                ref_origin: origin,
            }))
        }
        Status::NeedsReview | Status::Dropped | Status::ReviewedDrop => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::is_minimal;

    fn res() -> RuleResources {
        RuleResources::builtin()
    }

    fn human(target: &str, et: ErrorType) -> MinimalPair {
        let sp = SentencePair {
            id: "t:1".into(),
            source: "src".into(),
            target: target.into(),
            origin: Origin::Human,
            dataset_tag: "t".into(),
        };
        let r = res();
        Perturber::new(&r).apply(&sp, et, 7).unwrap()
    }

    const PROBES: &str = "Die Sonden werden unerwartet schneller oder langsamer.";

    #[test]
    fn polarity_key() {
        let h = human(PROBES, ErrorType::PolarityAffixDel);
        let k =
            extract_phenomenon_key(&h.correct, h.error_type, &h.phenomenon_spans.correct, &res()).unwrap();
        assert_eq!(k.tokens, ["unerwartet"]);
        let k = extract_phenomenon_key(
            &h.contrastive,
            h.error_type,
            &h.phenomenon_spans.contrastive,
            &res(),
        )
        .unwrap();
        assert_eq!(k.tokens, ["erwartet"]);
    }

    #[test]
    fn genitive_key_includes_preposition() {
        let h = human(
            "Ich warte seit dem Tag auf dich.",
            ErrorType::HypercorrectGenitive,
        );
        let k =
            extract_phenomenon_key(&h.correct, h.error_type, &h.phenomenon_spans.correct, &res()).unwrap();
        assert_eq!(k.tokens, ["seit", "dem", "Tag"]);
    }

    #[test]
    fn bad_spans() {
        let r = res();
        assert!(matches!(
            extract_phenomenon_key("a b", ErrorType::PolarityAffixDel, &[], &r),
            Err(ValidateError::SpanOutOfRange { span: None, .. })
        ));
        assert!(matches!(
            extract_phenomenon_key("a b", ErrorType::PolarityAffixDel, &[TokenSpan::new(1, 3)], &r),
            Err(ValidateError::SpanOutOfRange { .. })
        ));
    }

    #[test]
    fn classification_branches() {
        let r = res();
        let h = human(PROBES, ErrorType::PolarityAffixDel);
        let c = classify_candidate("Die Sonden wurden unerwartet schneller.", &h, &r).unwrap();
        assert_eq!(c.status, Status::AutoAccept);
        assert_eq!(c.machine_spans, [TokenSpan::new(3, 4)]);
        let c = classify_candidate("Wie erwartet wurden die Sonden schneller.", &h, &r).unwrap();
        assert_eq!(c.status, Status::NeedsReview);
        let c = classify_candidate("Die Sonden beschleunigen.", &h, &r).unwrap();
        assert_eq!(c.status, Status::Dropped);
        // sentence-initial capitalization does not block a match
        let c = classify_candidate("Unerwartet wurden die Sonden schneller.", &h, &r).unwrap();
        assert_eq!(c.status, Status::AutoAccept);
    }

    #[test]
    fn mitsamt_without_phenomenon_is_dropped() {
        let h = human(
            "Warum hat Juda sein Land mitsamt dem Tempel verloren?",
            ErrorType::HypercorrectGenitive,
        );
        assert_eq!(
            h.contrastive,
            "Warum hat Juda sein Land mitsamt des Tempels verloren?"
        );
        let c =
            classify_candidate("Warum hat Juda sein Land und seinen Tempel verloren?", &h, &res()).unwrap();
        assert_eq!(c.status, Status::Dropped);
    }

    #[test]
    fn ding_accepts_any_noun() {
        let r = res();
        let h = human("Der Laden schließt um acht Uhr.", ErrorType::PlaceholderDing);
        assert_eq!(
            classify_candidate("Das Geschäft schließt.", &h, &r)
                .unwrap()
                .status,
            Status::AutoAccept
        );
        assert_eq!(
            classify_candidate("es schließt bald.", &h, &r).unwrap().status,
            Status::Dropped
        );
    }

    fn pending_record() -> ValidationRecord {
        let h = human(PROBES, ErrorType::PolarityAffixDel);
        let m = "Wie erwartet wurden die Sonden schneller.";
        let c = classify_candidate(m, &h, &res()).unwrap();
        ValidationRecord::new(&h, m, "eng", c)
    }

    #[test]
    fn decision_transitions() {
        let rec = pending_record();
        assert_eq!(rec.status, Status::NeedsReview);
        let a = apply_decision(&rec, &Decision::accept(), 0).unwrap();
        assert_eq!((a.status, a.version), (Status::ReviewedAccept, 1));
        let fixed = "Wie unerwartet wurden die Sonden schneller.";
        let c = apply_decision(&rec, &Decision::mark_contrastive(fixed), 0).unwrap();
        assert_eq!(c.status, Status::ReviewedContrastive);
        assert_eq!(c.manually_derived_correct.as_deref(), Some(fixed));
        let d = apply_decision(&rec, &Decision::drop_record().with_note("bad"), 0).unwrap();
        assert_eq!(
            (d.status, d.reviewer_note.as_deref()),
            (Status::ReviewedDrop, Some("bad"))
        );

        assert!(matches!(
            apply_decision(&rec, &Decision::accept(), 3),
            Err(ValidateError::VersionConflict {
                expected: 3,
                actual: 0,
                ..
            })
        ));
        assert!(matches!(
            apply_decision(&a, &Decision::drop_record(), 1),
            Err(ValidateError::IllegalTransition { .. })
        ));
        let mut auto = rec.clone();
        auto.status = Status::AutoAccept;
        assert!(matches!(
            apply_decision(&auto, &Decision::drop_record(), 0),
            Err(ValidateError::IllegalTransition {
                from: Status::AutoAccept,
                ..
            })
        ));
        let missing = Decision {
            kind: DecisionKind::MarkContrastive,
            manually_derived_correct: None,
            note: None,
        };
        assert!(matches!(
            apply_decision(&rec, &missing, 0),
            Err(ValidateError::MissingCorrectedText(_))
        ));
        assert!(matches!(
            apply_decision(&rec, &Decision::mark_contrastive("  "), 0),
            Err(ValidateError::MissingCorrectedText(_))
        ));
        assert!(matches!(
            apply_decision(
                &rec,
                &Decision::mark_contrastive(rec.machine_reference.clone()),
                0
            ),
            Err(ValidateError::UnchangedCorrectedText(_))
        ));
    }

    #[test]
    fn machine_set_from_accept_and_contrastive() {
        let r = res();
        let p = Perturber::new(&r);
        let h = human(PROBES, ErrorType::PolarityAffixDel);
        let c = classify_candidate(PROBES, &h, &r).unwrap();
        let accepted = ValidationRecord::new(&h, PROBES, "eng", c);
        let mut contrastive = pending_record();
        contrastive.pair_id = "t:2".into();
        contrastive.id = record_id(contrastive.error_type, "t:2");
        let fixed = "Wie unerwartet wurden die Sonden schneller.";
        let contrastive = apply_decision(&contrastive, &Decision::mark_contrastive(fixed), 0).unwrap();

        let out = build_machine_testset(&[accepted, contrastive], &p, 1, false).unwrap();
        assert_eq!(out.pairs.len(), 2);
        assert_eq!(out.pairs[0].id, "t:1");
        assert_eq!(out.pairs[1].id, "t:2");
        assert_eq!(
            out.pairs[0].contrastive,
            "Die Sonden werden erwartet schneller oder langsamer."
        );
        assert_eq!(out.pairs[0].ref_origin, Origin::Machine("eng".into()));
        assert_eq!(out.pairs[1].correct, fixed);
        assert_eq!(
            out.pairs[1].contrastive,
            "Wie erwartet wurden die Sonden schneller."
        );
        assert_eq!(
            out.pairs[1].phenomenon_spans,
            PhenomenonSpans::single(TokenSpan::new(1, 2), TokenSpan::new(1, 2))
        );
        assert!(out.pairs.iter().all(is_minimal));
    }

    #[test]
    fn unresolved_reviews_block_the_build() {
        let r = res();
        let p = Perturber::new(&r);
        let rec = pending_record();
        match build_machine_testset(std::slice::from_ref(&rec), &p, 1, false) {
            Err(ValidateError::UnresolvedReviews(ids)) => assert_eq!(ids, ["polarity_affix_del/t:1"]),
            other => panic!("unexpected {other:?}"),
        }
        let out = build_machine_testset(&[rec], &p, 1, true).unwrap();
        assert!(out.pairs.is_empty());
        assert_eq!(out.excluded_unresolved, ["polarity_affix_del/t:1"]);
    }

    #[test]
    fn record_layout() {
        let rec = pending_record();
        let v: serde_json::Value = serde_json::to_value(&rec).unwrap();
        assert_eq!(v["id"], "polarity_affix_del/t:1");
        for field in [
            "id",
            "pair_id",
            "error_type",
            "source",
            "correct",
            "contrastive",
            "phenomenon_spans",
            "ref_origin",
            "machine_reference",
            "engine_name",
            "status",
            "version",
        ] {
            assert!(v.get(field).is_some(), "missing {field}");
        }
        assert_eq!(v["status"], "NEEDS_REVIEW");
        let back: ValidationRecord = serde_json::from_value(v).unwrap();
        assert_eq!(back, rec);
    }
}
