//! Accuracy and discrepancy over scored minimal pairs.
//!
//! All three sequences of a pair (correct, contrastive, 1-best) are scored
//! with the same length-normalized score, so discrepancy compares like with
//! like. Discrepancy is only meaningful within one backend and is never
//! pooled across backend groups.

mod report;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::perturb::{ErrorType, MinimalPair};
use crate::scorer::{
    normalized_score, parse_request_id, score_requests, ScoreRequest, ScorerBackend, ScorerError, Variant,
};

pub use report::{render_report, report_records, ReportFormat, ReportRecord, SCORE_DEFINITION};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("score is not finite: correct={correct}, contrastive={contrastive}")]
    NonFiniteScore { correct: f64, contrastive: f64 },
    #[error("test set is empty")]
    EmptyTestset,
    #[error("no 1-best translation for {0}")]
    MissingOnebest(String),
    #[error("test set mixes error types {0} and {1}")]
    MixedErrorTypes(ErrorType, ErrorType),
    #[error("test set mixes human and machine references")]
    MixedOrigins,
    #[error("no reports to render")]
    NoReports,
    #[error("unknown report format {0:?}")]
    UnknownFormat(String),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    CorrectPreferred,
    ContrastivePreferred,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgedPair {
    pub id: String,
    pub score_correct: f64,
    pub score_contrastive: f64,
    pub verdict: Verdict,
}

/// Compares the two variant scores of one pair.
pub fn judge_pair(score_correct: f64, score_contrastive: f64) -> Result<Verdict, EvalError> {
    if !score_correct.is_finite() || !score_contrastive.is_finite() {
        return Err(EvalError::NonFiniteScore {
            correct: score_correct,
            contrastive: score_contrastive,
        });
    }
    Ok(if score_correct > score_contrastive {
        Verdict::CorrectPreferred
    } else if score_correct < score_contrastive {
        Verdict::ContrastivePreferred
    } else {
        Verdict::Tie
    })
}

impl JudgedPair {
    pub fn new(id: impl Into<String>, score_correct: f64, score_contrastive: f64) -> Result<Self, EvalError> {
        Ok(JudgedPair {
            id: id.into(),
            score_correct,
            score_contrastive,
            verdict: judge_pair(score_correct, score_contrastive)?,
        })
    }
}

/// How a tie enters the accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// A tie is a miss.
    #[default]
    Against,
    /// A tie counts half.
    Half,
}

impl std::str::FromStr for TiePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "against" => Ok(TiePolicy::Against),
            "half" => Ok(TiePolicy::Half),
            _ => Err(format!("unknown tie policy {s:?} (expected against or half)")),
        }
    }
}

/// Percentage of pairs where the correct variant wins.
pub fn accuracy(judged: &[JudgedPair], ties: TiePolicy) -> Result<f64, EvalError> {
    if judged.is_empty() {
        return Err(EvalError::EmptyTestset);
    }
    let mut wins = 0.0;
    for j in judged {
        wins += match (j.verdict, ties) {
            (Verdict::CorrectPreferred, _) => 1.0,
            (Verdict::Tie, TiePolicy::Half) => 0.5,
            _ => 0.0,
        };
    }
    Ok(100.0 * wins / judged.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyInput {
    pub score_onebest: f64,
    pub score_preferred: f64,
}

impl DiscrepancyInput {
    /// The preferred variant is whichever one the model scores higher.
    pub fn new(score_onebest: f64, score_correct: f64, score_contrastive: f64) -> Self {
        DiscrepancyInput {
            score_onebest,
            score_preferred: score_correct.max(score_contrastive),
        }
    }
}

/// Mean gap between the 1-best score and the preferred variant's score.
pub fn discrepancy(inputs: &[DiscrepancyInput]) -> Result<f64, EvalError> {
    if inputs.is_empty() {
        return Err(EvalError::EmptyTestset);
    }
    let total: f64 = inputs.iter().map(|d| d.score_onebest - d.score_preferred).sum();
    Ok(total / inputs.len() as f64)
}

/// Mean and sample standard deviation (n - 1). A single run has std 0.
///
/// # Panics
/// On an empty slice.
pub fn aggregate_runs(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty(), "aggregate_runs needs at least one value");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestsetType {
    Human,
    Machine,
}

impl TestsetType {
    pub fn as_str(self) -> &'static str {
        match self {
            TestsetType::Human => "human",
            TestsetType::Machine => "machine",
        }
    }

    /// Human unless every pair comes from a machine reference.
    pub fn of(pairs: &[MinimalPair]) -> Result<Self, EvalError> {
        let machine = pairs.iter().filter(|p| p.ref_origin.is_machine()).count();
        match machine {
            0 => Ok(TestsetType::Human),
            m if m == pairs.len() => Ok(TestsetType::Machine),
            _ => Err(EvalError::MixedOrigins),
        }
    }
}

/// Scores of one pair under one backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub id: String,
    pub correct: f64,
    pub contrastive: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onebest: Option<f64>,
}

const BATCH: usize = 1024;

/// Scores both variants of every pair and, when given, the 1-best
/// translation of its source (looked up by pair id).
pub fn score_testset(
    backend: &dyn ScorerBackend,
    pairs: &[MinimalPair],
    onebest: Option<&HashMap<String, String>>,
) -> Result<Vec<PairScores>, EvalError> {
    let mut requests = Vec::with_capacity(pairs.len() * 3);
    for p in pairs {
        requests.push(ScoreRequest::new(&p.id, Variant::Correct, &p.source, &p.correct)?);
        requests.push(ScoreRequest::new(
            &p.id,
            Variant::Contrastive,
            &p.source,
            &p.contrastive,
        )?);
        if let Some(map) = onebest {
            let text = map
                .get(&p.id)
                .ok_or_else(|| EvalError::MissingOnebest(p.id.clone()))?;
            requests.push(ScoreRequest::new(&p.id, Variant::Onebest, &p.source, text)?);
        }
    }
    let mut by_id: HashMap<String, f64> = HashMap::with_capacity(requests.len());
    for chunk in requests.chunks(BATCH) {
        for (id, lp) in score_requests(backend, chunk)? {
            by_id.insert(id, normalized_score(&lp));
        }
    }
    let get = |pair_id: &str, v: Variant| -> f64 { by_id[&crate::scorer::request_id(pair_id, v)] };
    Ok(pairs
        .iter()
        .map(|p| PairScores {
            id: p.id.clone(),
            correct: get(&p.id, Variant::Correct),
            contrastive: get(&p.id, Variant::Contrastive),
            onebest: onebest.map(|_| get(&p.id, Variant::Onebest)),
        })
        .collect())
}

/// Rebuilds pair scores from raw `(request id, score)` entries.
pub fn collect_pair_scores(entries: &[(String, f64)]) -> Vec<PairScores> {
    let mut order: Vec<String> = Vec::new();
    let mut map: HashMap<String, PairScores> = HashMap::new();
    for (id, score) in entries {
        let Some((pair, variant)) = parse_request_id(id) else {
            continue;
        };
        let entry = map.entry(pair.to_string()).or_insert_with(|| {
            order.push(pair.to_string());
            PairScores {
                id: pair.to_string(),
                correct: f64::NAN,
                contrastive: f64::NAN,
                onebest: None,
            }
        });
        match variant {
            Variant::Correct => entry.correct = *score,
            Variant::Contrastive => entry.contrastive = *score,
            Variant::Onebest => entry.onebest = Some(*score),
        }
    }
    order.into_iter().map(|id| map.remove(&id).unwrap()).collect()
}

/// A backend and, optionally, its 1-best translations keyed by pair id.
pub type BackendInput<'a> = (&'a dyn ScorerBackend, Option<&'a HashMap<String, String>>);

/// Accuracy and discrepancy of one backend on one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendResult {
    pub backend: String,
    pub group: String,
    pub length_unit: String,
    pub pairs: usize,
    pub accuracy: f64,
    /// Absent when no 1-best translations were scored.
    pub discrepancy: Option<f64>,
}

/// Backends named `group/run` share a group; other names are their own group.
pub fn backend_group(name: &str) -> &str {
    name.split_once('/').map_or(name, |(g, _)| g)
}

/// Judges every pair in parallel.
pub fn judge_all(scores: &[PairScores]) -> Result<Vec<JudgedPair>, EvalError> {
    scores
        .par_iter()
        .map(|s| JudgedPair::new(s.id.clone(), s.correct, s.contrastive))
        .collect()
}

/// Evaluates pre-computed scores for one backend.
pub fn evaluate_scores(
    backend: &str,
    length_unit: &str,
    scores: &[PairScores],
    ties: TiePolicy,
) -> Result<BackendResult, EvalError> {
    let judged = judge_all(scores)?;
    let acc = accuracy(&judged, ties)?;
    let disc = if scores.iter().all(|s| s.onebest.is_some()) {
        let inputs: Vec<DiscrepancyInput> = scores
            .iter()
            .map(|s| DiscrepancyInput::new(s.onebest.unwrap(), s.correct, s.contrastive))
            .collect();
        Some(discrepancy(&inputs)?)
    } else {
        None
    };
    Ok(BackendResult {
        backend: backend.to_string(),
        group: backend_group(backend).to_string(),
        length_unit: length_unit.to_string(),
        pairs: scores.len(),
        accuracy: acc,
        discrepancy: disc,
    })
}

/// Results for one (error type, test set type) across backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub error_type: ErrorType,
    pub testset_type: TestsetType,
    pub tie_policy: TiePolicy,
    pub results: Vec<BackendResult>,
}

/// Mean ± std of one metric over the runs of one backend group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

impl Aggregate {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let (mean, std) = aggregate_runs(values);
        Some(Aggregate {
            mean,
            std,
            runs: values.len(),
        })
    }
}

impl EvalReport {
    pub fn groups(&self) -> Vec<&str> {
        let mut g: Vec<&str> = self.results.iter().map(|r| r.group.as_str()).collect();
        g.sort_unstable();
        g.dedup();
        g
    }

    pub fn accuracy(&self, group: &str) -> Option<Aggregate> {
        let v: Vec<f64> = self
            .results
            .iter()
            .filter(|r| r.group == group)
            .map(|r| r.accuracy)
            .collect();
        Aggregate::of(&v)
    }

    /// Aggregated over the runs of `group` only.
    pub fn discrepancy(&self, group: &str) -> Option<Aggregate> {
        let runs: Vec<&BackendResult> = self.results.iter().filter(|r| r.group == group).collect();
        let v: Option<Vec<f64>> = runs.iter().map(|r| r.discrepancy).collect();
        Aggregate::of(&v?)
    }
}

/// Evaluates one backend on one test set, scoring through the backend.
pub fn evaluate_backend(
    backend: &dyn ScorerBackend,
    pairs: &[MinimalPair],
    onebest: Option<&HashMap<String, String>>,
    ties: TiePolicy,
) -> Result<BackendResult, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyTestset);
    }
    let scores = score_testset(backend, pairs, onebest)?;
    evaluate_scores(backend.name(), backend.length_unit(), &scores, ties)
}

/// Evaluates several backends on a single-type test set.
pub fn evaluate_testset(
    backends: &[BackendInput<'_>],
    pairs: &[MinimalPair],
    ties: TiePolicy,
) -> Result<EvalReport, EvalError> {
    let first = pairs.first().ok_or(EvalError::EmptyTestset)?;
    if let Some(other) = pairs.iter().find(|p| p.error_type != first.error_type) {
        return Err(EvalError::MixedErrorTypes(first.error_type, other.error_type));
    }
    let testset_type = TestsetType::of(pairs)?;
    let results = backends
        .iter()
        .map(|(b, onebest)| evaluate_backend(*b, pairs, *onebest, ties))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport {
        error_type: first.error_type,
        testset_type,
        tie_policy: ties,
        results,
    })
}
