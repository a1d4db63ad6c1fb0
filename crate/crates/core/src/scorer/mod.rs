//! Sequence scoring over pluggable backends.
//!
//! A backend returns one natural-log probability per target token plus one
//! for the end-of-sequence position. [`sequence_score`] sums them;
//! [`conditional_score`] divides the sum by the number of scored positions,
//! i.e. `|target tokens| + 1`.

mod external;
mod ngram;
mod table;

use std::fmt;
use std::io;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::tokenize;

pub use external::{serve_protocol, ExternalBackend, ScoreResponse, Transport};
pub use ngram::{train_ngram, NgramBackend, NgramModel, BOS, EOS, UNK};
pub use table::{read_score_table, write_score_table, ScoreTableRow, TableBackend};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("target is empty")]
    EmptyTarget,
    #[error("log-probability list is empty")]
    EmptyLogProbs,
    #[error("log-probability {value} at position {index} is not a finite value <= 0")]
    InvalidLogProb { index: usize, value: f64 },
    #[error("backend {backend}: {message}")]
    BackendFailure { backend: String, message: String },
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("scorer did not answer within {0:?}")]
    Timeout(Duration),
    #[error("no score table entry for {0}")]
    MissingEntry(String),
    #[error("duplicate request id {0}")]
    DuplicateRequest(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
    #[error("smoothing constant must be positive and finite, got {0}")]
    InvalidSmoothing(f64),
    #[error("unknown variant {0:?}")]
    UnknownVariant(String),
    #[error("{path}:{line}: {message}")]
    TableFormat {
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
}

/// Per-position natural-log probabilities of one target sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TokenLogProbs(Vec<f64>);

impl TokenLogProbs {
    pub fn new(values: Vec<f64>) -> Result<Self, ScorerError> {
        if values.is_empty() {
            return Err(ScorerError::EmptyLogProbs);
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v > 0.0)
        {
            return Err(ScorerError::InvalidLogProb { index, value });
        }
        Ok(TokenLogProbs(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &TokenLogProbs) -> TokenLogProbs {
        TokenLogProbs(self.0.iter().chain(&other.0).copied().collect())
    }
}

impl TryFrom<Vec<f64>> for TokenLogProbs {
    type Error = ScorerError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        TokenLogProbs::new(v)
    }
}

impl From<TokenLogProbs> for Vec<f64> {
    fn from(lp: TokenLogProbs) -> Self {
        lp.0
    }
}

/// Sum of token log-probabilities, without normalization.
pub fn sequence_score(lp: &TokenLogProbs) -> f64 {
    lp.0.iter().sum()
}

/// Length-normalized score: the mean over all scored positions.
pub fn normalized_score(lp: &TokenLogProbs) -> f64 {
    sequence_score(lp) / lp.len() as f64
}

/// The three sequences scored per test item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Correct,
    Contrastive,
    Onebest,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Correct => "correct",
            Variant::Contrastive => "contrastive",
            Variant::Onebest => "onebest",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = ScorerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "correct" => Ok(Variant::Correct),
            "contrastive" => Ok(Variant::Contrastive),
            "onebest" => Ok(Variant::Onebest),
            _ => Err(ScorerError::UnknownVariant(s.to_string())),
        }
    }
}

/// Request id on the wire: `<pair_id>#<variant>`.
pub fn request_id(pair_id: &str, variant: Variant) -> String {
    format!("{pair_id}#{variant}")
}

/// Inverse of [`request_id`]; splits at the last `#`.
pub fn parse_request_id(id: &str) -> Option<(&str, Variant)> {
    let (pair, variant) = id.rsplit_once('#')?;
    Some((pair, variant.parse().ok()?))
}

/// One scoring request, serialized exactly as the external wire format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub id: String,
    pub source: String,
    pub target_tokens: Vec<String>,
}

impl ScoreRequest {
    pub fn new(pair_id: &str, variant: Variant, source: &str, target: &str) -> Result<Self, ScorerError> {
        let tokens = tokenize(target).map_err(|_| ScorerError::EmptyTarget)?;
        Ok(ScoreRequest {
            id: request_id(pair_id, variant),
            source: source.to_string(),
            target_tokens: tokens.surfaces(),
        })
    }

    /// Positions a backend must score: every token plus end-of-sequence.
    pub fn expected_positions(&self) -> usize {
        self.target_tokens.len() + 1
    }
}

/// Anything that assigns conditional log-probabilities to target tokens.
///
/// Backends must be deterministic: the same request always yields the same
/// values.
pub trait ScorerBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Unit the backend normalizes by, recorded in reports.
    fn length_unit(&self) -> &str {
        "token"
    }

    fn token_logprobs(&self, request: &ScoreRequest) -> Result<TokenLogProbs, ScorerError>;

    /// Scores many requests; results come back in request order.
    fn score_batch(&self, requests: &[ScoreRequest]) -> Result<Vec<(String, TokenLogProbs)>, ScorerError> {
        requests
            .iter()
            .map(|r| Ok((r.id.clone(), self.token_logprobs(r)?)))
            .collect()
    }
}

/// Checks that a backend answered with one value per token plus EOS.
pub fn check_positions(request: &ScoreRequest, lp: &TokenLogProbs) -> Result<(), ScorerError> {
    if lp.len() != request.expected_positions() {
        return Err(ScorerError::ProtocolViolation(format!(
            "{}: expected {} log-probabilities, got {}",
            request.id,
            request.expected_positions(),
            lp.len()
        )));
    }
    Ok(())
}

/// Length-normalized score of `target` given `source` under `backend`.
pub fn conditional_score(
    backend: &dyn ScorerBackend,
    pair_id: &str,
    variant: Variant,
    source: &str,
    target: &str,
) -> Result<f64, ScorerError> {
    let request = ScoreRequest::new(pair_id, variant, source, target)?;
    let lp = backend.token_logprobs(&request)?;
    check_positions(&request, &lp)?;
    Ok(normalized_score(&lp))
}

/// Normalized scores for a batch, in request order.
pub fn score_requests(
    backend: &dyn ScorerBackend,
    requests: &[ScoreRequest],
) -> Result<Vec<(String, TokenLogProbs)>, ScorerError> {
    let results = backend.score_batch(requests)?;
    for (req, (_, lp)) in requests.iter().zip(&results) {
        check_positions(req, lp)?;
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sums() {
        let lp = TokenLogProbs::new(vec![-0.5, -1.5]).unwrap();
        assert_eq!(sequence_score(&lp), -2.0);
        assert_eq!(normalized_score(&lp), -1.0);
        assert_eq!(sequence_score(&TokenLogProbs::new(vec![0.0]).unwrap()), 0.0);
    }

    #[test]
    fn rejects_invalid_values() {
        assert!(matches!(
            TokenLogProbs::new(vec![]),
            Err(ScorerError::EmptyLogProbs)
        ));
        assert!(matches!(
            TokenLogProbs::new(vec![-1.0, 0.5]),
            Err(ScorerError::InvalidLogProb { index: 1, .. })
        ));
        assert!(TokenLogProbs::new(vec![f64::NEG_INFINITY]).is_err());
        assert!(TokenLogProbs::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn request_ids() {
        let id = request_id("news:12", Variant::Contrastive);
        assert_eq!(id, "news:12#contrastive");
        assert_eq!(parse_request_id(&id), Some(("news:12", Variant::Contrastive)));
        assert_eq!(parse_request_id("a#b#onebest"), Some(("a#b", Variant::Onebest)));
        assert_eq!(parse_request_id("nohash"), None);
    }

    #[test]
    fn wire_request_layout() {
        let r = ScoreRequest::new("t:1", Variant::Correct, "Hello.", "Hallo.").unwrap();
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"id":"t:1#correct","source":"Hello.","target_tokens":["Hallo","."]}"#
        );
        assert_eq!(r.expected_positions(), 3);
        assert!(matches!(
            ScoreRequest::new("t:1", Variant::Correct, "x", "  "),
            Err(ScorerError::EmptyTarget)
        ));
    }

    fn logprobs() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-20.0f64..=0.0, 1..20)
    }

    proptest! {
        #[test]
        fn sum_is_linear(a in logprobs(), b in logprobs()) {
            let la = TokenLogProbs::new(a).unwrap();
            let lb = TokenLogProbs::new(b).unwrap();
            let joined = sequence_score(&la.concat(&lb));
            prop_assert!((joined - (sequence_score(&la) + sequence_score(&lb))).abs() < 1e-9);
            prop_assert!(sequence_score(&la) <= 0.0);
        }

        #[test]
        fn zero_padding_rescales_mean(a in logprobs()) {
            let k = a.len() as f64;
            let la = TokenLogProbs::new(a.clone()).unwrap();
            let mut padded = a;
            padded.push(0.0);
            let lp = TokenLogProbs::new(padded).unwrap();
            prop_assert!((normalized_score(&lp) - normalized_score(&la) * k / (k + 1.0)).abs() < 1e-9);
        }
    }
}
