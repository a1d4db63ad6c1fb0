//! Contrastive variant construction.
//!
//! Each rule takes a reference translation and produces a [`MinimalPair`]:
//! the untouched reference as the correct variant and a minimally edited
//! copy as the contrastive variant. Rules that find nothing to edit return
//! a skip error, and [`build_testset`] records the skip instead of failing.

mod resources;
mod rules;
mod segment;

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, tokenize, CorpusError, Origin, SentencePair, TokenizedSentence};

pub use resources::{RuleResources, UnPolarityEntry, REQUIRED_DATIVE_PREPOSITIONS};
pub use rules::{AgreementKind, Negation};
pub use segment::{segment_clauses, ClauseSegmenter, RuleSegmenter};

pub(crate) use resources::{capitalize, decapitalize};

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("no candidate noun")]
    NoCandidateNoun,
    #[error("no eligible dative phrase")]
    NoEligiblePhrase,
    #[error("no eligible token")]
    NoEligibleToken,
    #[error("target has a single clause")]
    SingleClause,
    #[error("no eligible agreement site")]
    NoEligibleSite,
    #[error("target is empty")]
    EmptyTarget,
    #[error("unknown error type {0:?}")]
    UnknownErrorType(String),
    #[error("{file}:{line}: {message}")]
    Resource {
        file: String,
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
    Corpus(#[from] CorpusError),
}

impl PerturbError {
    /// Stable code for errors that mean "this sentence does not qualify".
    pub fn skip_reason(&self) -> Option<&'static str> {
        Some(match self {
            PerturbError::NoCandidateNoun => "NO_CANDIDATE_NOUN",
            PerturbError::NoEligiblePhrase => "NO_ELIGIBLE_PHRASE",
            PerturbError::NoEligibleToken => "NO_ELIGIBLE_TOKEN",
            PerturbError::SingleClause => "SINGLE_CLAUSE",
            PerturbError::NoEligibleSite => "NO_ELIGIBLE_SITE",
            PerturbError::EmptyTarget => "EMPTY_TARGET",
            _ => return None,
        })
    }
}

/// The eight error types of the test suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorType {
    ClauseOmission,
    HypercorrectGenitive,
    NpAgreement,
    PlaceholderDing,
    PolarityAffixDel,
    PolarityParticleKeinDel,
    PolarityParticleNichtDel,
    SubjVerbAgreement,
}

impl ErrorType {
    pub const ALL: [ErrorType; 8] = [
        ErrorType::ClauseOmission,
        ErrorType::HypercorrectGenitive,
        ErrorType::NpAgreement,
        ErrorType::PlaceholderDing,
        ErrorType::PolarityAffixDel,
        ErrorType::PolarityParticleKeinDel,
        ErrorType::PolarityParticleNichtDel,
        ErrorType::SubjVerbAgreement,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorType::ClauseOmission => "clause_omission",
            ErrorType::HypercorrectGenitive => "hypercorrect_genitive",
            ErrorType::NpAgreement => "np_agreement",
            ErrorType::PlaceholderDing => "placeholder_ding",
            ErrorType::PolarityAffixDel => "polarity_affix_del",
            ErrorType::PolarityParticleKeinDel => "polarity_particle_kein_del",
            ErrorType::PolarityParticleNichtDel => "polarity_particle_nicht_del",
            ErrorType::SubjVerbAgreement => "subj_verb_agreement",
        }
    }

    pub fn is_polarity(self) -> bool {
        matches!(
            self,
            ErrorType::PolarityAffixDel
                | ErrorType::PolarityParticleKeinDel
                | ErrorType::PolarityParticleNichtDel
        )
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorType {
    type Err = PerturbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| PerturbError::UnknownErrorType(s.to_string()))
    }
}

/// Half-open token index range; serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn new(start: usize, end: usize) -> Self {
        TokenSpan { start, end }
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

impl From<(usize, usize)> for TokenSpan {
    fn from((start, end): (usize, usize)) -> Self {
        TokenSpan { start, end }
    }
}

impl From<TokenSpan> for (usize, usize) {
    fn from(s: TokenSpan) -> Self {
        (s.start, s.end)
    }
}

/// Edited material in each variant, as parallel lists of token spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhenomenonSpans {
    pub correct: Vec<TokenSpan>,
    pub contrastive: Vec<TokenSpan>,
}

impl PhenomenonSpans {
    pub fn single(correct: TokenSpan, contrastive: TokenSpan) -> Self {
        PhenomenonSpans {
            correct: vec![correct],
            contrastive: vec![contrastive],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinimalPair {
    pub id: String,
    pub error_type: ErrorType,
    pub source: String,
    pub correct: String,
    pub contrastive: String,
    pub phenomenon_spans: PhenomenonSpans,
    pub ref_origin: Origin,
}

/// True when both variants differ and agree token-for-token outside the
/// phenomenon spans.
pub fn is_minimal(pair: &MinimalPair) -> bool {
    let (Ok(c), Ok(x)) = (tokenize(&pair.correct), tokenize(&pair.contrastive)) else {
        return false;
    };
    let spans = &pair.phenomenon_spans;
    if pair.correct == pair.contrastive || spans.correct.len() != spans.contrastive.len() {
        return false;
    }
    match (
        outside_segments(&c, &spans.correct),
        outside_segments(&x, &spans.contrastive),
    ) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    }
}

fn outside_segments(t: &TokenizedSentence, spans: &[TokenSpan]) -> Option<Vec<Vec<String>>> {
    let toks = t.surfaces();
    let mut segments = Vec::new();
    let mut cursor = 0;
    for s in spans {
        if s.start < cursor || s.end < s.start || s.end > toks.len() {
            return None;
        }
        segments.push(toks[cursor..s.start].to_vec());
        cursor = s.end;
    }
    segments.push(toks[cursor..].to_vec());
    Some(segments)
}

/// Which clause the omission rule deletes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClauseChoice {
    #[default]
    Last,
    Index(usize),
}

/// A pair that no rule site matched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TestsetOutcome {
    pub pairs: Vec<MinimalPair>,
    pub skipped: Vec<Skipped>,
}

/// Applies the construction rules with a fixed set of resources.
pub struct Perturber<'r> {
    resources: &'r RuleResources,
    segmenter: Box<dyn ClauseSegmenter>,
    clause_choice: ClauseChoice,
}

impl<'r> Perturber<'r> {
    pub fn new(resources: &'r RuleResources) -> Self {
        Perturber {
            resources,
            segmenter: Box::new(RuleSegmenter),
            clause_choice: ClauseChoice::Last,
        }
    }

    pub fn with_segmenter(mut self, segmenter: Box<dyn ClauseSegmenter>) -> Self {
        self.segmenter = segmenter;
        self
    }

    pub fn with_clause_choice(mut self, choice: ClauseChoice) -> Self {
        self.clause_choice = choice;
        self
    }

    pub fn resources(&self) -> &RuleResources {
        self.resources
    }

    pub fn segmenter(&self) -> &dyn ClauseSegmenter {
        self.segmenter.as_ref()
    }

    /// Runs the rule for `error_type`. `seed` only matters for the
    /// placeholder rule and is combined with the pair id.
    pub fn apply(
        &self,
        pair: &SentencePair,
        error_type: ErrorType,
        seed: u64,
    ) -> Result<MinimalPair, PerturbError> {
        match error_type {
            ErrorType::PlaceholderDing => self.placeholder_ding(pair, pair_seed(seed, &pair.id)),
            ErrorType::HypercorrectGenitive => self.hypercorrect_genitive(pair),
            ErrorType::PolarityAffixDel => self.polarity_affix(pair),
            ErrorType::PolarityParticleKeinDel => self.negation_particle(pair, Negation::Kein),
            ErrorType::PolarityParticleNichtDel => self.negation_particle(pair, Negation::Nicht),
            ErrorType::ClauseOmission => self.clause_omission(pair),
            ErrorType::NpAgreement => self.agreement(pair, AgreementKind::NounPhrase),
            ErrorType::SubjVerbAgreement => self.agreement(pair, AgreementKind::SubjectVerb),
        }
    }

    /// Applies one rule to every pair, in input order.
    pub fn build(&self, pairs: &[SentencePair], error_type: ErrorType, seed: u64) -> TestsetOutcome {
        let results: Vec<_> = pairs
            .par_iter()
            .map(|p| self.apply(p, error_type, seed))
            .collect();
        let mut out = TestsetOutcome::default();
        for (pair, result) in pairs.iter().zip(results) {
            match result {
                Ok(mp) => out.pairs.push(mp),
                Err(e) => out.skipped.push(Skipped {
                    id: pair.id.clone(),
                    reason: e.skip_reason().unwrap_or("ERROR").to_string(),
                }),
            }
        }
        out
    }
}

/// Builds a test set for one error type with the default segmenter.
pub fn build_testset(
    pairs: &[SentencePair],
    error_type: ErrorType,
    seed: u64,
    resources: &RuleResources,
) -> TestsetOutcome {
    Perturber::new(resources).build(pairs, error_type, seed)
}

/// Picks one replaceable noun. Candidates are capitalized tokens past the
/// first position that are not stoplisted and do not follow a sentence
/// boundary.
pub fn select_target_noun(
    tokens: &TokenizedSentence,
    seed: u64,
    resources: &RuleResources,
) -> Result<usize, PerturbError> {
    let candidates = rules::noun_candidates(tokens, resources);
    if candidates.is_empty() {
        return Err(PerturbError::NoCandidateNoun);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(candidates[rng.random_range(0..candidates.len())])
}

/// Indices of tokens the placeholder rule may replace.
pub fn noun_candidate_indices(tokens: &TokenizedSentence, resources: &RuleResources) -> Vec<usize> {
    rules::noun_candidates(tokens, resources)
}

/// Per-pair seed: the run seed mixed with an FNV-1a hash of the pair id, so
/// that the choice for one sentence does not depend on its neighbours.
pub fn pair_seed(seed: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ h
}

pub fn write_testset(path: &Path, pairs: &[MinimalPair]) -> Result<(), PerturbError> {
    corpus::write_jsonl(path, pairs).map_err(|source| PerturbError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_testset(path: &Path) -> Result<Vec<MinimalPair>, PerturbError> {
    Ok(corpus::read_jsonl(path)?)
}
