use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{tokenize, SentencePair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub max_tokens: usize,
    /// Pairs are removed only when the length ratio is strictly greater.
    pub max_ratio: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            max_tokens: 250,
            max_ratio: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RemovalReason {
    TooLong,
    Ratio,
    Empty,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<SentencePair>,
    pub removed: BTreeMap<RemovalReason, usize>,
}

impl FilterOutcome {
    pub fn removed_total(&self) -> usize {
        self.removed.values().sum()
    }
}

fn verdict(pair: &SentencePair, cfg: &FilterConfig) -> Option<RemovalReason> {
    let (Ok(src), Ok(tgt)) = (tokenize(&pair.source), tokenize(&pair.target)) else {
        return Some(RemovalReason::Empty);
    };
    let (ls, lt) = (src.len(), tgt.len());
    if ls > cfg.max_tokens || lt > cfg.max_tokens {
        return Some(RemovalReason::TooLong);
    }
    let ratio = ls.max(lt) as f64 / ls.min(lt) as f64;
    (ratio > cfg.max_ratio).then_some(RemovalReason::Ratio)
}

/// Drops over-long pairs and pairs whose token-length ratio (longer side over
/// shorter side) exceeds `max_ratio`. Survivors keep their input order.
pub fn filter_pairs(pairs: Vec<SentencePair>, cfg: &FilterConfig) -> FilterOutcome {
    let verdicts: Vec<_> = pairs.par_iter().map(|p| verdict(p, cfg)).collect();
    let mut out = FilterOutcome::default();
    for (pair, v) in pairs.into_iter().zip(verdicts) {
        match v {
            None => out.kept.push(pair),
            Some(reason) => *out.removed.entry(reason).or_default() += 1,
        }
    }
    out
}
