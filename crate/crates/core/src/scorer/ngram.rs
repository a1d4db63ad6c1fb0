//! Add-k smoothed n-gram model over target-side tokens.
//!
//! The model ignores the source sentence. It exists so the whole pipeline
//! can run without a neural system, not to imitate translation quality.
//!
//! For a history `h` of the previous `order - 1` tokens:
//!
//! ```text
//! p(w | h) = (count(h, w) + k) / (count(h) + k * |V|)
//! ```
//!
//! where `V` is the training vocabulary plus `<unk>` and `</s>`. Histories
//! are padded with `<s>` at the sentence start; `<s>` is never predicted.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use crate::corpus::tokenize;

use super::{ScoreRequest, ScorerBackend, ScorerError, TokenLogProbs};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

#[derive(Debug, Clone, Default)]
struct HistoryCounts {
    total: u64,
    next: HashMap<String, u64>,
}

#[derive(Debug, Clone)]
pub struct NgramModel {
    order: usize,
    k: f64,
    vocab: BTreeSet<String>,
    counts: HashMap<Vec<String>, HistoryCounts>,
}

/// Trains an n-gram model on the tokenized target sides. Blank lines are
/// ignored.
pub fn train_ngram<S: AsRef<str>>(corpus: &[S], order: usize, k: f64) -> Result<NgramModel, ScorerError> {
    if order == 0 {
        return Err(ScorerError::InvalidOrder);
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(ScorerError::InvalidSmoothing(k));
    }
    let mut model = NgramModel {
        order,
        k,
        vocab: BTreeSet::new(),
        counts: HashMap::new(),
    };
    let mut sentences = 0;
    for line in corpus {
        let Ok(tokens) = tokenize(line.as_ref()) else {
            continue;
        };
        sentences += 1;
        let tokens = tokens.surfaces();
        model.vocab.extend(tokens.iter().cloned());
        let padded = model.pad(&tokens);
        for i in order - 1..padded.len() {
            let history = padded[i + 1 - order..i].to_vec();
            let entry = model.counts.entry(history).or_default();
            entry.total += 1;
            *entry.next.entry(padded[i].clone()).or_default() += 1;
        }
    }
    if sentences == 0 {
        return Err(ScorerError::EmptyCorpus);
    }
    model.vocab.remove(BOS);
    model.vocab.remove(EOS);
    model.vocab.remove(UNK);
    Ok(model)
}

impl NgramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.k
    }

    /// Size of the predicted vocabulary, including `<unk>` and `</s>`.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len() + 2
    }

    /// Every predictable symbol: training words, `<unk>` and `</s>`.
    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.vocab.iter().map(String::as_str).chain([UNK, EOS])
    }

    /// Histories seen in training.
    pub fn histories(&self) -> impl Iterator<Item = &[String]> {
        self.counts.keys().map(Vec::as_slice)
    }

    fn map_unknown(&self, w: &str) -> String {
        if w == EOS || self.vocab.contains(w) {
            w.to_string()
        } else {
            UNK.to_string()
        }
    }

    /// Sentence with BOS padding, unknown words mapped, and EOS appended.
    fn pad(&self, tokens: &[String]) -> Vec<String> {
        let mut padded = vec![BOS.to_string(); self.order - 1];
        padded.extend(tokens.iter().cloned());
        padded.push(EOS.to_string());
        padded
    }

    /// Count of `history` as a conditioning context.
    pub fn history_count(&self, history: &[String]) -> u64 {
        self.counts.get(history).map_or(0, |h| h.total)
    }

    /// `p(word | history)`; `history` must hold `order - 1` symbols.
    pub fn prob(&self, history: &[String], word: &str) -> f64 {
        debug_assert_eq!(history.len(), self.order - 1);
        let word = self.map_unknown(word);
        let (joint, total) = self
            .counts
            .get(history)
            .map_or((0, 0), |h| (h.next.get(&word).copied().unwrap_or(0), h.total));
        (joint as f64 + self.k) / (total as f64 + self.k * self.vocab_size() as f64)
    }

    /// Log-probability of each token and of the final EOS.
    pub fn sentence_logprobs(&self, tokens: &[String]) -> Vec<f64> {
        let mapped: Vec<String> = tokens.iter().map(|t| self.map_unknown(t)).collect();
        let padded = self.pad(&mapped);
        (self.order - 1..padded.len())
            .map(|i| {
                let history = &padded[i + 1 - self.order..i];
                self.prob(history, &padded[i]).ln()
            })
            .collect()
    }
}

/// [`NgramModel`] as a scoring backend.
#[derive(Debug, Clone)]
pub struct NgramBackend {
    name: String,
    model: Arc<NgramModel>,
}

impl NgramBackend {
    pub fn new(name: impl Into<String>, model: Arc<NgramModel>) -> Self {
        NgramBackend {
            name: name.into(),
            model,
        }
    }

    pub fn model(&self) -> &NgramModel {
        &self.model
    }
}

impl ScorerBackend for NgramBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn token_logprobs(&self, request: &ScoreRequest) -> Result<TokenLogProbs, ScorerError> {
        if request.target_tokens.is_empty() {
            return Err(ScorerError::EmptyTarget);
        }
        TokenLogProbs::new(self.model.sentence_logprobs(&request.target_tokens))
    }
}
