//! A minimal external scorer: reads score requests as JSON lines on stdin
//! and answers with one log-probability per target token plus end of
//! sequence. Usable as `--backend NAME=external:PATH_TO_BINARY`.
//!
//! echo '{"id":"p#correct","source":"s","target_tokens":["a","b"]}' \
//!   | cargo run -q --example stdio_scorer

use std::io::{self, BufReader};

use minpair::scorer::{ScoreRequest, ScorerBackend, ScorerError, TokenLogProbs};

/// Charges every token by its length, a stand-in for a real model.
struct CharCost;

impl ScorerBackend for CharCost {
    fn name(&self) -> &str {
        "char-cost"
    }

    fn token_logprobs(&self, request: &ScoreRequest) -> Result<TokenLogProbs, ScorerError> {
        let mut values: Vec<f64> = request
            .target_tokens
            .iter()
            .map(|t| -0.1 * t.chars().count() as f64)
            .collect();
        values.push(-0.05);
        TokenLogProbs::new(values)
    }
}

fn main() -> Result<(), ScorerError> {
    let stdin = io::stdin();
    minpair::scorer::serve_protocol(&CharCost, BufReader::new(stdin.lock()), io::stdout().lock())?;
    Ok(())
}
