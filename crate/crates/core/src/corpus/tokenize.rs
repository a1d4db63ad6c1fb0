//! Whitespace tokenizer with punctuation splitting.
//!
//! Tokens keep byte offsets into the original text, so a sentence can be
//! edited token-wise and rendered back without disturbing the surrounding
//! whitespace.

use std::ops::Range;

use super::CorpusError;

/// Marks split off the edges of a whitespace-delimited chunk.
const EDGE_PUNCTUATION: &[char] = &[
    '.', ',', ';', ':', '!', '?', '"', '»', '«', '(', ')', '„', '“', '”', '‚', '‘', '’',
];

pub(crate) fn is_edge_punct(c: char) -> bool {
    EDGE_PUNCTUATION.contains(&c)
}

/// A surface token and its byte range in the text it was cut from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub span: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedSentence {
    text: String,
    tokens: Vec<Token>,
}

impl TokenizedSentence {
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx].text
    }

    pub fn surfaces(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.text.clone()).collect()
    }

    /// Renders the sentence with token `idx` replaced by `with`.
    pub fn with_replaced(&self, idx: usize, with: &str) -> String {
        let span = &self.tokens[idx].span;
        let mut out = String::with_capacity(self.text.len() + with.len());
        out.push_str(&self.text[..span.start]);
        out.push_str(with);
        out.push_str(&self.text[span.end..]);
        out
    }

    /// Renders the sentence with several tokens replaced at once.
    pub fn with_replacements(&self, edits: &[(usize, String)]) -> String {
        let mut edits: Vec<_> = edits.iter().collect();
        edits.sort_by_key(|(i, _)| *i);
        let mut out = String::with_capacity(self.text.len());
        let mut cursor = 0;
        for (idx, with) in edits {
            let span = &self.tokens[*idx].span;
            out.push_str(&self.text[cursor..span.start]);
            out.push_str(with);
            cursor = span.end;
        }
        out.push_str(&self.text[cursor..]);
        out
    }

    /// Renders the sentence without token `idx`, dropping the whitespace gap
    /// on its left (or on its right for the first token) so no double space
    /// is left behind.
    pub fn with_deleted(&self, idx: usize) -> String {
        let span = &self.tokens[idx].span;
        let (cut_start, cut_end) = if idx > 0 {
            (self.tokens[idx - 1].span.end, span.end)
        } else if self.tokens.len() > 1 {
            (span.start, self.tokens[1].span.start)
        } else {
            (span.start, span.end)
        };
        let mut out = String::with_capacity(self.text.len());
        out.push_str(&self.text[..cut_start]);
        out.push_str(&self.text[cut_end..]);
        out
    }

    /// Byte offset in the text where token `idx` starts.
    pub fn byte_start(&self, idx: usize) -> usize {
        self.tokens[idx].span.start
    }

    /// Index of the token starting at byte `offset`, if any.
    pub fn token_at_byte(&self, offset: usize) -> Option<usize> {
        self.tokens.iter().position(|t| t.span.start == offset)
    }
}

/// Splits `text` on whitespace, then peels edge punctuation off each chunk
/// into single-character tokens. Hyphens inside words are kept.
pub fn tokenize(text: &str) -> Result<TokenizedSentence, CorpusError> {
    if text.trim().is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let mut tokens = Vec::new();
    for (start, chunk) in whitespace_chunks(text) {
        split_chunk(chunk, start, &mut tokens);
    }
    Ok(TokenizedSentence {
        text: text.to_string(),
        tokens,
    })
}

/// Rebuilds the original text from a tokenized sentence.
pub fn detokenize(sentence: &TokenizedSentence) -> String {
    let mut out = String::with_capacity(sentence.text.len());
    let mut cursor = 0;
    for tok in &sentence.tokens {
        out.push_str(&sentence.text[cursor..tok.span.start]);
        out.push_str(&tok.text);
        cursor = tok.span.end;
    }
    out.push_str(&sentence.text[cursor..]);
    out
}

fn whitespace_chunks(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut chunks = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                chunks.push((s, &text[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        chunks.push((s, &text[s..]));
    }
    chunks.into_iter()
}

fn split_chunk(chunk: &str, offset: usize, out: &mut Vec<Token>) {
    let mut lead = Vec::new();
    let mut body_start = 0;
    for (i, c) in chunk.char_indices() {
        if !is_edge_punct(c) {
            break;
        }
        lead.push((i, c));
        body_start = i + c.len_utf8();
    }

    let mut trail = Vec::new();
    let mut body_end = chunk.len();
    if body_start < chunk.len() {
        for (i, c) in chunk.char_indices().rev() {
            if i < body_start || !is_edge_punct(c) {
                break;
            }
            trail.push((i, c));
            body_end = i;
        }
    }

    let single = |i: usize, c: char| Token {
        text: c.to_string(),
        span: offset + i..offset + i + c.len_utf8(),
    };
    out.extend(lead.into_iter().map(|(i, c)| single(i, c)));
    if body_start < body_end {
        out.push(Token {
            text: chunk[body_start..body_end].to_string(),
            span: offset + body_start..offset + body_end,
        });
    }
    out.extend(trail.into_iter().rev().map(|(i, c)| single(i, c)));
}
