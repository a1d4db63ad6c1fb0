//! Clause segmentation.

use std::ops::Range;

/// Splits a sentence into clauses, reported as byte ranges into the input.
///
/// Ranges are ordered, non-overlapping, trimmed of surrounding whitespace,
/// and only whitespace lies between consecutive ranges. Non-blank input
/// yields at least one range.
pub trait ClauseSegmenter: Send + Sync {
    fn clause_spans(&self, text: &str) -> Vec<Range<usize>>;
}

const BOUNDARY: &[char] = &['.', '!', '?', ':'];
const CLOSERS: &[char] = &['"', '“', '”', '»', '«', '’', '\'', ')'];
const OPENERS: &[char] = &['"', '„', '“', '«', '»', '‚', '\''];

const ABBREVIATIONS: &[&str] = &[
    "z.b.", "d.h.", "u.a.", "usw.", "bzw.", "ca.", "dr.", "prof.", "nr.", "st.", "vgl.", "etc.", "hr.",
    "fr.", "evtl.", "ggf.", "inkl.", "bzgl.", "mio.", "mrd.", "jh.", "s.", "str.", "z.t.", "o.ä.", "u.ä.",
    "sog.",
];

/// Punctuation-driven segmenter: a clause ends after `. ! ? :` (plus any
/// closing quotes) when whitespace and an uppercase letter or opening quote
/// follow. Abbreviations, single letters and ordinals do not end a clause.
#[derive(Debug, Clone, Default)]
pub struct RuleSegmenter;

impl RuleSegmenter {
    fn suppressed(text: &str, dot: usize) -> bool {
        let word_start = text[..dot]
            .char_indices()
            .rev()
            .find(|(_, c)| c.is_whitespace())
            .map(|(i, c)| i + c.len_utf8())
            .unwrap_or(0);
        let word = &text[word_start..dot];
        let word = word.trim_start_matches(|c: char| OPENERS.contains(&c) || c == '(');
        if word.is_empty() {
            return false;
        }
        if word.chars().all(|c| c.is_ascii_digit()) || word.chars().count() == 1 {
            return true;
        }
        let with_dot = format!("{}.", word.to_lowercase());
        ABBREVIATIONS.contains(&with_dot.as_str())
    }
}

impl ClauseSegmenter for RuleSegmenter {
    fn clause_spans(&self, text: &str) -> Vec<Range<usize>> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut spans = Vec::new();
        let mut start = None;
        let mut i = 0;
        while i < chars.len() {
            let (pos, c) = chars[i];
            if start.is_none() {
                if !c.is_whitespace() {
                    start = Some(pos);
                }
                i += 1;
                continue;
            }
            if BOUNDARY.contains(&c) {
                let mut j = i + 1;
                while j < chars.len() && CLOSERS.contains(&chars[j].1) {
                    j += 1;
                }
                let end = chars.get(j).map_or(text.len(), |(p, _)| *p);
                let mut k = j;
                while k < chars.len() && chars[k].1.is_whitespace() {
                    k += 1;
                }
                let splits = k > j
                    && k < chars.len()
                    && (chars[k].1.is_uppercase() || OPENERS.contains(&chars[k].1))
                    && !(c == '.' && Self::suppressed(text, pos));
                if splits {
                    spans.push(start.take().unwrap()..end);
                    i = k;
                    continue;
                }
                i = j;
                continue;
            }
            i += 1;
        }
        if let Some(s) = start {
            spans.push(s..text.trim_end().len());
        }
        spans
    }
}

/// Clause strings with internal whitespace collapsed to single spaces.
/// Joining them with `" "` gives the whitespace-normalized input.
pub fn segment_clauses(segmenter: &dyn ClauseSegmenter, text: &str) -> Vec<String> {
    segmenter
        .clause_spans(text)
        .into_iter()
        .map(|r| text[r].split_whitespace().collect::<Vec<_>>().join(" "))
        .collect()
}
