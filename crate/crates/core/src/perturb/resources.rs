//! Lexical data driving the perturbation rules.
//!
//! Every table is a plain-text file: one entry per line, or two
//! tab-separated columns for mappings. Lines starting with `#` are
//! comments. A built-in copy of each file is compiled into the crate.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use super::PerturbError;

/// Prepositions that must be present in any loaded preposition list.
pub const REQUIRED_DATIVE_PREPOSITIONS: [&str; 9] = [
    "entgegen",
    "entsprechend",
    "gegenüber",
    "gemäß",
    "nahe",
    "nebst",
    "mitsamt",
    "samt",
    "seit",
];

pub const DATIVE_PREPOSITIONS_FILE: &str = "dative_prepositions.txt";
pub const DATIVE_TO_GENITIVE_FILE: &str = "dative_to_genitive.tsv";
pub const GENITIVE_NOUNS_FILE: &str = "genitive_nouns.tsv";
pub const AGREEMENT_FLIPS_FILE: &str = "agreement_flips.tsv";
pub const UN_POLARITY_FILE: &str = "un_polarity.txt";
pub const VERB_NUMBER_FILE: &str = "verb_number.tsv";
pub const NOUN_STOPLIST_FILE: &str = "noun_stoplist.txt";
pub const PLURAL_NOUNS_FILE: &str = "plural_nouns.txt";
pub const SINGULAR_NOUNS_FILE: &str = "singular_nouns.txt";

const BUILTIN: [(&str, &str); 9] = [
    (
        DATIVE_PREPOSITIONS_FILE,
        include_str!("../../resources/dative_prepositions.txt"),
    ),
    (
        DATIVE_TO_GENITIVE_FILE,
        include_str!("../../resources/dative_to_genitive.tsv"),
    ),
    (
        GENITIVE_NOUNS_FILE,
        include_str!("../../resources/genitive_nouns.tsv"),
    ),
    (
        AGREEMENT_FLIPS_FILE,
        include_str!("../../resources/agreement_flips.tsv"),
    ),
    (UN_POLARITY_FILE, include_str!("../../resources/un_polarity.txt")),
    (VERB_NUMBER_FILE, include_str!("../../resources/verb_number.tsv")),
    (
        NOUN_STOPLIST_FILE,
        include_str!("../../resources/noun_stoplist.txt"),
    ),
    (
        PLURAL_NOUNS_FILE,
        include_str!("../../resources/plural_nouns.txt"),
    ),
    (
        SINGULAR_NOUNS_FILE,
        include_str!("../../resources/singular_nouns.txt"),
    ),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnPolarityEntry {
    pub word: String,
    pub base: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleResources {
    pub dative_prepositions: BTreeSet<String>,
    /// Dative determiner to its genitive counterpart.
    pub dative_to_genitive: BTreeMap<String, String>,
    /// Genitive forms that the suffix rule would get wrong.
    pub genitive_nouns: BTreeMap<String, String>,
    /// Determiner forms and a replacement that breaks noun phrase agreement.
    pub agreement_flips: BTreeMap<String, String>,
    pub un_polarity: BTreeMap<String, UnPolarityEntry>,
    /// Both directions of the 3sg/3pl table.
    pub verb_number: BTreeMap<String, String>,
    pub noun_stoplist: BTreeSet<String>,
    pub plural_nouns: BTreeSet<String>,
    pub singular_nouns: BTreeSet<String>,
}

fn entries(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn word_set(text: &str) -> BTreeSet<String> {
    entries(text).map(|(_, l)| l.to_string()).collect()
}

fn mapping(file: &str, text: &str) -> Result<BTreeMap<String, String>, PerturbError> {
    entries(text)
        .map(|(line, l)| {
            let mut cols = l.split('\t').map(str::trim).filter(|c| !c.is_empty());
            match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), None) => Ok((a.to_string(), b.to_string())),
                _ => Err(PerturbError::Resource {
                    file: file.to_string(),
                    line,
                    message: "expected two tab-separated columns".into(),
                }),
            }
        })
        .collect()
}

fn un_entries(text: &str) -> Result<BTreeMap<String, UnPolarityEntry>, PerturbError> {
    entries(text)
        .map(|(line, word)| {
            let rest = word
                .strip_prefix("un")
                .or_else(|| word.strip_prefix("Un"))
                .filter(|r| !r.is_empty())
                .ok_or_else(|| PerturbError::Resource {
                    file: UN_POLARITY_FILE.into(),
                    line,
                    message: format!("{word:?} does not start with un-/Un-"),
                })?;
            let base = if word.starts_with('U') {
                capitalize(rest)
            } else {
                rest.to_string()
            };
            Ok((
                word.to_string(),
                UnPolarityEntry {
                    word: word.to_string(),
                    base,
                },
            ))
        })
        .collect()
}

pub(crate) fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

pub(crate) fn decapitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

impl RuleResources {
    /// The tables shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_sources(|name| {
            Ok(BUILTIN
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, text)| text.to_string())
                .expect("builtin table"))
        })
        .expect("builtin resources are valid")
    }

    /// Loads every table from `dir`. All nine files must be present.
    pub fn from_dir(dir: &Path) -> Result<Self, PerturbError> {
        Self::from_sources(|name| {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|source| PerturbError::Io { path, source })
        })
    }

    /// Copies the built-in tables into `dir` so they can be edited.
    pub fn write_builtin(dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, text) in BUILTIN {
            fs::write(dir.join(name), text)?;
        }
        Ok(())
    }

    fn from_sources(
        mut read: impl FnMut(&str) -> Result<String, PerturbError>,
    ) -> Result<Self, PerturbError> {
        let mut verb_number = BTreeMap::new();
        for (sg, pl) in mapping(VERB_NUMBER_FILE, &read(VERB_NUMBER_FILE)?)? {
            verb_number.insert(pl.clone(), sg.clone());
            verb_number.insert(sg, pl);
        }
        let res = RuleResources {
            dative_prepositions: word_set(&read(DATIVE_PREPOSITIONS_FILE)?),
            dative_to_genitive: mapping(DATIVE_TO_GENITIVE_FILE, &read(DATIVE_TO_GENITIVE_FILE)?)?,
            genitive_nouns: mapping(GENITIVE_NOUNS_FILE, &read(GENITIVE_NOUNS_FILE)?)?,
            agreement_flips: mapping(AGREEMENT_FLIPS_FILE, &read(AGREEMENT_FLIPS_FILE)?)?,
            un_polarity: un_entries(&read(UN_POLARITY_FILE)?)?,
            verb_number,
            noun_stoplist: word_set(&read(NOUN_STOPLIST_FILE)?),
            plural_nouns: word_set(&read(PLURAL_NOUNS_FILE)?),
            singular_nouns: word_set(&read(SINGULAR_NOUNS_FILE)?),
        };
        if let Some(missing) = REQUIRED_DATIVE_PREPOSITIONS
            .iter()
            .find(|p| !res.dative_prepositions.contains(**p))
        {
            return Err(PerturbError::Resource {
                file: DATIVE_PREPOSITIONS_FILE.into(),
                line: 0,
                message: format!("required preposition {missing:?} missing"),
            });
        }
        Ok(res)
    }
}
