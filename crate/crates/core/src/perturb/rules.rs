use crate::corpus::{tokenize, SentencePair, TokenizedSentence};

use super::ErrorType;
use super::{
    capitalize, decapitalize, select_target_noun, ClauseChoice, MinimalPair, PerturbError, Perturber,
    PhenomenonSpans, RuleResources, TokenSpan,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Negation {
    Kein,
    Nicht,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgreementKind {
    NounPhrase,
    SubjectVerb,
}

const KEIN_FORMS: [(&str, &str); 6] = [
    ("kein", "ein"),
    ("keine", "eine"),
    ("keinen", "einen"),
    ("keinem", "einem"),
    ("keiner", "einer"),
    ("keines", "eines"),
];

/// Forms that can head a plural noun phrase.
const KEIN_NUMBER_AMBIGUOUS: [&str; 3] = ["keine", "keinen", "keiner"];

const PLURAL_SUFFIXES: [&str; 8] = [
    "ungen", "heiten", "keiten", "schaften", "innen", "ionen", "täten", "nisse",
];
const SINGULAR_SUFFIXES: [&str; 8] = ["ung", "heit", "keit", "schaft", "in", "ion", "tät", "nis"];

const SUBJECT_PRONOUNS: [&str; 8] = ["ich", "du", "er", "sie", "es", "wir", "ihr", "man"];

const BOUNDARY_TOKENS: [&str; 9] = [".", "!", "?", ":", "„", "\"", "«", "»", "“"];

const SUBJECT_WINDOW: usize = 3;

fn is_capitalized(tok: &str) -> bool {
    tok.chars().next().is_some_and(|c| c.is_uppercase())
}

fn is_lower_word(tok: &str) -> bool {
    tok.chars().all(|c| c.is_alphabetic()) && tok.chars().next().is_some_and(|c| c.is_lowercase())
}

/// Token `idx` with sentence-initial capitalization undone.
fn folded(t: &TokenizedSentence, idx: usize) -> String {
    if idx == 0 {
        decapitalize(t.token(idx))
    } else {
        t.token(idx).to_string()
    }
}

/// Restores sentence-initial capitalization on a replacement form.
fn refold(t: &TokenizedSentence, idx: usize, form: &str) -> String {
    if idx == 0 && is_capitalized(t.token(0)) {
        capitalize(form)
    } else {
        form.to_string()
    }
}

/// First capitalized token after `from`, reachable through at most `max_gap`
/// lowercase words accepted by `gap_ok`.
fn head_noun(
    t: &TokenizedSentence,
    from: usize,
    max_gap: usize,
    gap_ok: impl Fn(&str) -> bool,
) -> Option<usize> {
    let mut j = from + 1;
    while j < t.len() && j <= from + 1 + max_gap {
        let tok = t.token(j);
        if is_capitalized(tok) {
            return Some(j);
        }
        if !gap_ok(tok) {
            return None;
        }
        j += 1;
    }
    None
}

fn attributive_adjective(tok: &str) -> bool {
    is_lower_word(tok) && ["e", "en", "er", "es", "em"].iter().any(|s| tok.ends_with(s))
}

pub(crate) fn noun_candidates(t: &TokenizedSentence, res: &RuleResources) -> Vec<usize> {
    (1..t.len())
        .filter(|&i| {
            let tok = t.token(i);
            is_capitalized(tok)
                && tok.chars().any(char::is_alphabetic)
                && !res.noun_stoplist.contains(tok)
                && !BOUNDARY_TOKENS.contains(&t.token(i - 1))
        })
        .collect()
}

fn genitive_noun(noun: &str, res: &RuleResources) -> String {
    if let Some(form) = res.genitive_nouns.get(noun) {
        return form.clone();
    }
    if noun.ends_with("nis") {
        format!("{noun}ses")
    } else if ["s", "ß", "x", "z", "sch"].iter().any(|s| noun.ends_with(s)) {
        format!("{noun}es")
    } else {
        format!("{noun}s")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Number {
    Singular,
    Plural,
}

fn noun_number(noun: &str, res: &RuleResources) -> Option<Number> {
    match (res.plural_nouns.contains(noun), res.singular_nouns.contains(noun)) {
        (true, false) => return Some(Number::Plural),
        (false, true) => return Some(Number::Singular),
        (true, true) => return None,
        (false, false) => {}
    }
    if PLURAL_SUFFIXES.iter().any(|s| noun.ends_with(s)) {
        Some(Number::Plural)
    } else if SINGULAR_SUFFIXES.iter().any(|s| noun.ends_with(s)) {
        Some(Number::Singular)
    } else {
        None
    }
}

struct Edit {
    contrastive: String,
    correct_span: TokenSpan,
    contrastive_span: TokenSpan,
}

impl Edit {
    fn in_place(contrastive: String, span: TokenSpan) -> Self {
        Edit {
            contrastive,
            correct_span: span,
            contrastive_span: span,
        }
    }

    fn deletion(contrastive: String, start: usize, end: usize) -> Self {
        Edit {
            contrastive,
            correct_span: TokenSpan::new(start, end),
            contrastive_span: TokenSpan::new(start, start),
        }
    }

    fn into_pair(self, pair: &SentencePair, error_type: ErrorType) -> MinimalPair {
        MinimalPair {
            id: pair.id.clone(),
            error_type,
            source: pair.source.clone(),
            correct: pair.target.clone(),
            contrastive: self.contrastive,
            phenomenon_spans: PhenomenonSpans::single(self.correct_span, self.contrastive_span),
            ref_origin: pair.origin.clone(),
        }
    }
}

fn target_tokens(pair: &SentencePair) -> Result<TokenizedSentence, PerturbError> {
    tokenize(&pair.target).map_err(|_| PerturbError::EmptyTarget)
}

impl Perturber<'_> {
    pub fn noun_candidates(&self, tokens: &TokenizedSentence) -> Vec<usize> {
        noun_candidates(tokens, self.resources)
    }

    /// Replaces a seeded-random candidate noun with "Ding".
    pub fn placeholder_ding(&self, pair: &SentencePair, seed: u64) -> Result<MinimalPair, PerturbError> {
        let t = target_tokens(pair)?;
        let idx = select_target_noun(&t, seed, self.resources)?;
        Ok(ding_edit(&t, idx).into_pair(pair, ErrorType::PlaceholderDing))
    }

    /// Replaces the token at `idx`, which must be a candidate noun.
    pub fn placeholder_ding_at(&self, pair: &SentencePair, idx: usize) -> Result<MinimalPair, PerturbError> {
        let t = target_tokens(pair)?;
        if !noun_candidates(&t, self.resources).contains(&idx) {
            return Err(PerturbError::NoCandidateNoun);
        }
        Ok(ding_edit(&t, idx).into_pair(pair, ErrorType::PlaceholderDing))
    }

    /// Turns the dative after a dative preposition into a genitive:
    /// `seit dem Tag` becomes `seit des Tags`.
    pub fn hypercorrect_genitive(&self, pair: &SentencePair) -> Result<MinimalPair, PerturbError> {
        let t = target_tokens(pair)?;
        let res = self.resources;
        for i in 0..t.len().saturating_sub(2) {
            if !res.dative_prepositions.contains(&folded(&t, i)) {
                continue;
            }
            let Some(gen_det) = res.dative_to_genitive.get(t.token(i + 1)) else {
                continue;
            };
            let Some(noun) = head_noun(&t, i + 1, 2, |w| is_lower_word(w) && w.ends_with("en")) else {
                continue;
            };
            let gen_noun = genitive_noun(t.token(noun), res);
            let contrastive = t.with_replacements(&[(i + 1, gen_det.clone()), (noun, gen_noun)]);
            let span = TokenSpan::new(i + 1, noun + 1);
            return Ok(Edit::in_place(contrastive, span).into_pair(pair, ErrorType::HypercorrectGenitive));
        }
        Err(PerturbError::NoEligiblePhrase)
    }

    /// Deletes the un- prefix of the first lexicon word.
    pub fn polarity_affix(&self, pair: &SentencePair) -> Result<MinimalPair, PerturbError> {
        let t = target_tokens(pair)?;
        for i in 0..t.len() {
            if let Some(base) = self.un_base(&t, i) {
                let contrastive = t.with_replaced(i, &base);
                let span = TokenSpan::new(i, i + 1);
                return Ok(Edit::in_place(contrastive, span).into_pair(pair, ErrorType::PolarityAffixDel));
            }
        }
        Err(PerturbError::NoEligibleToken)
    }

    /// Base form for token `i` if it is a lexicon un-word, possibly with an
    /// inflection suffix.
    pub(crate) fn un_base(&self, t: &TokenizedSentence, i: usize) -> Option<String> {
        let lexicon = &self.resources.un_polarity;
        let surface = t.token(i);
        let mut forms = vec![surface.to_string()];
        if i == 0 {
            forms.push(decapitalize(surface));
        }
        for form in forms {
            for suffix in ["", "e", "en", "er", "es", "em", "s"] {
                let Some(stem) = form.strip_suffix(suffix) else {
                    continue;
                };
                if let Some(entry) = lexicon.get(stem) {
                    return Some(refold(t, i, &format!("{}{suffix}", entry.base)));
                }
            }
        }
        None
    }

    /// Removes a negation: `nicht` is deleted; `kein-` becomes `ein-`, or is
    /// deleted when it heads a plural noun.
    pub fn negation_particle(
        &self,
        pair: &SentencePair,
        lexeme: Negation,
    ) -> Result<MinimalPair, PerturbError> {
        let t = target_tokens(pair)?;
        let (error_type, edit) = match lexeme {
            Negation::Nicht => (ErrorType::PolarityParticleNichtDel, self.nicht_edit(&t)),
            Negation::Kein => (ErrorType::PolarityParticleKeinDel, self.kein_edit(&t)),
        };
        edit.map(|e| e.into_pair(pair, error_type))
            .ok_or(PerturbError::NoEligibleToken)
    }

    fn nicht_edit(&self, t: &TokenizedSentence) -> Option<Edit> {
        let i = (0..t.len()).find(|&i| t.token(i) == "nicht")?;
        Some(Edit::deletion(t.with_deleted(i), i, i + 1))
    }

    fn kein_edit(&self, t: &TokenizedSentence) -> Option<Edit> {
        for i in 0..t.len() {
            let form = folded(t, i);
            let Some((_, ein)) = KEIN_FORMS.iter().find(|(k, _)| *k == form) else {
                continue;
            };
            let number = if KEIN_NUMBER_AMBIGUOUS.contains(&form.as_str()) {
                let Some(noun) = head_noun(t, i, 2, attributive_adjective) else {
                    continue;
                };
                match noun_number(t.token(noun), self.resources) {
                    Some(n) => n,
                    None => continue,
                }
            } else {
                Number::Singular
            };
            return Some(match number {
                Number::Plural => Edit::deletion(t.with_deleted(i), i, i + 1),
                Number::Singular => {
                    Edit::in_place(t.with_replaced(i, &refold(t, i, ein)), TokenSpan::new(i, i + 1))
                }
            });
        }
        None
    }

    /// Deletes one clause: the last by default, or the configured index.
    pub fn clause_omission(&self, pair: &SentencePair) -> Result<MinimalPair, PerturbError> {
        let text = &pair.target;
        let t = target_tokens(pair)?;
        let clauses = self.segmenter.clause_spans(text);
        if clauses.len() < 2 {
            return Err(PerturbError::SingleClause);
        }
        let k = match self.clause_choice {
            ClauseChoice::Last => clauses.len() - 1,
            ClauseChoice::Index(k) if k < clauses.len() => k,
            ClauseChoice::Index(_) => return Err(PerturbError::SingleClause),
        };
        let contrastive = if k + 1 == clauses.len() {
            text[..clauses[k].start].trim_end().to_string()
        } else {
            format!("{}{}", &text[..clauses[k].start], &text[clauses[k + 1].start..])
        };
        let first = t
            .token_at_byte(clauses[k].start)
            .ok_or(PerturbError::SingleClause)?;
        let last = match clauses.get(k + 1) {
            Some(next) => t.token_at_byte(next.start).ok_or(PerturbError::SingleClause)?,
            None => t.len(),
        };
        Ok(Edit::deletion(contrastive, first, last).into_pair(pair, ErrorType::ClauseOmission))
    }

    /// Breaks agreement by flipping one form: a determiner before its noun,
    /// or the number of a finite verb next to its subject.
    pub fn agreement(&self, pair: &SentencePair, kind: AgreementKind) -> Result<MinimalPair, PerturbError> {
        let t = target_tokens(pair)?;
        let (error_type, edit) = match kind {
            AgreementKind::NounPhrase => (ErrorType::NpAgreement, self.np_edit(&t)),
            AgreementKind::SubjectVerb => (ErrorType::SubjVerbAgreement, self.subj_verb_edit(&t)),
        };
        edit.map(|e| e.into_pair(pair, error_type))
            .ok_or(PerturbError::NoEligibleSite)
    }

    fn np_edit(&self, t: &TokenizedSentence) -> Option<Edit> {
        for i in 0..t.len() {
            let Some(flip) = self.resources.agreement_flips.get(&folded(t, i)) else {
                continue;
            };
            let Some(noun) = head_noun(t, i, 2, attributive_adjective) else {
                continue;
            };
            let contrastive = t.with_replaced(i, &refold(t, i, flip));
            return Some(Edit::in_place(contrastive, TokenSpan::new(i, noun + 1)));
        }
        None
    }

    fn subj_verb_edit(&self, t: &TokenizedSentence) -> Option<Edit> {
        for i in 0..t.len() {
            let Some(flip) = self.resources.verb_number.get(&folded(t, i)) else {
                continue;
            };
            let lo = i.saturating_sub(SUBJECT_WINDOW);
            let hi = (i + SUBJECT_WINDOW).min(t.len() - 1);
            let has_subject = (lo..=hi).filter(|&j| j != i).any(|j| {
                let tok = t.token(j);
                (is_capitalized(tok) && tok.chars().any(char::is_alphabetic))
                    || SUBJECT_PRONOUNS.contains(&tok)
            });
            if !has_subject {
                continue;
            }
            let contrastive = t.with_replaced(i, &refold(t, i, flip));
            return Some(Edit::in_place(contrastive, TokenSpan::new(i, i + 1)));
        }
        None
    }
}

fn ding_edit(t: &TokenizedSentence, idx: usize) -> Edit {
    Edit::in_place(t.with_replaced(idx, "Ding"), TokenSpan::new(idx, idx + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Origin;
    use crate::perturb::is_minimal;

    fn pair(target: &str) -> SentencePair {
        SentencePair {
            id: "t:1".into(),
            source: "src".into(),
            target: target.into(),
            origin: Origin::Human,
            dataset_tag: "t".into(),
        }
    }

    fn with<R>(f: impl FnOnce(&Perturber) -> R) -> R {
        let res = RuleResources::builtin();
        f(&Perturber::new(&res))
    }

    #[test]
    fn noun_candidates_by_capitalization() {
        let t = tokenize("Die Prager Börse stürzt gegen Geschäftsschluss ins Minus.").unwrap();
        let cands: Vec<_> = with(|p| p.noun_candidates(&t))
            .into_iter()
            .map(|i| t.token(i).to_string())
            .collect();
        assert_eq!(cands, ["Prager", "Börse", "Geschäftsschluss", "Minus"]);
    }

    #[test]
    fn no_candidates_in_lowercase_sentence() {
        let t = tokenize("die katze schläft").unwrap();
        let res = RuleResources::builtin();
        assert!(matches!(
            select_target_noun(&t, 1, &res),
            Err(PerturbError::NoCandidateNoun)
        ));
    }

    #[test]
    fn candidates_skip_sentence_starts_and_stoplist() {
        let t = tokenize("Er kam. Dann sah Sie den Hund.").unwrap();
        let cands: Vec<_> = with(|p| p.noun_candidates(&t))
            .into_iter()
            .map(|i| t.token(i).to_string())
            .collect();
        assert_eq!(cands, ["Hund"]);
    }

    #[test]
    fn selection_is_deterministic() {
        let res = RuleResources::builtin();
        let t = tokenize("Die Prager Börse stürzt gegen Geschäftsschluss ins Minus.").unwrap();
        let first = select_target_noun(&t, 42, &res).unwrap();
        for _ in 0..100 {
            assert_eq!(select_target_noun(&t, 42, &res).unwrap(), first);
        }
    }

    #[test]
    fn singleton_candidate_always_chosen() {
        let res = RuleResources::builtin();
        let t = tokenize("wir sahen den Hund gestern.").unwrap();
        for seed in 0..50 {
            assert_eq!(select_target_noun(&t, seed, &res).unwrap(), 3);
        }
    }

    #[test]
    fn ding_at_chosen_noun() {
        let mp = with(|p| {
            p.placeholder_ding_at(
                &pair("Die Prager Börse stürzt gegen Geschäftsschluss ins Minus."),
                5,
            )
        })
        .unwrap();
        assert_eq!(mp.contrastive, "Die Prager Börse stürzt gegen Ding ins Minus.");
        assert!(is_minimal(&mp));

        let mp = with(|p| {
            p.placeholder_ding_at(
                &pair("Gestern Abend wollte der Ausschuss über die Ernennung abstimmen."),
                7,
            )
        })
        .unwrap();
        assert_eq!(
            mp.contrastive,
            "Gestern Abend wollte der Ausschuss über die Ding abstimmen."
        );
    }

    #[test]
    fn genitive_examples() {
        let mp =
            with(|p| p.hypercorrect_genitive(&pair("Ich liebe dich seit dem Tag im Rosengarten."))).unwrap();
        assert_eq!(mp.contrastive, "Ich liebe dich seit des Tags im Rosengarten.");
        assert_eq!(mp.phenomenon_spans.correct, [TokenSpan::new(4, 6)]);
        assert!(is_minimal(&mp));

        let mp = with(|p| p.hypercorrect_genitive(&pair("Warum verlor Juda sein Land mitsamt dem Tempel?")))
            .unwrap();
        assert_eq!(mp.contrastive, "Warum verlor Juda sein Land mitsamt des Tempels?");
    }

    #[test]
    fn genitive_inflection_rules() {
        let res = RuleResources::builtin();
        assert_eq!(genitive_noun("Haus", &res), "Hauses");
        assert_eq!(genitive_noun("Fisch", &res), "Fisches");
        assert_eq!(genitive_noun("Ergebnis", &res), "Ergebnisses");
        assert_eq!(genitive_noun("Vertrag", &res), "Vertrags");
        assert_eq!(genitive_noun("Menschen", &res), "Menschen");
    }

    #[test]
    fn genitive_through_adjective() {
        let mp = with(|p| p.hypercorrect_genitive(&pair("Er wohnt seit dem letzten Sommer hier."))).unwrap();
        assert_eq!(mp.contrastive, "Er wohnt seit des letzten Sommers hier.");
        assert_eq!(mp.phenomenon_spans.correct, [TokenSpan::new(3, 6)]);
    }

    #[test]
    fn genitive_skips_feminine() {
        assert!(matches!(
            with(|p| p.hypercorrect_genitive(&pair("Er ist seit der Woche krank."))),
            Err(PerturbError::NoEligiblePhrase)
        ));
    }

    #[test]
    fn polarity_affix_examples() {
        let mp = with(|p| p.polarity_affix(&pair("Die Sonden werden unerwartet schneller oder langsamer.")))
            .unwrap();
        assert_eq!(
            mp.contrastive,
            "Die Sonden werden erwartet schneller oder langsamer."
        );

        let mp = with(|p| p.polarity_affix(&pair("Das Unglück kam schnell."))).unwrap();
        assert_eq!(mp.contrastive, "Das Glück kam schnell.");

        let mp = with(|p| p.polarity_affix(&pair("Unerwartete Gäste kamen."))).unwrap();
        assert_eq!(mp.contrastive, "Erwartete Gäste kamen.");

        assert!(matches!(
            with(|p| p.polarity_affix(&pair("Er und sie."))),
            Err(PerturbError::NoEligibleToken)
        ));
    }

    #[test]
    fn negation_examples() {
        let nicht = with(|p| p.negation_particle(&pair("Das ist nicht gut."), Negation::Nicht)).unwrap();
        assert_eq!(nicht.contrastive, "Das ist gut.");
        assert!(is_minimal(&nicht));

        let kein = with(|p| p.negation_particle(&pair("Er hat kein Auto."), Negation::Kein)).unwrap();
        assert_eq!(kein.contrastive, "Er hat ein Auto.");

        let plural = with(|p| p.negation_particle(&pair("Sie hat keine Kinder."), Negation::Kein)).unwrap();
        assert_eq!(plural.contrastive, "Sie hat Kinder.");
        assert!(is_minimal(&plural));

        let fem = with(|p| p.negation_particle(&pair("Sie hat keine Ahnung."), Negation::Kein)).unwrap();
        assert_eq!(fem.contrastive, "Sie hat eine Ahnung.");

        assert!(matches!(
            with(|p| p.negation_particle(&pair("Es gibt keine Zweifel."), Negation::Kein)),
            Err(PerturbError::NoEligibleToken)
        ));
        assert!(matches!(
            with(|p| p.negation_particle(&pair("Das ist gut."), Negation::Nicht)),
            Err(PerturbError::NoEligibleToken)
        ));
    }

    #[test]
    fn clause_omission_examples() {
        let text = "Und selbst wenn man das für den Menschen beweisen könnte: Wie wollte man es bei Ratten nachweisen?";
        let mp = with(|p| p.clause_omission(&pair(text))).unwrap();
        assert_eq!(
            mp.contrastive,
            "Und selbst wenn man das für den Menschen beweisen könnte:"
        );
        assert!(text.starts_with(&mp.contrastive));
        assert!(is_minimal(&mp));

        assert!(matches!(
            with(|p| p.clause_omission(&pair("Hallo Welt."))),
            Err(PerturbError::SingleClause)
        ));
    }

    #[test]
    fn clause_omission_by_index() {
        let res = RuleResources::builtin();
        let p = Perturber::new(&res).with_clause_choice(ClauseChoice::Index(1));
        let mp = p
            .clause_omission(&pair("Er kam. Sie ging. Alle lachten."))
            .unwrap();
        assert_eq!(mp.contrastive, "Er kam. Alle lachten.");
        assert_eq!(mp.phenomenon_spans.correct, [TokenSpan::new(3, 6)]);
        assert!(is_minimal(&mp));
    }

    #[test]
    fn agreement_examples() {
        let sv = with(|p| {
            p.agreement(
                &pair("Die Sonden werden unerwartet schneller."),
                AgreementKind::SubjectVerb,
            )
        })
        .unwrap();
        assert_eq!(sv.contrastive, "Die Sonden wird unerwartet schneller.");

        let np = with(|p| p.agreement(&pair("über die Ernennung"), AgreementKind::NounPhrase)).unwrap();
        assert_eq!(np.contrastive, "über der Ernennung");
        assert!(is_minimal(&np));

        assert!(matches!(
            with(|p| p.agreement(&pair("Der Hund schläft."), AgreementKind::SubjectVerb)),
            Err(PerturbError::NoEligibleSite)
        ));
    }

    #[test]
    fn sentence_initial_verb_keeps_capital() {
        let sv = with(|p| p.agreement(&pair("Ist Peter da?"), AgreementKind::SubjectVerb)).unwrap();
        assert_eq!(sv.contrastive, "Sind Peter da?");
    }
}
