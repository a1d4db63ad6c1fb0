//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use minpair::corpus::{Origin, SentencePair};
use minpair::perturb::{ErrorType, MinimalPair, PhenomenonSpans, TokenSpan};
use minpair::scorer::{ScoreTableRow, TableBackend, TokenLogProbs, Variant};

pub const ENGINE: &str = "fixture-mt";

pub fn pair(id: &str, target: &str, origin: Origin) -> SentencePair {
    SentencePair {
        id: id.to_string(),
        source: format!("source of {id}"),
        target: target.to_string(),
        origin,
        dataset_tag: "fixture".to_string(),
    }
}

pub fn human(id: &str, target: &str) -> SentencePair {
    pair(id, target, Origin::Human)
}

pub fn machine(id: &str, target: &str) -> SentencePair {
    pair(id, target, Origin::Machine(ENGINE.to_string()))
}

/// Sentence cores with a `{}` slot, one list per rule, and the slot fillers.
fn cores(et: ErrorType) -> (&'static str, [&'static str; 5]) {
    match et {
        ErrorType::PlaceholderDing => (
            "stürzt die Prager Börse gegen {} ins Minus.",
            [
                "Geschäftsschluss",
                "Mittag",
                "Handelsende",
                "Wochenende",
                "Monatsende",
            ],
        ),
        ErrorType::HypercorrectGenitive => (
            "liebe ich dich seit dem {} im Rosengarten.",
            ["Tag", "Sommer", "Winter", "Abend", "Frühling"],
        ),
        ErrorType::PolarityAffixDel => (
            "werden die Sonden {} schneller oder langsamer.",
            [
                "unerwartet",
                "unglaublich",
                "ungewöhnlich",
                "unnötig",
                "unbegrenzt",
            ],
        ),
        ErrorType::PolarityParticleKeinDel => (
            "hat er kein {} gekauft.",
            ["Auto", "Haus", "Fahrrad", "Boot", "Pferd"],
        ),
        ErrorType::PolarityParticleNichtDel => (
            "ist das {} nicht gut.",
            ["Wetter", "Essen", "Ergebnis", "Angebot", "Konzept"],
        ),
        ErrorType::ClauseOmission => (
            "könnte man das beweisen: Wie wollte man es bei {} nachweisen?",
            ["Ratten", "Mäusen", "Affen", "Hunden", "Katzen"],
        ),
        ErrorType::NpAgreement => (
            "sah er den {} im Garten.",
            ["Hund", "Nachbarn", "Vogel", "Gärtner", "Igel"],
        ),
        ErrorType::SubjVerbAgreement => (
            "wird die {} schneller.",
            ["Sonde", "Rakete", "Maschine", "Bahn", "Welle"],
        ),
    }
}

/// Sentence openers that only a human translator would pick.
const HUMAN_OPENERS: [&str; 5] = ["Indessen", "Gleichwohl", "Mithin", "Freilich", "Wohlgemerkt"];
/// What the translation engine produces in the same place.
const MACHINE_OPENERS: [&str; 5] = ["Aber", "Jedoch", "Dennoch", "Trotzdem", "Außerdem"];

/// Human references, machine references for the same sources, and the
/// 1-best output of the scored system (identical to the machine reference).
pub struct OrderingSuite {
    pub human: Vec<SentencePair>,
    pub machine: Vec<SentencePair>,
    pub onebest: HashMap<String, String>,
}

pub fn ordering_suite() -> OrderingSuite {
    let mut suite = OrderingSuite {
        human: Vec::new(),
        machine: Vec::new(),
        onebest: HashMap::new(),
    };
    for et in ErrorType::ALL {
        let (core, fillers) = cores(et);
        for (i, filler) in fillers.iter().enumerate() {
            for j in 0..HUMAN_OPENERS.len() {
                let id = format!("{et}:{i}{j}");
                let body = core.replace("{}", filler);
                let h = format!("{} {body}", HUMAN_OPENERS[j]);
                let m = format!("{} {body}", MACHINE_OPENERS[(i + j) % MACHINE_OPENERS.len()]);
                suite.human.push(human(&id, &h));
                suite.onebest.insert(id.clone(), m.clone());
                suite.machine.push(machine(&id, &m));
            }
        }
    }
    suite
}

/// Per-token log-probabilities whose mean over tokens and end-of-sequence
/// is exactly `score`.
pub fn flat_logprobs(text: &str, score: f64) -> TokenLogProbs {
    let n = minpair::corpus::tokenize(text).unwrap().len();
    TokenLogProbs::new(vec![score; n + 1]).unwrap()
}

/// Score table and pairs for the two worked discrepancy examples.
pub fn worked_examples() -> (Vec<MinimalPair>, TableBackend, HashMap<String, String>) {
    let rows = [
        (
            "ex:1",
            "Yesterday evening, the committee wanted to vote on the appointment.",
            "Gestern Abend wollte der Ausschuss über die Ernennung abstimmen.",
            -0.09,
            "Gestern Abend wollte das Gremium über die Personalie abstimmen.",
            -3.61,
            "Gestern Abend wollte das Gremium über die Ding abstimmen.",
            -2.34,
            ErrorType::PlaceholderDing,
        ),
        (
            "ex:2",
            "Why did Judah lose his land along with the temple?",
            "Warum hat Juda sein Land und seinen Tempel verloren?",
            -0.11,
            "Warum verlor Juda sein Land mitsamt dem Tempel?",
            -2.58,
            "Warum verlor Juda sein Land mitsamt des Tempels?",
            -2.55,
            ErrorType::HypercorrectGenitive,
        ),
    ];
    let mut pairs = Vec::new();
    let mut table = Vec::new();
    let mut onebest = HashMap::new();
    for (id, src, best, s_best, correct, s_c, contrastive, s_x, et) in rows {
        pairs.push(MinimalPair {
            id: id.to_string(),
            error_type: et,
            source: src.to_string(),
            correct: correct.to_string(),
            contrastive: contrastive.to_string(),
            phenomenon_spans: PhenomenonSpans::single(TokenSpan::new(0, 1), TokenSpan::new(0, 1)),
            ref_origin: Origin::Human,
        });
        onebest.insert(id.to_string(), best.to_string());
        for (variant, text, score) in [
            (Variant::Correct, correct, s_c),
            (Variant::Contrastive, contrastive, s_x),
            (Variant::Onebest, best, s_best),
        ] {
            table.push(ScoreTableRow {
                pair_id: id.to_string(),
                variant,
                logprobs: flat_logprobs(text, score),
            });
        }
    }
    (pairs, TableBackend::new("worked/run1", table), onebest)
}
