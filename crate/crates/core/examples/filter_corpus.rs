//! Length and ratio filtering of a small parallel corpus.
//!
//! cargo run --example filter_corpus

use minpair::corpus::{filter_pairs, FilterConfig, Origin, SentencePair};

fn pair(id: &str, source: &str, target: &str) -> SentencePair {
    SentencePair {
        id: id.into(),
        source: source.into(),
        target: target.into(),
        origin: Origin::Human,
        dataset_tag: "demo".into(),
    }
}

fn main() {
    let long = vec!["Wort"; 260].join(" ");
    let pairs = vec![
        pair("demo:1", "The house is small.", "Das Haus ist klein."),
        pair(
            "demo:2",
            "Yes.",
            "Ja, das ist wirklich eine ganz ausgezeichnete Idee.",
        ),
        pair("demo:3", &long, &long),
        pair("demo:4", "   ", "Leer."),
    ];
    let outcome = filter_pairs(pairs, &FilterConfig::default());
    for p in &outcome.kept {
        println!("kept    {}", p.id);
    }
    for (reason, n) in &outcome.removed {
        println!("removed {n} for {reason:?}");
    }
}
