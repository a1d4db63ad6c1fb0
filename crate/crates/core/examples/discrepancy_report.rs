//! Accuracy, discrepancy and the rendered report for two runs of one
//! system, from a hand-written score table.
//!
//! cargo run --example discrepancy_report

use std::collections::HashMap;

use minpair::corpus::{tokenize, Origin};
use minpair::eval::{evaluate_testset, render_report, BackendInput, ReportFormat, TiePolicy};
use minpair::perturb::{ErrorType, MinimalPair, PhenomenonSpans, TokenSpan};
use minpair::scorer::{ScoreTableRow, TableBackend, TokenLogProbs, Variant};

/// Every position gets `score`, so the normalized score is `score`.
fn row(id: &str, variant: Variant, text: &str, score: f64) -> ScoreTableRow {
    let n = tokenize(text).unwrap().len() + 1;
    ScoreTableRow {
        pair_id: id.into(),
        variant,
        logprobs: TokenLogProbs::new(vec![score; n]).unwrap(),
    }
}

fn main() {
    let onebest = "Gestern Abend wollte der Ausschuss über die Ernennung abstimmen.";
    let correct = "Gestern Abend wollte das Gremium über die Personalie abstimmen.";
    let contrastive = "Gestern Abend wollte das Gremium über die Ding abstimmen.";
    let pair = MinimalPair {
        id: "demo:1".into(),
        error_type: ErrorType::PlaceholderDing,
        source: "Yesterday evening, the committee wanted to vote on the appointment.".into(),
        correct: correct.into(),
        contrastive: contrastive.into(),
        phenomenon_spans: PhenomenonSpans::single(TokenSpan::new(7, 8), TokenSpan::new(7, 8)),
        ref_origin: Origin::Human,
    };
    let run = |name: &str, shift: f64| {
        TableBackend::new(
            name,
            vec![
                row("demo:1", Variant::Onebest, onebest, -0.09 - shift),
                row("demo:1", Variant::Correct, correct, -3.61 - shift),
                row("demo:1", Variant::Contrastive, contrastive, -2.34),
            ],
        )
    };
    let (a, b) = (run("transformer/run1", 0.0), run("transformer/run2", 0.2));
    let best: HashMap<String, String> = [("demo:1".to_string(), onebest.to_string())].into();
    let backends: Vec<BackendInput> = vec![(&a, Some(&best)), (&b, Some(&best))];
    let report = evaluate_testset(&backends, &[pair], TiePolicy::Against).unwrap();
    for r in &report.results {
        println!(
            "{}: accuracy {:.1}, discrepancy {:.4}",
            r.backend,
            r.accuracy,
            r.discrepancy.unwrap()
        );
    }
    print!("{}", render_report(&[report], ReportFormat::Markdown).unwrap());
}
