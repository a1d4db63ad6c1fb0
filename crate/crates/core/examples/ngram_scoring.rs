//! Scores a minimal pair with the built-in n-gram backend.
//!
//! cargo run --example ngram_scoring

use std::sync::Arc;

use minpair::eval::judge_pair;
use minpair::scorer::{conditional_score, train_ngram, NgramBackend, Variant};

fn main() {
    let training = [
        "Die Sonden werden unerwartet schneller .",
        "Die Preise steigen unerwartet schnell .",
        "Das Ergebnis war unerwartet gut .",
        "Die Sonden werden langsamer .",
    ];
    let model = train_ngram(&training, 3, 0.1).expect("non-empty corpus");
    println!("order {}, vocabulary {}", model.order(), model.vocab_size());
    let backend = NgramBackend::new("trigram", Arc::new(model));

    let correct = "Die Sonden werden unerwartet schneller.";
    let contrastive = "Die Sonden werden erwartet schneller.";
    let c = conditional_score(&backend, "demo", Variant::Correct, "", correct).unwrap();
    let x = conditional_score(&backend, "demo", Variant::Contrastive, "", contrastive).unwrap();
    println!("{c:.4}  {correct}");
    println!("{x:.4}  {contrastive}");
    println!("{:?}", judge_pair(c, x).unwrap());
}
