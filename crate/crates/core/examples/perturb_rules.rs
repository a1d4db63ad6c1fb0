//! Applies every perturbation rule to a few German references.
//!
//! cargo run --example perturb_rules

use minpair::corpus::{Origin, SentencePair};
use minpair::perturb::{ErrorType, Perturber, RuleResources};

fn main() {
    let resources = RuleResources::builtin();
    let perturber = Perturber::new(&resources);
    let references = [
        "Die Prager Börse stürzt gegen Geschäftsschluss ins Minus.",
        "Ich liebe dich seit dem Tag im Rosengarten.",
        "Die Sonden werden unerwartet schneller oder langsamer.",
        "Er hat kein Auto, und das ist nicht gut.",
        "Und selbst wenn man das für den Menschen beweisen könnte: Wie wollte man es bei Ratten nachweisen?",
    ];
    for (i, target) in references.iter().enumerate() {
        let pair = SentencePair {
            id: format!("demo:{i}"),
            source: String::new(),
            target: target.to_string(),
            origin: Origin::Human,
            dataset_tag: "demo".into(),
        };
        println!("{target}");
        for et in ErrorType::ALL {
            match perturber.apply(&pair, et, 0) {
                Ok(mp) => println!("  {et:<28} {}", mp.contrastive),
                Err(e) => println!("  {et:<28} ({})", e.skip_reason().unwrap_or("error")),
            }
        }
    }
}
