//! Classifies machine references, resolves the review queue and builds
//! the machine-reference test set.
//!
//! cargo run --example validate_review

use minpair::corpus::{Origin, SentencePair};
use minpair::perturb::{ErrorType, Perturber, RuleResources};
use minpair::validate::{build_machine_testset, validate_candidates, Decision, RecordStore, Status};

fn pair(id: &str, target: &str, origin: Origin) -> SentencePair {
    SentencePair {
        id: id.into(),
        source: "The probes unexpectedly become faster or slower.".into(),
        target: target.into(),
        origin,
        dataset_tag: "demo".into(),
    }
}

fn main() {
    let resources = RuleResources::builtin();
    let perturber = Perturber::new(&resources);
    let engine = Origin::Machine("demo-mt".into());
    let human_ref = "Die Sonden werden unerwartet schneller oder langsamer.";
    let human: Vec<_> = (1..=3)
        .map(|i| pair(&format!("demo:{i}"), human_ref, Origin::Human))
        .collect();
    let machine = vec![
        pair(
            "demo:1",
            "Die Sonden werden unerwartet schneller oder langsamer.",
            engine.clone(),
        ),
        pair(
            "demo:2",
            "Die Sonden werden erwartet schneller oder langsamer.",
            engine.clone(),
        ),
        pair(
            "demo:3",
            "Die Sonden beschleunigen oder bremsen plötzlich.",
            engine,
        ),
    ];
    let human_set = perturber.build(&human, ErrorType::PolarityAffixDel, 0).pairs;
    let records = validate_candidates(&human_set, &machine, &resources)
        .unwrap()
        .records;

    let dir = tempfile::tempdir().unwrap();
    let mut store = RecordStore::create(dir.path(), records).unwrap();
    for r in store.records() {
        println!("{:<28} {}", r.id, r.status);
    }
    let pending: Vec<_> = store.queue(None, 10).items;
    for item in pending {
        let fixed = item.machine_reference.replace("erwartet", "unerwartet");
        let applied = store
            .submit(&item.id, &Decision::mark_contrastive(fixed), item.version, "demo")
            .unwrap();
        println!(
            "{:<28} {} (v{})",
            applied.record.id, applied.record.status, applied.record.version
        );
    }

    // Reopening replays the decision log.
    let store = RecordStore::open(dir.path()).unwrap();
    assert_eq!(store.stats().count(Status::NeedsReview), 0);
    let out = build_machine_testset(store.records(), &perturber, 0, false).unwrap();
    for p in &out.pairs {
        println!("{}: {}  /  {}", p.id, p.correct, p.contrastive);
    }
}
