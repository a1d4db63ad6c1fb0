//! Acceptance checks, one PASS/FAIL line each. Run with
//! `cargo test --test acceptance`.

mod common;

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use minpair::config::RunConfig;
use minpair::corpus::{filter_pairs, FilterConfig, Origin, RemovalReason, SentencePair};
use minpair::eval::{
    discrepancy, evaluate_testset, judge_pair, score_testset, DiscrepancyInput, TestsetType, TiePolicy,
    Verdict,
};
use minpair::perturb::{ErrorType, MinimalPair, Perturber, RuleResources};
use minpair::pipeline::{self, Command};
use minpair::scorer::{
    normalized_score, sequence_score, train_ngram, ExternalBackend, NgramBackend, ScoreRequest,
    ScoreTableRow, ScorerBackend, ScorerError, TableBackend, TokenLogProbs, Transport, Variant,
};
use minpair::validate::{
    build_machine_testset, classify_candidate, validate_candidates, Decision, RecordStore, Status,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(), String>;
type NamedCheck = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(got: f64, want: f64, tol: f64, what: &str) -> Check {
    ensure((got - want).abs() <= tol, || {
        format!("{what}: got {got}, want {want} ±{tol:e}")
    })
}

fn rule_fixtures() -> Check {
    let started = Instant::now();
    let res = RuleResources::builtin();
    let p = Perturber::new(&res);
    // Seeds are frozen so that the placeholder lands on the noun of the
    // worked example.
    let cases = [
        (
            "ding:1",
            "Die Prager Börse stürzt gegen Geschäftsschluss ins Minus.",
            ErrorType::PlaceholderDing,
            2,
            "Die Prager Börse stürzt gegen Ding ins Minus.",
        ),
        (
            "ding:2",
            "Gestern Abend wollte der Ausschuss über die Ernennung abstimmen.",
            ErrorType::PlaceholderDing,
            1,
            "Gestern Abend wollte der Ausschuss über die Ding abstimmen.",
        ),
        (
            "gen:1",
            "Ich liebe dich seit dem Tag im Rosengarten.",
            ErrorType::HypercorrectGenitive,
            0,
            "Ich liebe dich seit des Tags im Rosengarten.",
        ),
        (
            "gen:2",
            "Warum verlor Juda sein Land mitsamt dem Tempel?",
            ErrorType::HypercorrectGenitive,
            0,
            "Warum verlor Juda sein Land mitsamt des Tempels?",
        ),
        (
            "pol:1",
            "Die Sonden werden unerwartet schneller oder langsamer.",
            ErrorType::PolarityAffixDel,
            0,
            "Die Sonden werden erwartet schneller oder langsamer.",
        ),
        (
            "cl:1",
            "Und selbst wenn man das für den Menschen beweisen könnte: Wie wollte man es bei Ratten nachweisen?",
            ErrorType::ClauseOmission,
            0,
            "Und selbst wenn man das für den Menschen beweisen könnte:",
        ),
    ];
    for (id, target, et, seed, want) in cases {
        let sp = common::human(id, target);
        let mp = p.apply(&sp, et, seed).map_err(|e| format!("{id}: {e}"))?;
        ensure(mp.contrastive == want, || {
            format!("{id}: got {:?}, want {want:?}", mp.contrastive)
        })?;
        ensure(mp.correct == target, || format!("{id}: correct side changed"))?;
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))
}

fn scoring() -> Check {
    // Hand-computed: sum = -0.5 - 1.25 - 0.25 = -2.0, mean over 3 positions.
    let mp = MinimalPair {
        id: "s:1".into(),
        error_type: ErrorType::PolarityAffixDel,
        source: "x".into(),
        correct: "a b".into(),
        contrastive: "a c".into(),
        phenomenon_spans: minpair::perturb::PhenomenonSpans::single(
            minpair::perturb::TokenSpan::new(1, 2),
            minpair::perturb::TokenSpan::new(1, 2),
        ),
        ref_origin: Origin::Human,
    };
    let lp = |v: Vec<f64>| TokenLogProbs::new(v).unwrap();
    let table = TableBackend::new(
        "t",
        vec![
            ScoreTableRow {
                pair_id: "s:1".into(),
                variant: Variant::Correct,
                logprobs: lp(vec![-0.5, -1.25, -0.25]),
            },
            ScoreTableRow {
                pair_id: "s:1".into(),
                variant: Variant::Contrastive,
                logprobs: lp(vec![-0.5, -4.0, -0.3]),
            },
        ],
    );
    let req = ScoreRequest::new("s:1", Variant::Correct, "x", "a b").unwrap();
    let got = table.token_logprobs(&req).map_err(|e| e.to_string())?;
    close(sequence_score(&got), -2.0, 1e-9, "sequence score")?;
    close(normalized_score(&got), -2.0 / 3.0, 1e-9, "normalized score")?;
    let scores = score_testset(&table, &[mp], None).map_err(|e| e.to_string())?;
    close(scores[0].correct, -2.0 / 3.0, 1e-9, "correct")?;
    close(scores[0].contrastive, -4.8 / 3.0, 1e-9, "contrastive")?;

    // Bigram, add-one: count(a b) = 1, count(a) = 1, |V| = {a, b, UNK, EOS}.
    let model = train_ngram(&["a b"], 2, 1.0).map_err(|e| e.to_string())?;
    let p = model.prob(&["a".to_string()], "b");
    close(p, 0.4, 1e-12, "p(b|a)")?;
    close(p.ln(), 0.4f64.ln(), 1e-12, "log p(b|a)")
}

fn discrepancy_fixtures() -> Check {
    let (pairs, table, onebest) = common::worked_examples();
    let scores = score_testset(&table, &pairs, Some(&onebest)).map_err(|e| e.to_string())?;
    let want = [2.25, 2.44];
    for (s, w) in scores.iter().zip(want) {
        let d = discrepancy(&[DiscrepancyInput::new(
            s.onebest.unwrap(),
            s.correct,
            s.contrastive,
        )])
        .map_err(|e| e.to_string())?;
        close(d, w, 1e-6, &s.id)?;
    }
    let v = judge_pair(-3.61, -2.34).map_err(|e| e.to_string())?;
    ensure(v == Verdict::ContrastivePreferred, || format!("verdict {v:?}"))
}

fn ordering_property() -> Check {
    let started = Instant::now();
    let suite = common::ordering_suite();
    let res = RuleResources::builtin();
    let perturber = Perturber::new(&res);
    let training: Vec<&str> = suite.machine.iter().map(|p| p.target.as_str()).collect();
    let model = train_ngram(&training, 3, 0.1).map_err(|e| e.to_string())?;
    let backend = NgramBackend::new("ngram/run1", std::sync::Arc::new(model));
    let mut tested = 0;
    for et in ErrorType::ALL {
        let human_pairs: Vec<SentencePair> = suite
            .human
            .iter()
            .filter(|p| p.id.starts_with(&format!("{et}:")))
            .cloned()
            .collect();
        let human = perturber.build(&human_pairs, et, 7).pairs;
        let records = validate_candidates(&human, &suite.machine, &res)
            .map_err(|e| e.to_string())?
            .records;
        let machine = build_machine_testset(&records, &perturber, 7, false)
            .map_err(|e| format!("{et}: {e}"))?
            .pairs;
        ensure(!human.is_empty() && !machine.is_empty(), || {
            format!("{et}: empty test set")
        })?;
        ensure(machine.len() <= human.len(), || {
            format!("{et}: machine set larger than human set")
        })?;
        let mut d = HashMap::new();
        for (set, kind) in [(&human, TestsetType::Human), (&machine, TestsetType::Machine)] {
            let report = evaluate_testset(
                &[(&backend as &dyn ScorerBackend, Some(&suite.onebest))],
                set,
                TiePolicy::Against,
            )
            .map_err(|e| e.to_string())?;
            ensure(report.testset_type == kind, || {
                format!("{et}: wrong test set type")
            })?;
            d.insert(kind, report.discrepancy("ngram").unwrap().mean);
        }
        let (h, m) = (d[&TestsetType::Human], d[&TestsetType::Machine]);
        ensure(m < h, || format!("{et}: machine {m} not below human {h}"))?;
        tested += 1;
    }
    ensure(tested == ErrorType::ALL.len(), || "not every type tested".into())?;
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))
}

fn validation_pipeline() -> Check {
    let res = RuleResources::builtin();
    let perturber = Perturber::new(&res);
    let base = "Die Sonden werden unerwartet schneller oder langsamer.";
    let human_refs: Vec<SentencePair> = (0..10).map(|i| common::human(&format!("v:{i}"), base)).collect();
    let human = perturber.build(&human_refs, ErrorType::PolarityAffixDel, 0).pairs;
    ensure(human.len() == 10, || format!("{} human pairs", human.len()))?;
    let machine_texts = [
        "Die Sonden werden unerwartet schneller oder langsamer.",
        "Die Sonden werden unerwartet schneller oder auch langsamer.",
        "Unerwartet werden die Sonden schneller oder langsamer.",
        "Die Sonden sind unerwartet schneller oder langsamer.",
        "Die Messsonden werden unerwartet schneller oder langsamer.",
        "Die Sonden werden unerwartet rascher oder langsamer.",
        "Die Sonden werden erwartet schneller oder langsamer.",
        "Die Sonden werden wie erwartet schneller oder langsamer.",
        "Die Sonden werden überraschend schneller oder langsamer.",
        "Die Sonden beschleunigen oder verlangsamen sich plötzlich.",
    ];
    let machine: Vec<SentencePair> = machine_texts
        .iter()
        .enumerate()
        .map(|(i, t)| common::machine(&format!("v:{i}"), t))
        .collect();
    let mut counts: HashMap<Status, usize> = HashMap::new();
    for (h, m) in human.iter().zip(&machine) {
        let c = classify_candidate(&m.target, h, &res).map_err(|e| e.to_string())?;
        *counts.entry(c.status).or_default() += 1;
    }
    let want = [
        (Status::AutoAccept, 6),
        (Status::NeedsReview, 2),
        (Status::Dropped, 2),
    ];
    for (s, n) in want {
        let got = counts.get(&s).copied().unwrap_or(0);
        ensure(got == n, || format!("{s}: {got}, want {n}"))?;
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let records = validate_candidates(&human, &machine, &res)
        .map_err(|e| e.to_string())?
        .records;
    let mut store = RecordStore::create(dir.path(), records).map_err(|e| e.to_string())?;
    let pending: Vec<(String, u64, String)> = store
        .records()
        .iter()
        .filter(|r| r.status == Status::NeedsReview)
        .map(|r| {
            (
                r.id.clone(),
                r.version,
                r.machine_reference.replace(" erwartet", " unerwartet"),
            )
        })
        .collect();
    for (id, version, fixed) in pending {
        store
            .submit(&id, &Decision::mark_contrastive(fixed), version, "fixture")
            .map_err(|e| e.to_string())?;
    }
    let store = RecordStore::open(dir.path()).map_err(|e| e.to_string())?;
    let out = build_machine_testset(store.records(), &perturber, 0, false).map_err(|e| e.to_string())?;
    ensure(out.pairs.len() == 8, || {
        format!("{} machine pairs", out.pairs.len())
    })?;
    ensure(out.pairs.len() <= human.len(), || {
        "machine set larger than human set".into()
    })
}

fn corpus_filter() -> Check {
    let long = vec!["Wort"; 251].join(" ");
    let ten = ["w"; 10].join(" ");
    let fifteen = ["w"; 15].join(" ");
    let sixteen = ["w"; 16].join(" ");
    let mut pairs = vec![
        SentencePair {
            source: long.clone(),
            target: long,
            ..common::human("f:long", "")
        },
        SentencePair {
            source: ten.clone(),
            target: sixteen,
            ..common::human("f:ratio", "")
        },
        SentencePair {
            source: ten,
            target: fifteen,
            ..common::human("f:boundary", "")
        },
    ];
    for i in 0..7 {
        pairs.push(SentencePair {
            source: "Das ist ein Test .".into(),
            ..common::human(&format!("f:ok{i}"), "This is a test .")
        });
    }
    let out = filter_pairs(pairs, &FilterConfig::default());
    let count = |r| out.removed.get(&r).copied().unwrap_or(0);
    ensure(count(RemovalReason::TooLong) == 1, || {
        format!("too long: {}", count(RemovalReason::TooLong))
    })?;
    ensure(count(RemovalReason::Ratio) == 1, || {
        format!("ratio: {}", count(RemovalReason::Ratio))
    })?;
    ensure(count(RemovalReason::Empty) == 0, || {
        "unexpected empty removals".into()
    })?;
    ensure(out.kept.len() == 8, || format!("kept {}", out.kept.len()))?;
    ensure(out.kept.iter().any(|p| p.id == "f:boundary"), || {
        "1.5 boundary pair removed".into()
    })
}

fn protocol() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let words = ["der", "die", "das", "Haus", "Ding", "schnell", "nicht", "."];
    let mut requests = Vec::new();
    let mut rows = Vec::new();
    for i in 0..500 {
        for variant in [Variant::Correct, Variant::Contrastive] {
            let n = rng.random_range(1..12);
            let target: Vec<&str> = (0..n).map(|_| words[rng.random_range(0..words.len())]).collect();
            let req = ScoreRequest::new(&format!("p:{i}"), variant, "src", &target.join(" ")).unwrap();
            let values: Vec<f64> = (0..req.expected_positions())
                .map(|_| -rng.random::<f64>() * 12.0)
                .collect();
            rows.push(ScoreTableRow {
                pair_id: format!("p:{i}"),
                variant,
                logprobs: TokenLogProbs::new(values).unwrap(),
            });
            requests.push(req);
        }
    }
    let table_path = dir.path().join("table.tsv");
    minpair::scorer::write_score_table(&table_path, &rows).map_err(|e| e.to_string())?;
    let table = TableBackend::new("table", rows);
    let external = ExternalBackend::new(
        "mock",
        Transport::Process {
            program: env!("CARGO_BIN_EXE_minpair").into(),
            args: vec![
                "serve-scorer".into(),
                "--backend".into(),
                format!("mock=table:{}", table_path.display()),
            ],
        },
    );
    let want = table.score_batch(&requests).map_err(|e| e.to_string())?;
    let got = external.score_batch(&requests).map_err(|e| e.to_string())?;
    ensure(got.len() == 1000 && want.len() == 1000, || {
        format!("{} responses", got.len())
    })?;
    for ((gi, gl), (wi, wl)) in got.iter().zip(&want) {
        ensure(gi == wi, || format!("id {gi} vs {wi}"))?;
        let same = gl.values().len() == wl.values().len()
            && gl
                .values()
                .iter()
                .zip(wl.values())
                .all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(same, || format!("{gi}: values differ"))?;
    }

    // A scorer that answers every request twice.
    let script = dir.path().join("dup.sh");
    fs::write(
        &script,
        "while read -r line; do\n  echo '{\"id\":\"d:1#correct\",\"token_logprobs\":[-1.0,-1.0]}'\n  echo '{\"id\":\"d:1#correct\",\"token_logprobs\":[-1.0,-1.0]}'\ndone\n",
    )
    .map_err(|e| e.to_string())?;
    let dup = ExternalBackend::new(
        "dup",
        Transport::Process {
            program: "sh".into(),
            args: vec![script.display().to_string()],
        },
    )
    .with_timeout(Duration::from_secs(10));
    let reqs = [
        ScoreRequest::new("d:1", Variant::Correct, "s", "a").unwrap(),
        ScoreRequest::new("d:1", Variant::Contrastive, "s", "b").unwrap(),
    ];
    match dup.score_batch(&reqs) {
        Err(ScorerError::ProtocolViolation(_)) => Ok(()),
        other => Err(format!("duplicate response gave {other:?}")),
    }
}

fn generate_into(corpus: &Path, out: &Path) -> Result<(), String> {
    let cfg = RunConfig {
        corpus: Some(corpus.to_path_buf()),
        out: Some(out.to_path_buf()),
        seed: Some(42),
        ..Default::default()
    };
    pipeline::run(Command::Generate, &cfg)
        .map(|_| ())
        .map_err(|e| e.to_string())
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus.jsonl");
    minpair::corpus::write_corpus(&corpus, &common::ordering_suite().human).map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    generate_into(&corpus, &a)?;
    generate_into(&corpus, &b)?;
    let mut compared = 0;
    for et in ErrorType::ALL {
        let name = pipeline::testset_file(et);
        let x = fs::read(a.join(&name)).map_err(|e| e.to_string())?;
        let y = fs::read(b.join(&name)).map_err(|e| e.to_string())?;
        ensure(!x.is_empty(), || format!("{name} is empty"))?;
        ensure(x == y, || format!("{name} differs between runs"))?;
        compared += 1;
    }
    let ma = fs::read(a.join("generate.manifest.json")).map_err(|e| e.to_string())?;
    let mb = fs::read(b.join("generate.manifest.json")).map_err(|e| e.to_string())?;
    // Manifests name their own output directory, so only compare the seed.
    let seed = |m: &[u8]| {
        serde_json::from_slice::<serde_json::Value>(m)
            .ok()
            .map(|v| v["seed"].clone())
    };
    ensure(seed(&ma) == seed(&mb) && compared == 8, || {
        "manifests disagree".into()
    })
}

fn main() -> ExitCode {
    let checks: [NamedCheck; 8] = [
        ("rule fixtures", rule_fixtures),
        ("scoring", scoring),
        ("discrepancy", discrepancy_fixtures),
        ("ordering property", ordering_property),
        ("validation pipeline", validation_pipeline),
        ("corpus filter", corpus_filter),
        ("protocol", protocol),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("PASS {name}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
