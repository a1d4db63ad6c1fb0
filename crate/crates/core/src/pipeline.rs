//! Subcommands of the command-line tool.
//!
//! Every subcommand reads its inputs from files named in the [`RunConfig`]
//! and writes its outputs under `out`, plus `<command>.manifest.json` with
//! the effective settings and seed. Wall-clock times go to a separate
//! `<command>.run.json`, so re-running with the same inputs reproduces every
//! other file byte for byte.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::config::{BackendKind, BackendSpec, ConfigError, RunConfig};
use crate::corpus::{self, CorpusError, Origin, RemovalReason, SentencePair};
use crate::eval::{
    self, evaluate_scores, judge_all, render_report, report_records, score_testset, EvalError, EvalReport,
    ReportFormat, TestsetType,
};
use crate::perturb::{self, ErrorType, MinimalPair, PerturbError, Perturber, RuleResources};
use crate::review;
use crate::scorer::{
    self, read_score_table, serve_protocol, train_ngram, ExternalBackend, NgramBackend, ScoreRequest,
    ScoreTableRow, ScorerBackend, ScorerError, TableBackend, Transport, Variant,
};
use crate::validate::{self, build_machine_testset, validate_candidates, RecordStore, ValidateError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Filter,
    Generate,
    Score,
    Evaluate,
    Validate,
    BuildMachineSet,
    Report,
    ServeReview,
    ServeScorer,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Filter => "filter",
            Command::Generate => "generate",
            Command::Score => "score",
            Command::Evaluate => "evaluate",
            Command::Validate => "validate",
            Command::BuildMachineSet => "build-machine-set",
            Command::Report => "report",
            Command::ServeReview => "serve-review",
            Command::ServeScorer => "serve-scorer",
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Validate(#[from] ValidateError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl PipelineError {
    /// Stable machine-readable code, printed as `error[CODE]: message`.
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::Config(e) => match e {
                ConfigError::UnknownKey { .. } => "CONFIG_UNKNOWN_KEY",
                ConfigError::DuplicateKey { .. } => "CONFIG_DUPLICATE_KEY",
                ConfigError::Syntax { .. } => "CONFIG_SYNTAX",
                ConfigError::InvalidValue { .. } => "CONFIG_INVALID_VALUE",
                ConfigError::Missing(_) => "CONFIG_MISSING",
                ConfigError::Io { .. } => "IO",
            },
            PipelineError::Corpus(e) => match e {
                CorpusError::LineCountMismatch { .. } => "LINE_COUNT_MISMATCH",
                CorpusError::MalformedRow { .. } => "MALFORMED_ROW",
                CorpusError::EmptySegment { .. } => "EMPTY_SEGMENT",
                CorpusError::InvalidUtf8 { .. } => "INVALID_UTF8",
                CorpusError::EmptyInput => "EMPTY_INPUT",
                CorpusError::DuplicateId(_) => "DUPLICATE_ID",
                CorpusError::BadRecord { .. } => "BAD_RECORD",
                CorpusError::BadOrigin(_) => "BAD_ORIGIN",
                CorpusError::Io { .. } => "IO",
            },
            PipelineError::Perturb(e) => match e {
                PerturbError::UnknownErrorType(_) => "UNKNOWN_ERROR_TYPE",
                PerturbError::Resource { .. } => "RESOURCE",
                PerturbError::Io { .. } => "IO",
                PerturbError::Corpus(_) => "BAD_RECORD",
                other => other.skip_reason().unwrap_or("PERTURB"),
            },
            PipelineError::Scorer(e) => scorer_code(e),
            PipelineError::Eval(e) => match e {
                EvalError::NonFiniteScore { .. } => "NON_FINITE_SCORE",
                EvalError::EmptyTestset => "EMPTY_TESTSET",
                EvalError::MissingOnebest(_) => "MISSING_ONEBEST",
                EvalError::MixedErrorTypes(..) => "MIXED_ERROR_TYPES",
                EvalError::MixedOrigins => "MIXED_ORIGINS",
                EvalError::NoReports => "NO_REPORTS",
                EvalError::UnknownFormat(_) => "CONFIG_INVALID_VALUE",
                EvalError::Scorer(e) => scorer_code(e),
            },
            PipelineError::Validate(e) => match e {
                ValidateError::SpanOutOfRange { .. } => "SPAN_OUT_OF_RANGE",
                ValidateError::VersionConflict { .. } => "VERSION_CONFLICT",
                ValidateError::IllegalTransition { .. } => "ILLEGAL_TRANSITION",
                ValidateError::MissingCorrectedText(_) => "MISSING_CORRECTED_TEXT",
                ValidateError::UnchangedCorrectedText(_) => "UNCHANGED_CORRECTED_TEXT",
                ValidateError::UnknownRecord(_) => "UNKNOWN_RECORD",
                ValidateError::DuplicateRecord(_) => "DUPLICATE_RECORD",
                ValidateError::UnresolvedReviews(_) => "UNRESOLVED_REVIEWS",
                ValidateError::StoreExists(_) => "STORE_EXISTS",
                ValidateError::Corrupt { .. } => "STORE_CORRUPT",
                ValidateError::Io { .. } => "IO",
                ValidateError::Perturb(_) => "PERTURB",
            },
            PipelineError::Io { .. } => "IO",
            PipelineError::Usage(_) => "USAGE",
        }
    }
}

fn scorer_code(e: &ScorerError) -> &'static str {
    match e {
        ScorerError::EmptyTarget => "EMPTY_TARGET",
        ScorerError::EmptyLogProbs | ScorerError::InvalidLogProb { .. } => "INVALID_LOGPROB",
        ScorerError::BackendFailure { .. } => "BACKEND_FAILURE",
        ScorerError::ProtocolViolation(_) => "PROTOCOL_VIOLATION",
        ScorerError::Timeout(_) => "SCORER_TIMEOUT",
        ScorerError::MissingEntry(_) => "MISSING_SCORE",
        ScorerError::DuplicateRequest(_) => "DUPLICATE_REQUEST",
        ScorerError::EmptyCorpus => "EMPTY_CORPUS",
        ScorerError::InvalidOrder | ScorerError::InvalidSmoothing(_) => "CONFIG_INVALID_VALUE",
        ScorerError::UnknownVariant(_) | ScorerError::TableFormat { .. } => "TABLE_FORMAT",
        ScorerError::Io { .. } => "IO",
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs one subcommand and returns a short human-readable summary.
pub fn run(command: Command, cfg: &RunConfig) -> Result<String, PipelineError> {
    match command {
        Command::Ingest => ingest(cfg),
        Command::Filter => filter(cfg),
        Command::Generate => generate(cfg),
        Command::Score => score(cfg),
        Command::Evaluate => evaluate(cfg),
        Command::Validate => validate_cmd(cfg),
        Command::BuildMachineSet => build_machine_set(cfg),
        Command::Report => report(cfg),
        Command::ServeReview => serve_review(cfg),
        Command::ServeScorer => serve_scorer(cfg),
    }
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, PipelineError> {
    let dir = RunConfig::require(&cfg.out, "out")?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_text(path, &text)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), PipelineError> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item).expect("serializable"));
        text.push('\n');
    }
    write_text(path, &text)
}

/// Records settings and outputs next to the outputs.
fn write_manifest(
    dir: &Path,
    command: Command,
    cfg: &RunConfig,
    outputs: &[String],
) -> Result<(), PipelineError> {
    let manifest = json!({
        "command": command.name(),
        "seed": cfg.seed(),
        "settings": cfg,
        "outputs": outputs,
        "tool_version": env!("CARGO_PKG_VERSION"),
    });
    write_json(&dir.join(format!("{}.manifest.json", command.name())), &manifest)?;
    let run = json!({
        "command": command.name(),
        "finished_at": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    });
    write_json(&dir.join(format!("{}.run.json", command.name())), &run)
}

fn resources(cfg: &RunConfig) -> Result<RuleResources, PipelineError> {
    Ok(match &cfg.resources {
        Some(dir) => RuleResources::from_dir(dir)?,
        None => RuleResources::builtin(),
    })
}

fn origin(cfg: &RunConfig) -> Result<Origin, PipelineError> {
    Ok(match &cfg.origin {
        Some(o) => o.parse()?,
        None => Origin::Human,
    })
}

fn ingest(cfg: &RunConfig) -> Result<String, PipelineError> {
    let origin = origin(cfg)?;
    let tag = cfg.tag.as_deref().unwrap_or("corpus");
    let pairs = match &cfg.tsv {
        Some(tsv) => corpus::read_tsv(tsv, tag, &origin)?,
        None => {
            let src = RunConfig::require(&cfg.source, "source")?;
            let tgt = RunConfig::require(&cfg.target, "target")?;
            corpus::read_parallel(src, tgt, tag, &origin)?
        }
    };
    let dir = out_dir(cfg)?;
    corpus::write_corpus(&dir.join("corpus.jsonl"), &pairs)?;
    write_manifest(dir, Command::Ingest, cfg, &["corpus.jsonl".into()])?;
    Ok(format!("ingested {} pairs ({origin})", pairs.len()))
}

fn filter(cfg: &RunConfig) -> Result<String, PipelineError> {
    let path = RunConfig::require(&cfg.corpus, "corpus")?;
    let fc = cfg.filter()?;
    let pairs = corpus::read_corpus(path)?;
    let total = pairs.len();
    let outcome = corpus::filter_pairs(pairs, &fc);
    let dir = out_dir(cfg)?;
    corpus::write_corpus(&dir.join("corpus.filtered.jsonl"), &outcome.kept)?;
    let mut removed: BTreeMap<RemovalReason, usize> =
        [RemovalReason::TooLong, RemovalReason::Ratio, RemovalReason::Empty]
            .into_iter()
            .map(|r| (r, 0))
            .collect();
    removed.extend(outcome.removed.iter().map(|(r, n)| (*r, *n)));
    write_json(
        &dir.join("filter.stats.json"),
        &json!({
            "input": total,
            "kept": outcome.kept.len(),
            "removed": removed,
            "max_tokens": fc.max_tokens,
            "max_ratio": fc.max_ratio,
        }),
    )?;
    write_manifest(
        dir,
        Command::Filter,
        cfg,
        &["corpus.filtered.jsonl".into(), "filter.stats.json".into()],
    )?;
    Ok(format!(
        "kept {} of {total} pairs; removed {}",
        outcome.kept.len(),
        removed
            .iter()
            .map(|(r, n)| format!("{}={n}", serde_json::to_value(r).unwrap().as_str().unwrap()))
            .collect::<Vec<_>>()
            .join(" ")
    ))
}

pub fn testset_file(error_type: ErrorType) -> String {
    format!("testset.{error_type}.jsonl")
}

fn generate(cfg: &RunConfig) -> Result<String, PipelineError> {
    let path = RunConfig::require(&cfg.corpus, "corpus")?;
    let pairs = corpus::read_corpus(path)?;
    let res = resources(cfg)?;
    let perturber = Perturber::new(&res);
    let dir = out_dir(cfg)?;
    let mut outputs = Vec::new();
    let mut lines = Vec::new();
    for et in cfg.error_types()? {
        let outcome = perturber.build(&pairs, et, cfg.seed());
        let name = testset_file(et);
        perturb::write_testset(&dir.join(&name), &outcome.pairs)?;
        let skipped = format!("skipped.{et}.jsonl");
        write_jsonl(&dir.join(&skipped), &outcome.skipped)?;
        lines.push(format!(
            "{et}: {} pairs, {} skipped",
            outcome.pairs.len(),
            outcome.skipped.len()
        ));
        outputs.extend([name, skipped]);
    }
    write_manifest(dir, Command::Generate, cfg, &outputs)?;
    Ok(lines.join("\n"))
}

/// Backend name made safe for a file name.
pub fn backend_slug(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '-'
            }
        })
        .collect()
}

fn testset_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Score table written by `score` for one backend and test set.
pub fn scores_file(testset: &Path) -> String {
    format!("{}.scores.tsv", testset_stem(testset))
}

enum Loaded {
    Ready(Arc<dyn ScorerBackend>),
    /// One table per test set, found by test-set file name.
    TableDir {
        name: String,
        dir: PathBuf,
    },
}

struct Backends {
    specs: Vec<BackendSpec>,
    loaded: Vec<Loaded>,
}

impl Backends {
    fn load(cfg: &RunConfig) -> Result<Self, PipelineError> {
        let specs = cfg.backend_specs()?;
        if specs.is_empty() {
            return Err(ConfigError::Missing("backend".into()).into());
        }
        let timeout = Duration::from_secs(cfg.timeout_secs.unwrap_or(300));
        let unit = cfg.length_unit.clone().unwrap_or_else(|| "token".into());
        let mut loaded = Vec::new();
        for s in &specs {
            loaded.push(match &s.kind {
                BackendKind::Table(p) if p.is_dir() => Loaded::TableDir {
                    name: s.name.clone(),
                    dir: p.clone(),
                },
                BackendKind::Table(p) => Loaded::Ready(Arc::new(TableBackend::load(&s.name, p)?)),
                BackendKind::Ngram(p) => {
                    let lines = training_lines(p)?;
                    let model =
                        train_ngram(&lines, cfg.ngram_order.unwrap_or(3), cfg.ngram_k.unwrap_or(0.1))?;
                    Loaded::Ready(Arc::new(NgramBackend::new(&s.name, Arc::new(model))))
                }
                BackendKind::External(cmd) => Loaded::Ready(Arc::new(
                    ExternalBackend::new(&s.name, Transport::command(cmd))
                        .with_timeout(timeout)
                        .with_length_unit(&unit),
                )),
                BackendKind::Http(url) => Loaded::Ready(Arc::new(
                    ExternalBackend::new(&s.name, Transport::Http { url: url.clone() })
                        .with_timeout(timeout)
                        .with_length_unit(&unit),
                )),
            });
        }
        Ok(Backends { specs, loaded })
    }

    fn get(&self, i: usize, testset: &Path) -> Result<Arc<dyn ScorerBackend>, PipelineError> {
        Ok(match &self.loaded[i] {
            Loaded::Ready(b) => b.clone(),
            Loaded::TableDir { name, dir } => {
                Arc::new(TableBackend::load(name, &dir.join(scores_file(testset)))?)
            }
        })
    }
}

/// Training sentences: targets of a `.jsonl` corpus, or non-empty lines.
fn training_lines(path: &Path) -> Result<Vec<String>, PipelineError> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        return Ok(corpus::read_corpus(path)?.into_iter().map(|p| p.target).collect());
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect())
}

/// 1-best translations per backend name.
fn load_onebest(
    cfg: &RunConfig,
    backends: &Backends,
) -> Result<HashMap<String, HashMap<String, String>>, PipelineError> {
    let mut out = HashMap::new();
    for spec in cfg.onebest_specs()? {
        if !backends.specs.iter().any(|b| b.name == spec.backend) {
            return Err(ConfigError::InvalidValue {
                key: "onebest".into(),
                value: spec.backend.clone(),
                reason: "no backend with this name".into(),
            }
            .into());
        }
        let map: HashMap<String, String> = corpus::read_corpus(&spec.path)?
            .into_iter()
            .map(|p: SentencePair| (p.id, p.target))
            .collect();
        out.insert(spec.backend, map);
    }
    Ok(out)
}

fn load_testsets(cfg: &RunConfig) -> Result<Vec<(PathBuf, Vec<MinimalPair>)>, PipelineError> {
    if cfg.testsets.is_empty() {
        return Err(ConfigError::Missing("testset".into()).into());
    }
    cfg.testsets
        .iter()
        .map(|p| Ok((p.clone(), perturb::read_testset(p)?)))
        .collect()
}

fn score(cfg: &RunConfig) -> Result<String, PipelineError> {
    let testsets = load_testsets(cfg)?;
    let backends = Backends::load(cfg)?;
    let onebest = load_onebest(cfg, &backends)?;
    let dir = out_dir(cfg)?;
    let mut outputs = Vec::new();
    for (i, spec) in backends.specs.iter().enumerate() {
        let sub = dir.join(backend_slug(&spec.name));
        fs::create_dir_all(&sub).map_err(io_err(&sub))?;
        for (path, pairs) in &testsets {
            let backend = backends.get(i, path)?;
            let ob = onebest.get(&spec.name);
            let mut requests = Vec::new();
            for p in pairs {
                requests.push(ScoreRequest::new(&p.id, Variant::Correct, &p.source, &p.correct)?);
                requests.push(ScoreRequest::new(
                    &p.id,
                    Variant::Contrastive,
                    &p.source,
                    &p.contrastive,
                )?);
                if let Some(map) = ob {
                    let text = map
                        .get(&p.id)
                        .ok_or_else(|| EvalError::MissingOnebest(p.id.clone()))?;
                    requests.push(ScoreRequest::new(&p.id, Variant::Onebest, &p.source, text)?);
                }
            }
            let mut rows = Vec::with_capacity(requests.len());
            for chunk in requests.chunks(1024) {
                for (id, lp) in scorer::score_requests(backend.as_ref(), chunk)? {
                    let (pair_id, variant) = scorer::parse_request_id(&id).expect("ids built above");
                    rows.push(ScoreTableRow {
                        pair_id: pair_id.to_string(),
                        variant,
                        logprobs: lp,
                    });
                }
            }
            let file = sub.join(scores_file(path));
            scorer::write_score_table(&file, &rows)?;
            outputs.push(format!("{}/{}", backend_slug(&spec.name), scores_file(path)));
        }
    }
    write_manifest(dir, Command::Score, cfg, &outputs)?;
    Ok(format!("wrote {} score tables", outputs.len()))
}

#[derive(Serialize)]
struct JudgedLine<'a> {
    error_type: ErrorType,
    testset_type: TestsetType,
    backend: &'a str,
    #[serde(flatten)]
    judged: &'a eval::JudgedPair,
    #[serde(skip_serializing_if = "Option::is_none")]
    score_onebest: Option<f64>,
}

pub const REPORTS_FILE: &str = "reports.json";

fn report_file(format: ReportFormat) -> &'static str {
    match format {
        ReportFormat::Tsv => "report.tsv",
        ReportFormat::Markdown => "report.md",
    }
}

fn evaluate(cfg: &RunConfig) -> Result<String, PipelineError> {
    let testsets = load_testsets(cfg)?;
    let backends = Backends::load(cfg)?;
    let onebest = load_onebest(cfg, &backends)?;
    let ties = cfg.tie_policy()?;
    let format = cfg.format()?;
    let mut reports = Vec::new();
    let mut judged_lines = Vec::new();
    for (path, pairs) in &testsets {
        let first = pairs.first().ok_or(EvalError::EmptyTestset)?;
        if let Some(other) = pairs.iter().find(|p| p.error_type != first.error_type) {
            return Err(EvalError::MixedErrorTypes(first.error_type, other.error_type).into());
        }
        let testset_type = TestsetType::of(pairs)?;
        let mut results = Vec::new();
        for (i, spec) in backends.specs.iter().enumerate() {
            let backend = backends.get(i, path)?;
            let scores = score_testset(backend.as_ref(), pairs, onebest.get(&spec.name))?;
            let judged = judge_all(&scores)?;
            for (j, s) in judged.iter().zip(&scores) {
                judged_lines.push(
                    serde_json::to_string(&JudgedLine {
                        error_type: first.error_type,
                        testset_type,
                        backend: &spec.name,
                        judged: j,
                        score_onebest: s.onebest,
                    })
                    .expect("serializable"),
                );
            }
            results.push(evaluate_scores(&spec.name, backend.length_unit(), &scores, ties)?);
        }
        reports.push(EvalReport {
            error_type: first.error_type,
            testset_type,
            tie_policy: ties,
            results,
        });
    }
    let rendered = render_report(&reports, format)?;
    let dir = out_dir(cfg)?;
    write_json(&dir.join(REPORTS_FILE), &reports)?;
    write_text(&dir.join(report_file(format)), &rendered)?;
    write_jsonl(&dir.join("report.records.jsonl"), &report_records(&reports))?;
    let mut judged_text = judged_lines.join("\n");
    judged_text.push('\n');
    write_text(&dir.join("judged.jsonl"), &judged_text)?;
    write_manifest(
        dir,
        Command::Evaluate,
        cfg,
        &[
            REPORTS_FILE.into(),
            report_file(format).into(),
            "report.records.jsonl".into(),
            "judged.jsonl".into(),
        ],
    )?;
    Ok(rendered.trim_end().to_string())
}

fn report(cfg: &RunConfig) -> Result<String, PipelineError> {
    if cfg.reports.is_empty() {
        return Err(ConfigError::Missing("reports".into()).into());
    }
    let mut reports: Vec<EvalReport> = Vec::new();
    for path in &cfg.reports {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut part: Vec<EvalReport> = serde_json::from_str(&text).map_err(|e| CorpusError::BadRecord {
            path: path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?;
        reports.append(&mut part);
    }
    let format = cfg.format()?;
    let rendered = render_report(&reports, format)?;
    if cfg.out.is_some() {
        let dir = out_dir(cfg)?;
        write_text(&dir.join(report_file(format)), &rendered)?;
        write_jsonl(&dir.join("report.records.jsonl"), &report_records(&reports))?;
        write_manifest(
            dir,
            Command::Report,
            cfg,
            &[report_file(format).into(), "report.records.jsonl".into()],
        )?;
    }
    Ok(rendered.trim_end().to_string())
}

fn validate_cmd(cfg: &RunConfig) -> Result<String, PipelineError> {
    let testsets = load_testsets(cfg)?;
    let machine_path = RunConfig::require(&cfg.machine, "machine")?;
    let machine = corpus::read_corpus(machine_path)?;
    if let Some(p) = machine.iter().find(|p| !p.origin.is_machine()) {
        return Err(PipelineError::Usage(format!(
            "{}: pair {} is not a machine reference",
            machine_path.display(),
            p.id
        )));
    }
    let res = resources(cfg)?;
    let mut records = Vec::new();
    let mut missing = 0;
    for (_, pairs) in &testsets {
        if TestsetType::of(pairs)? != TestsetType::Human {
            return Err(EvalError::MixedOrigins.into());
        }
        let outcome = validate_candidates(pairs, &machine, &res)?;
        missing += outcome.missing_machine.len();
        records.extend(outcome.records);
    }
    let dir = out_dir(cfg)?;
    let store = RecordStore::create(dir, records)?;
    let stats = store.stats();
    write_manifest(
        dir,
        Command::Validate,
        cfg,
        &[
            validate::BASE_FILE.into(),
            validate::LOG_FILE.into(),
            validate::STATE_FILE.into(),
        ],
    )?;
    let counts: Vec<String> = stats
        .by_status
        .iter()
        .filter(|(_, n)| **n > 0)
        .map(|(s, n)| format!("{s}={n}"))
        .collect();
    Ok(format!(
        "{} records ({}); {missing} human pairs without a machine reference",
        stats.total,
        counts.join(" ")
    ))
}

fn build_machine_set(cfg: &RunConfig) -> Result<String, PipelineError> {
    let store_dir = RunConfig::require(&cfg.store, "store")?;
    let store = RecordStore::open(store_dir)?;
    let res = resources(cfg)?;
    let perturber = Perturber::new(&res);
    let types = cfg.error_types()?;
    let records: Vec<_> = store
        .records()
        .iter()
        .filter(|r| types.contains(&r.error_type))
        .cloned()
        .collect();
    let outcome = build_machine_testset(
        &records,
        &perturber,
        cfg.seed(),
        cfg.exclude_unresolved.unwrap_or(false),
    )?;
    let dir = out_dir(cfg)?;
    let mut outputs = Vec::new();
    let mut lines = Vec::new();
    for et in types {
        let candidates = records.iter().filter(|r| r.error_type == et).count();
        if candidates == 0 {
            continue;
        }
        let pairs: Vec<MinimalPair> = outcome
            .pairs
            .iter()
            .filter(|p| p.error_type == et)
            .cloned()
            .collect();
        let name = testset_file(et);
        perturb::write_testset(&dir.join(&name), &pairs)?;
        let skipped: Vec<_> = outcome
            .skipped
            .iter()
            .filter(|s| s.id.starts_with(&format!("{et}/")))
            .cloned()
            .collect();
        let skipped_name = format!("skipped.{et}.jsonl");
        write_jsonl(&dir.join(&skipped_name), &skipped)?;
        lines.push(format!(
            "{et}: {} pairs from {candidates} machine references",
            pairs.len()
        ));
        outputs.extend([name, skipped_name]);
    }
    write_manifest(dir, Command::BuildMachineSet, cfg, &outputs)?;
    if !outcome.excluded_unresolved.is_empty() {
        lines.push(format!(
            "excluded {} unresolved reviews",
            outcome.excluded_unresolved.len()
        ));
    }
    Ok(lines.join("\n"))
}

fn serve_review(cfg: &RunConfig) -> Result<String, PipelineError> {
    let store_dir = RunConfig::require(&cfg.store, "store")?;
    let secret = std::env::var(review::SECRET_ENV)
        .ok()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| PipelineError::Usage(format!("set {} to the reviewer secret", review::SECRET_ENV)))?;
    let addr_text = cfg.addr.as_deref().unwrap_or("127.0.0.1:8080");
    let addr = addr_text
        .parse()
        .map_err(|e: std::net::AddrParseError| ConfigError::InvalidValue {
            key: "addr".into(),
            value: addr_text.into(),
            reason: e.to_string(),
        })?;
    let store = RecordStore::open(store_dir)?;
    let app = review::router(store, &secret, cfg.ui_dir.clone());
    let rt = tokio::runtime::Runtime::new().map_err(io_err(Path::new("<runtime>")))?;
    rt.block_on(review::serve(addr, app))
        .map_err(io_err(Path::new(addr_text)))?;
    Ok("review service stopped".into())
}

/// Answers line-protocol requests on stdin with one configured backend.
fn serve_scorer(cfg: &RunConfig) -> Result<String, PipelineError> {
    let backends = Backends::load(cfg)?;
    if backends.specs.len() != 1 {
        return Err(PipelineError::Usage(
            "serve-scorer takes exactly one backend".into(),
        ));
    }
    let backend = match &backends.loaded[0] {
        Loaded::Ready(b) => b.clone(),
        Loaded::TableDir { .. } => {
            return Err(PipelineError::Usage(
                "serve-scorer needs a score table file, not a directory".into(),
            ))
        }
    };
    let stdin = io::stdin();
    let stdout = io::stdout();
    let served = serve_protocol(backend.as_ref(), BufReader::new(stdin.lock()), stdout.lock())?;
    let _ = writeln!(io::stderr(), "served {served} requests");
    Ok(String::new())
}

/// Loads a score table; a thin wrapper kept for examples and tests.
pub fn load_table(path: &Path) -> Result<Vec<ScoreTableRow>, PipelineError> {
    Ok(read_score_table(path)?)
}
