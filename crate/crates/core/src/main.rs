use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use minpair::config::RunConfig;
use minpair::pipeline::{self, Command, PipelineError};

/// Build, score and validate contrastive minimal-pair test sets.
#[derive(Parser)]
#[command(name = "minpair", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Read a parallel corpus (two line-aligned files or one TSV) into corpus.jsonl.
    Ingest,
    /// Drop over-long and badly length-matched pairs.
    Filter,
    /// Write one minimal-pair test set per error type.
    Generate,
    /// Write per-token log-probability tables for each backend and test set.
    Score,
    /// Judge pairs, aggregate runs and render the report.
    Evaluate,
    /// Classify machine references into a review store.
    Validate,
    /// Build machine-reference test sets from a review store.
    BuildMachineSet,
    /// Merge reports.json files and render them.
    Report,
    /// Serve the review API (and an optional UI directory).
    ServeReview,
    /// Answer line-protocol score requests on stdin with one backend.
    ServeScorer,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Ingest => Command::Ingest,
            Cmd::Filter => Command::Filter,
            Cmd::Generate => Command::Generate,
            Cmd::Score => Command::Score,
            Cmd::Evaluate => Command::Evaluate,
            Cmd::Validate => Command::Validate,
            Cmd::BuildMachineSet => Command::BuildMachineSet,
            Cmd::Report => Command::Report,
            Cmd::ServeReview => Command::ServeReview,
            Cmd::ServeScorer => Command::ServeScorer,
        }
    }
}

#[derive(Args)]
struct Flags {
    /// `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    source: Option<PathBuf>,
    #[arg(long, global = true)]
    target: Option<PathBuf>,
    #[arg(long, global = true)]
    tsv: Option<PathBuf>,
    #[arg(long, global = true)]
    tag: Option<String>,
    /// `human` or `machine:<engine>`.
    #[arg(long, global = true)]
    origin: Option<String>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Directory with word lists overriding the built-in rule resources.
    #[arg(long, global = true)]
    resources: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Machine-translated corpus for `validate`.
    #[arg(long, global = true)]
    machine: Option<PathBuf>,
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// `tsv` or `markdown`.
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long, global = true)]
    max_tokens: Option<usize>,
    #[arg(long, global = true)]
    max_ratio: Option<f64>,
    /// `against` (default) or `half`.
    #[arg(long, global = true)]
    tie_policy: Option<String>,
    #[arg(long, global = true)]
    exclude_unresolved: bool,
    #[arg(long, global = true)]
    addr: Option<String>,
    #[arg(long, global = true)]
    ui_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    ngram_order: Option<usize>,
    #[arg(long, global = true)]
    ngram_k: Option<f64>,
    #[arg(long, global = true)]
    timeout_secs: Option<u64>,
    #[arg(long, global = true)]
    length_unit: Option<String>,
    /// Repeatable; all types when omitted.
    #[arg(long, global = true)]
    error_type: Vec<String>,
    /// Repeatable `NAME=KIND:PATH`, KIND one of table, ngram, external.
    #[arg(long, global = true)]
    backend: Vec<String>,
    /// Repeatable `NAME=PATH` to a corpus of 1-best translations.
    #[arg(long, global = true)]
    onebest: Vec<String>,
    #[arg(long, global = true)]
    testset: Vec<PathBuf>,
    #[arg(long, global = true)]
    reports: Vec<PathBuf>,
}

impl Flags {
    fn into_config(self) -> Result<RunConfig, PipelineError> {
        let base = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            source: self.source,
            target: self.target,
            tsv: self.tsv,
            tag: self.tag,
            origin: self.origin,
            corpus: self.corpus,
            resources: self.resources,
            out: self.out,
            seed: self.seed,
            machine: self.machine,
            store: self.store,
            format: self.format,
            max_tokens: self.max_tokens,
            max_ratio: self.max_ratio,
            tie_policy: self.tie_policy,
            exclude_unresolved: self.exclude_unresolved.then_some(true),
            addr: self.addr,
            ui_dir: self.ui_dir,
            ngram_order: self.ngram_order,
            ngram_k: self.ngram_k,
            timeout_secs: self.timeout_secs,
            length_unit: self.length_unit,
            error_types: self.error_type,
            backends: self.backend,
            onebest: self.onebest,
            testsets: self.testset,
            reports: self.reports,
        };
        Ok(base.overlay(flags))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli
        .flags
        .into_config()
        .and_then(|cfg| pipeline::run(cli.command.into(), &cfg));
    match result {
        Ok(summary) => {
            if !summary.is_empty() {
                println!("{summary}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
