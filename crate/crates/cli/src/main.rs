//! `pvf`: mine contexts, probe a model, audit the probabilities and compare
//! or regress the resulting reports. Stages hand off through JSON files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pvf_core::analysis::{compare_models, regress, summarize_distribution, SocialFactorTable};
use pvf_core::miner::{self, ContextTemplate};
use pvf_core::probe::{
    self, BaselineBackend, CollectOptions, FileBackend, HttpBackend, HttpOptions, OpenAiCompletionBackend,
};
use pvf_core::reference::expected_metrics;
use pvf_core::schema::{Category, Group};
use pvf_core::{
    audit, Backend, BaselineKind, BaselineSpec, ContextSet, CriterionConfig, Error, GroupAggregation, NormOrder,
    RiskDecomposition, RiskReport, SlotConvention, SlotOrder, WordSchema, XDistribution,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_BACKEND: u8 = 3;
const EXIT_DATA: u8 = 4;

#[derive(Parser)]
#[command(
    name = "pvf",
    version,
    about = "Measure prejudice and volatility risk of language models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract context templates from a JSONL corpus.
    Mine(MineArgs),
    /// Collect candidate-word probabilities for every context and group.
    Probe(ProbeArgs),
    /// Compute per-group and overall risk indices from a tensor.
    Audit(AuditArgs),
    /// Tabulate overall indices of several reports.
    Compare(CompareArgs),
    /// Regress per-group risk on a social factor.
    Regress(RegressArgs),
    /// Summarize the distribution of per-group risk in a report.
    Summarize(SummarizeArgs),
    /// Write reference-model tensors and their closed-form indices.
    Baselines(BaselinesArgs),
}

#[derive(Args)]
struct MineArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Where the [X] and [Y] slots sit in an accepted sentence.
    #[arg(long, default_value = "x_then_y")]
    mode: SlotOrder,
    /// Number of documents to sample from the corpus.
    #[arg(long, default_value_t = 10_000)]
    sample: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Mining statistics; defaults to `<out>.stats.json`.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Protocol {
    /// `POST /v1/probe` with explicit candidates.
    Native,
    /// OpenAI-style `POST /v1/completions` with top logprobs.
    Openai,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    IdeallyUnbiased,
    Stereotyped,
    RandomlyStereotyped,
}

impl From<Baseline> for BaselineKind {
    fn from(b: Baseline) -> Self {
        match b {
            Baseline::IdeallyUnbiased => BaselineKind::IdeallyUnbiased,
            Baseline::Stereotyped => BaselineKind::Stereotyped,
            Baseline::RandomlyStereotyped => BaselineKind::RandomlyStereotyped,
        }
    }
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    contexts: PathBuf,
    #[arg(long, conflicts_with_all = ["backend_file", "baseline"])]
    backend_url: Option<String>,
    #[arg(long, default_value = "native")]
    protocol: Protocol,
    /// Model name sent with completion requests.
    #[arg(long, default_value = "default")]
    model: String,
    /// Replay probabilities from an existing tensor.
    #[arg(long, conflicts_with = "baseline")]
    backend_file: Option<PathBuf>,
    /// Use a reference model as the backend.
    #[arg(long)]
    baseline: Option<Baseline>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to masked for x_then_y contexts and terminal otherwise.
    #[arg(long)]
    slot: Option<SlotConvention>,
    #[arg(long, default_value_t = 8)]
    concurrency: usize,
    #[arg(long, default_value_t = 30_000)]
    timeout_ms: u64,
    /// Tensor path; partial progress is journaled next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    contexts: PathBuf,
    #[arg(long)]
    tensor: PathBuf,
    /// Criterion norm order: a positive integer or `inf`.
    #[arg(long, default_value = "inf")]
    k: NormOrder,
    #[arg(long, default_value = "uniform")]
    x_dist: XDistribution,
    /// How per-group indices combine: `mean` or `max`.
    #[arg(long, default_value = "mean")]
    aggregation: GroupAggregation,
    #[arg(long, default_value_t = 1000.0)]
    scale: f64,
    /// Report path; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Markdown,
    Csv,
}

#[derive(Args)]
struct CompareArgs {
    /// Reports as `path` or `name=path`; the name defaults to the file stem.
    #[arg(required = true)]
    reports: Vec<String>,
    #[arg(long, default_value_t = 1000.0)]
    scale: f64,
    #[arg(long, default_value = "markdown")]
    format: TableFormat,
    /// Also write the table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Index {
    #[value(name = "R")]
    Discrimination,
    #[value(name = "R_p")]
    Prejudice,
    #[value(name = "R_v")]
    Volatility,
}

impl Index {
    fn pick(self, r: &RiskDecomposition) -> f64 {
        match self {
            Index::Discrimination => r.discrimination,
            Index::Prejudice => r.prejudice,
            Index::Volatility => r.volatility,
        }
    }
}

#[derive(Args)]
struct RegressArgs {
    #[arg(long)]
    report: PathBuf,
    /// CSV with columns group_id, factor_value, weight.
    #[arg(long)]
    factors: PathBuf,
    #[arg(long, default_value = "R")]
    index: Index,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value = "R")]
    index: Index,
    #[arg(long, default_value_t = 1000.0)]
    scale: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the histogram as CSV.
    #[arg(long)]
    histogram: Option<PathBuf>,
}

#[derive(Args)]
struct BaselinesArgs {
    /// Defaults to synthetic groups `g00..` and categories `c0..`.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    contexts: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    groups: usize,
    #[arg(long, default_value_t = 2)]
    categories: usize,
    #[arg(long = "num-contexts", default_value_t = 100)]
    num_contexts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(value: &impl serde::Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn cmd_mine(a: MineArgs) -> Result<()> {
    let schema = WordSchema::load(&a.schema)?;
    schema.validate()?;
    let docs = miner::read_corpus(&a.corpus)?;
    let docs = miner::sample_documents(docs, a.sample, a.seed);
    let outcome = miner::mine(&docs, &schema, a.mode);
    let stats = pretty(&outcome.stats)?;
    let stats_path = a.stats.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".stats.json");
        p.into()
    });
    write_text(&stats_path, &stats)?;
    eprint!("{stats}");
    if outcome.contexts.is_empty() {
        return Err(Error::EmptyContextSet.into());
    }
    write_text(&a.out, &pretty(&outcome.contexts)?)?;
    eprintln!("{} templates written to {}", outcome.contexts.len(), a.out.display());
    Ok(())
}

fn cmd_probe(a: ProbeArgs) -> Result<()> {
    let schema = WordSchema::load(&a.schema)?;
    let ctx = ContextSet::load(&a.contexts)?;
    let backend: Box<dyn Backend> = if let Some(url) = &a.backend_url {
        let opts = HttpOptions {
            timeout: Duration::from_millis(a.timeout_ms),
            ..HttpOptions::from_env()
        };
        match a.protocol {
            Protocol::Native => Box::new(HttpBackend::new(url, opts)),
            Protocol::Openai => Box::new(OpenAiCompletionBackend::new(url, &a.model, opts)),
        }
    } else if let Some(path) = &a.backend_file {
        Box::new(FileBackend::open(path)?)
    } else if let Some(kind) = a.baseline {
        let spec =
            BaselineSpec::new(kind.into(), schema.groups.len(), schema.categories.len(), ctx.len()).with_seed(a.seed);
        Box::new(BaselineBackend::new(spec, &schema)?)
    } else {
        bail!(ConfigError(
            "one of --backend-url, --backend-file or --baseline is required".into()
        ));
    };
    if a.concurrency == 0 {
        bail!(ConfigError("--concurrency must be at least 1".into()));
    }
    let mut opts = CollectOptions::new(a.slot.unwrap_or(SlotConvention::for_order(ctx.mode)));
    opts.concurrency = a.concurrency;
    opts.cache_path = Some(a.out.clone());
    let outcome = probe::collect(backend.as_ref(), &ctx, &schema, &opts)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "{} cells ({} queried) from {} written to {}",
        outcome.tensor.cells.len(),
        outcome.queried,
        backend.describe(),
        a.out.display()
    );
    Ok(())
}

fn cmd_audit(a: AuditArgs) -> Result<()> {
    let schema = WordSchema::load(&a.schema)?;
    let ctx = ContextSet::load(&a.contexts)?;
    let tensor = pvf_core::ProbabilityTensor::load(&a.tensor)?;
    if !(a.scale.is_finite() && a.scale > 0.0) {
        bail!(ConfigError(format!("--scale must be positive, got {}", a.scale)));
    }
    let cfg = CriterionConfig {
        norm_order: a.k,
        group_aggregation: a.aggregation,
        report_scale: a.scale,
    };
    let report = audit(&tensor, &schema, &ctx, &cfg, a.x_dist)?;
    emit(a.out.as_deref(), &report.to_json()?)
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let mut reports = Vec::new();
    for arg in &a.reports {
        let (name, path) = match arg.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(arg);
                let stem = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                (stem, p)
            }
        };
        reports.push((name, RiskReport::load(&path)?.overall_risk()));
    }
    let table = compare_models(&reports, a.scale);
    match a.format {
        TableFormat::Markdown => print!("{}", table.to_markdown()),
        TableFormat::Csv => print!("{}", table.to_csv()?),
    }
    if let Some(out) = &a.out {
        write_text(out, &table.to_csv()?)?;
    }
    Ok(())
}

fn cmd_regress(a: RegressArgs) -> Result<()> {
    let report = RiskReport::load(&a.report)?;
    let factors = SocialFactorTable::load(&a.factors)?;
    let fit = regress(&report.per_group(|r| a.index.pick(r)), &factors)?;
    emit(a.out.as_deref(), &pretty(&fit)?)
}

fn cmd_summarize(a: SummarizeArgs) -> Result<()> {
    let report = RiskReport::load(&a.report)?;
    let values: Vec<f64> = report
        .per_group(|r| a.index.pick(r))
        .values()
        .map(|v| v * a.scale)
        .collect();
    let summary = summarize_distribution(&values)?;
    if let Some(path) = &a.histogram {
        write_text(path, &summary.histogram.to_csv()?)?;
    }
    emit(a.out.as_deref(), &pretty(&summary)?)
}

fn synthetic_schema(groups: usize, categories: usize) -> WordSchema {
    WordSchema {
        groups: (0..groups)
            .map(|g| Group {
                id: format!("g{g:02}"),
                words: vec![format!("g{g:02}")],
                weight: None,
            })
            .collect(),
        categories: (0..categories)
            .map(|c| Category {
                id: format!("c{c}"),
                words: vec![format!("w{c}")],
            })
            .collect(),
        exclusions: Vec::new(),
    }
}

fn synthetic_contexts(n: usize) -> Result<ContextSet> {
    Ok(ContextSet {
        templates: (0..n)
            .map(|i| ContextTemplate::new(format!("The [X] saw item {i} and [Y]"), 1))
            .collect::<pvf_core::Result<_>>()?,
        mode: SlotOrder::XThenY,
    })
}

fn cmd_baselines(a: BaselinesArgs) -> Result<()> {
    let schema = match &a.schema {
        Some(p) => WordSchema::load(p)?,
        None => synthetic_schema(a.groups, a.categories),
    };
    let ctx = match &a.contexts {
        Some(p) => ContextSet::load(p)?,
        None => synthetic_contexts(a.num_contexts)?,
    };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_text(&a.out.join("schema.json"), &pretty(&schema)?)?;
    write_text(&a.out.join("contexts.json"), &pretty(&ctx)?)?;
    let mut expected = BTreeMap::new();
    for kind in BaselineKind::ALL {
        let spec = BaselineSpec::new(kind, schema.groups.len(), schema.categories.len(), ctx.len()).with_seed(a.seed);
        let backend = BaselineBackend::new(spec.clone(), &schema)?;
        let tensor = probe::collect(
            &backend,
            &ctx,
            &schema,
            &CollectOptions::new(SlotConvention::for_order(ctx.mode)),
        )?
        .tensor;
        tensor.save(a.out.join(format!("{}.tensor.json", kind.name())))?;
        expected.insert(kind.name(), expected_metrics(&spec, NormOrder::Infinity)?);
    }
    write_text(&a.out.join("expected_metrics.json"), &pretty(&expected)?)?;
    eprintln!("baseline tensors written to {}", a.out.display());
    Ok(())
}

/// Invalid flag combinations and values.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn core_exit_code(e: &Error) -> u8 {
    if e.is_backend() || matches!(e, Error::Unsupported(_)) {
        return EXIT_BACKEND;
    }
    match e {
        Error::InvalidSchema(_)
        | Error::InvalidSpec(_)
        | Error::UnsupportedSpec(_)
        | Error::CacheMismatch { .. }
        | Error::Io { .. } => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return EXIT_CONFIG;
    }
    if let Some(e) = err.downcast_ref::<Error>() {
        return core_exit_code(e);
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return EXIT_CONFIG;
    }
    EXIT_DATA
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Mine(a) => cmd_mine(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Regress(a) => cmd_regress(a),
        Command::Summarize(a) => cmd_summarize(a),
        Command::Baselines(a) => cmd_baselines(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
