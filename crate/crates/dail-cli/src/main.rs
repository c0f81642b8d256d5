//! `dail` — streaming demonstration-reuse inference over a query file.
//!
//! `dail run` processes a dataset sequentially, reusing previously answered
//! queries as in-context demonstrations; `dail sweep` repeats the run across
//! one varied knob; `dail synth` generates a synthetic multiple-choice task
//! for offline experiments with the mock client.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dail_core::dataset::load_dataset;
use dail_core::report::{read_report, RunReport};
use dail_core::run::{
    build_client, build_embedder, load_bank_snapshot, parse_deletion, parse_order,
    parse_selection, run_stream, run_sweep, ClientKind, DemoOrder, EmbedderKind, RunConfig,
    RunControl, RunMode, SweepAxis,
};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "dail", version, about = "Demonstration-reuse inference harness")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Run one streaming pass over a dataset and write a report.
    Run(RunArgs),
    /// Run one complete pass per value of a single swept knob.
    Sweep(SweepArgs),
    /// Generate a synthetic multiple-choice dataset for mock runs.
    Synth(SynthArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Line-delimited JSON dataset of queries.
    #[arg(long)]
    dataset: PathBuf,

    /// Inference mode.
    #[arg(long, default_value = "dail", value_parser = ["zero_shot", "dail", "static_few_shot"])]
    mode: String,

    /// Demonstration selection strategy.
    #[arg(long, default_value = "dpp", value_parser = ["random", "bm25", "topk", "dpp"])]
    selection: String,

    /// Bank deletion strategy.
    #[arg(long, default_value = "diverse", value_parser = ["random", "fifo", "diverse"])]
    deletion: String,

    /// Weight of the entropy score in the fused score.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,

    /// Memory bank capacity M.
    #[arg(long, default_value_t = 2000)]
    bank_size: usize,

    /// Demonstrations per query.
    #[arg(long, default_value_t = 4)]
    k: usize,

    /// Candidate pool size handed to the diversity selector.
    #[arg(long, default_value_t = 10)]
    dpp_candidates: usize,

    /// Model client.
    #[arg(long, default_value = "mock", value_parser = ["mock", "remote"])]
    client: String,

    /// Completion endpoint URL (remote client).
    #[arg(long)]
    endpoint: Option<String>,

    /// Model name for remote completion requests.
    #[arg(long, default_value = "default")]
    model: String,

    /// Embedder.
    #[arg(long, default_value = "hashing", value_parser = ["hashing", "remote"])]
    embedder: String,

    /// Embeddings endpoint URL (remote embedder).
    #[arg(long)]
    embed_endpoint: Option<String>,

    /// Hashing embedder dimensionality.
    #[arg(long, default_value_t = 256)]
    embed_dim: usize,

    /// Seed for every random choice in the run.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Stream order over the dataset.
    #[arg(long, default_value = "sequential", value_parser = ["sequential", "shuffled"])]
    order: String,

    /// Demonstration order in the prompt.
    #[arg(long, default_value = "ascending", value_parser = ["ascending", "descending"])]
    demo_order: String,

    /// Completion token budget per query.
    #[arg(long, default_value_t = 16)]
    max_tokens: u64,

    /// BM25 term-frequency saturation.
    #[arg(long, default_value_t = 1.5)]
    bm25_k1: f64,

    /// BM25 length normalization.
    #[arg(long, default_value_t = 0.75)]
    bm25_b: f64,

    /// Demonstration file for static_few_shot mode.
    #[arg(long)]
    static_demos: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Report output path.
    #[arg(long)]
    report: PathBuf,

    /// Bank snapshot path (default: <report>.bank).
    #[arg(long)]
    snapshot: Option<PathBuf>,

    /// Stop after this many records, leaving a resumable partial report.
    #[arg(long)]
    limit: Option<usize>,

    /// Continue an interrupted run from its partial report and snapshot.
    #[arg(long, default_value_t = false)]
    resume: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Swept knob: alpha | m | selection | deletion | order.
    #[arg(long)]
    axis: String,

    /// Comma-separated values for the swept knob.
    #[arg(long)]
    values: String,

    /// Report path stem; each run writes <report>.<axis>-<value>.jsonl.
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset path.
    #[arg(long)]
    out: PathBuf,

    /// Number of queries.
    #[arg(long, default_value_t = 2000)]
    n: usize,

    /// Number of latent topics.
    #[arg(long, default_value_t = 8)]
    topics: usize,

    /// Generation seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn to_config(args: &CommonArgs) -> Result<RunConfig> {
    let mode = match args.mode.as_str() {
        "zero_shot" => RunMode::ZeroShot,
        "dail" => RunMode::Dail,
        "static_few_shot" => RunMode::StaticFewShot,
        other => bail!("unknown mode {other:?}"),
    };
    let config = RunConfig {
        mode,
        dataset: args.dataset.display().to_string(),
        selection: parse_selection(&args.selection)?,
        deletion: parse_deletion(&args.deletion)?,
        alpha: args.alpha,
        bank_size: args.bank_size,
        k: args.k,
        dpp_candidates: args.dpp_candidates,
        client: match args.client.as_str() {
            "mock" => ClientKind::Mock,
            _ => ClientKind::Remote,
        },
        endpoint: args.endpoint.clone(),
        model: args.model.clone(),
        embedder: match args.embedder.as_str() {
            "hashing" => EmbedderKind::Hashing,
            _ => EmbedderKind::Remote,
        },
        embed_endpoint: args.embed_endpoint.clone(),
        embed_dim: args.embed_dim,
        seed: args.seed,
        order: parse_order(&args.order)?,
        demo_order: match args.demo_order.as_str() {
            "descending" => DemoOrder::RelevanceDescending,
            _ => DemoOrder::RelevanceAscending,
        },
        max_tokens: args.max_tokens,
        bm25_k1: args.bm25_k1,
        bm25_b: args.bm25_b,
        static_demos: args.static_demos.as_ref().map(|p| p.display().to_string()),
    };
    config.validate()?;
    Ok(config)
}

fn print_summary(label: &str, report: &RunReport) {
    let s = &report.summary;
    println!(
        "{label}: micro {:.4}  macro {:.4}  abstain {:.4}  in_tokens {}  out_tokens {}  wall_ms {}",
        s.micro_accuracy,
        s.macro_accuracy,
        s.abstain_rate,
        s.total_input_tokens,
        s.total_output_tokens,
        s.wall_clock_ms
    );
    for subset in &s.per_subset {
        println!(
            "  {:<24} n={:<5} correct={:<5} accuracy={:.4}",
            subset.subset, subset.n, subset.correct, subset.accuracy
        );
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let config = to_config(&args.common)?;
    let dataset = load_dataset(&args.common.dataset)?;
    let client = build_client(&config, &dataset)?;
    let embedder = build_embedder(&config)?;

    let snapshot_path = args
        .snapshot
        .clone()
        .unwrap_or_else(|| with_suffix(&args.report, ".bank"));

    let mut ctrl = RunControl {
        stop_after: args.limit,
        report_path: Some(args.report.clone()),
        snapshot_path: Some(snapshot_path.clone()),
        ..RunControl::default()
    };

    if args.resume {
        let file = std::fs::File::open(&args.report)
            .with_context(|| format!("cannot open partial report {}", args.report.display()))?;
        let partial = read_report(std::io::BufReader::new(file))?;
        if partial.summary.is_some() {
            bail!("report {} already holds a completed run", args.report.display());
        }
        if partial.config != config.echo()? {
            bail!("partial report was produced with a different configuration");
        }
        ctrl.resume_records = partial.records;
        if config.mode == RunMode::Dail {
            ctrl.resume_bank = Some(load_bank_snapshot(&snapshot_path, &config)?);
        }
    }

    let outcome = run_stream(&config, &dataset, client.as_ref(), embedder.as_ref(), &ctrl)?;
    if outcome.completed {
        print_summary("run", &outcome.report);
    } else {
        println!(
            "interrupted after {} records; resume with --resume",
            outcome.report.records.len()
        );
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let config = to_config(&args.common)?;
    let dataset = load_dataset(&args.common.dataset)?;
    let axis = SweepAxis::parse(&args.axis)?;
    let values: Vec<String> = args
        .values
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();

    let reports = run_sweep(&config, &dataset, axis, &values)?;
    println!(
        "{:<14} {:>8} {:>8} {:>8} {:>12} {:>12}",
        "value", "micro", "macro", "abstain", "in_tokens", "out_tokens"
    );
    for (value, report) in &reports {
        let s = &report.summary;
        println!(
            "{:<14} {:>8.4} {:>8.4} {:>8.4} {:>12} {:>12}",
            value,
            s.micro_accuracy,
            s.macro_accuracy,
            s.abstain_rate,
            s.total_input_tokens,
            s.total_output_tokens
        );
        let out = with_suffix(&args.report, &format!(".{}-{}.jsonl", args.axis, value));
        std::fs::write(&out, report.to_jsonl()?)
            .with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let dataset = dail_core::synth::synthetic_dataset(args.n, args.topics, args.seed)?;
    let mut out = String::new();
    for entry in dataset.entries() {
        out.push_str(&serde_json::to_string(entry).map_err(anyhow::Error::from)?);
        out.push('\n');
    }
    std::fs::write(&args.out, out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} queries over {} topics to {}",
        args.n,
        args.topics,
        args.out.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Commands::Run(args) => cmd_run(args),
        Commands::Sweep(args) => cmd_sweep(args),
        Commands::Synth(args) => cmd_synth(args),
    }
}
