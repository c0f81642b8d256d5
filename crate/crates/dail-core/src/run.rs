//! The streaming inference harness.
//!
//! Queries are processed strictly in stream order: select demonstrations,
//! build the prompt, predict, map the output to a label, record, and (in
//! dail mode) insert the answered query into the memory bank so it is
//! selectable from the next step on. Sweeps rerun the stream with one knob
//! varied and fresh banks per run.

use crate::bank::{BankConfig, DeletionStrategy, MemoryBank, SelectionStrategy};
use crate::client::{map_output_to_label, LabelOutcome, LlmClient, RemoteClient};
use crate::dataset::{load_dataset, Dataset};
use crate::embedding::{Embedder, EmbedderConfig};
use crate::error::{DailError, Result};
use crate::mock::MockOracle;
use crate::prompt::{build_prompt, PromptTemplate};
use crate::report::{PredictionRecord, ReportWriter, RunReport, RunSummary, SubsetStats};
use crate::scoring::entropy_score;
use crate::types::{rng_from_parts, SampleId};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

const RNG_TAG_SHUFFLE: u64 = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    ZeroShot,
    Dail,
    StaticFewShot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    Hashing,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamOrder {
    Sequential,
    Shuffled,
}

/// Demonstration order in the prompt. Ascending relevance puts the most
/// relevant demonstration last, nearest the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoOrder {
    RelevanceAscending,
    RelevanceDescending,
}

/// Every knob that affects results. Serialized verbatim as the report's
/// config echo: two runs with equal echoes and seeds produce identical
/// reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: RunMode,
    pub dataset: String,
    pub selection: SelectionStrategy,
    pub deletion: DeletionStrategy,
    pub alpha: f64,
    pub bank_size: usize,
    pub k: usize,
    pub dpp_candidates: usize,
    pub client: ClientKind,
    pub endpoint: Option<String>,
    /// Model name sent in remote completion requests.
    pub model: String,
    pub embedder: EmbedderKind,
    pub embed_endpoint: Option<String>,
    pub embed_dim: usize,
    pub seed: u64,
    pub order: StreamOrder,
    pub demo_order: DemoOrder,
    pub max_tokens: u64,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    pub static_demos: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: RunMode::Dail,
            dataset: String::new(),
            selection: SelectionStrategy::Dpp,
            deletion: DeletionStrategy::Diverse,
            alpha: crate::bank::DEFAULT_ALPHA,
            bank_size: crate::bank::DEFAULT_CAPACITY,
            k: crate::bank::DEFAULT_K,
            dpp_candidates: crate::bank::DEFAULT_DPP_CANDIDATES,
            client: ClientKind::Mock,
            endpoint: None,
            model: "default".to_string(),
            embedder: EmbedderKind::Hashing,
            embed_endpoint: None,
            embed_dim: crate::embedding::DEFAULT_HASHING_DIM,
            seed: 0,
            order: StreamOrder::Sequential,
            demo_order: DemoOrder::RelevanceAscending,
            max_tokens: 16,
            bm25_k1: crate::retrieval::DEFAULT_K1,
            bm25_b: crate::retrieval::DEFAULT_B,
            static_demos: None,
        }
    }
}

impl RunConfig {
    pub fn bank_config(&self) -> BankConfig {
        BankConfig {
            capacity: self.bank_size,
            selection: self.selection,
            deletion: self.deletion,
            alpha: self.alpha,
            k: self.k,
            dpp_candidates: self.dpp_candidates,
            rng_seed: self.seed,
            bm25_k1: self.bm25_k1,
            bm25_b: self.bm25_b,
        }
    }

    pub fn embedder_config(&self) -> Result<EmbedderConfig> {
        match self.embedder {
            EmbedderKind::Hashing => Ok(EmbedderConfig::Hashing {
                dim: self.embed_dim,
                seed: self.seed,
            }),
            EmbedderKind::Remote => {
                let endpoint = self.embed_endpoint.clone().ok_or_else(|| {
                    DailError::Config("remote embedder needs --embed-endpoint".into())
                })?;
                Ok(EmbedderConfig::Remote { endpoint })
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bank_config().validate()?;
        if self.client == ClientKind::Remote && self.endpoint.is_none() {
            return Err(DailError::Config("remote client needs --endpoint".into()));
        }
        if self.embedder == EmbedderKind::Remote && self.embed_endpoint.is_none() {
            return Err(DailError::Config(
                "remote embedder needs --embed-endpoint".into(),
            ));
        }
        if self.mode == RunMode::StaticFewShot && self.static_demos.is_none() {
            return Err(DailError::Config(
                "static_few_shot mode needs --static-demos".into(),
            ));
        }
        if self.embed_dim == 0 {
            return Err(DailError::Config("embed dim must be positive".into()));
        }
        Ok(())
    }

    pub fn echo(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(self)?)
    }
}

/// Operational controls that do not alter results: interruption point,
/// resume state, and output paths.
#[derive(Default)]
pub struct RunControl {
    /// Stop after this many total completed records, flushing a partial
    /// report and a bank snapshot.
    pub stop_after: Option<usize>,
    /// Records completed by a previous interrupted run, in stream order.
    pub resume_records: Vec<PredictionRecord>,
    /// Bank rebuilt from the snapshot matching `resume_records`.
    pub resume_bank: Option<MemoryBank>,
    /// Report file, written incrementally.
    pub report_path: Option<PathBuf>,
    /// Bank snapshot file, written on interruption and on completion.
    pub snapshot_path: Option<PathBuf>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub completed: bool,
}

/// Build the model client named by the config. The mock oracle needs the
/// gold-labeled dataset it will be queried about.
pub fn build_client(config: &RunConfig, dataset: &Dataset) -> Result<Box<dyn LlmClient>> {
    match config.client {
        ClientKind::Mock => Ok(Box::new(MockOracle::new(
            dataset,
            PromptTemplate::multiple_choice(),
            config.seed,
        )?)),
        ClientKind::Remote => {
            let endpoint = config
                .endpoint
                .clone()
                .ok_or_else(|| DailError::Config("remote client needs --endpoint".into()))?;
            Ok(Box::new(RemoteClient::new(
                endpoint,
                config.model.clone(),
                config.max_tokens,
            )?))
        }
    }
}

pub fn build_embedder(config: &RunConfig) -> Result<Box<dyn Embedder>> {
    config.embedder_config()?.build()
}

/// The order entries are processed in: file order, or a seed-deterministic
/// permutation when the config asks for a shuffled stream.
pub fn stream_order(config: &RunConfig, dataset: &Dataset) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    if config.order == StreamOrder::Shuffled {
        let mut rng = rng_from_parts(&[config.seed, RNG_TAG_SHUFFLE, 0]);
        order.shuffle(&mut rng);
    }
    order
}

/// Static few-shot demonstrations: (id, query text, label) per file entry,
/// in file order. Every entry must carry a gold label.
fn load_static_demos(path: &str) -> Result<Vec<(String, String, String)>> {
    let demos = load_dataset(Path::new(path))?;
    demos
        .entries()
        .iter()
        .map(|e| {
            let gold = e.gold.clone().ok_or_else(|| DailError::Dataset {
                line: 0,
                msg: format!("static demo {:?} has no gold label", e.id),
            })?;
            Ok((e.id.clone(), e.query_text(), gold))
        })
        .collect()
}

enum Sink {
    File(ReportWriter<BufWriter<File>>),
    Null,
}

impl Sink {
    fn record(&mut self, record: &PredictionRecord) -> Result<()> {
        if let Sink::File(w) = self {
            w.record(record)?;
        }
        Ok(())
    }
}

/// Run the stream to completion (or to the configured stop point).
///
/// Resumable: pass the records recovered from a partial report plus the
/// bank loaded from its snapshot, and the run continues from the next
/// entry; the rewritten report is byte-identical to an uninterrupted run
/// with the same config.
pub fn run_stream(
    config: &RunConfig,
    dataset: &Dataset,
    client: &dyn LlmClient,
    embedder: &dyn Embedder,
    ctrl: &RunControl,
) -> Result<RunOutcome> {
    config.validate()?;
    let template = PromptTemplate::multiple_choice();
    let order = stream_order(config, dataset);

    // Resumed records must be a prefix of the stream.
    let done = ctrl.resume_records.len();
    if done > order.len() {
        return Err(DailError::Config(
            "resume state has more records than the dataset".into(),
        ));
    }
    for (record, &entry_idx) in ctrl.resume_records.iter().zip(order.iter()) {
        if record.id != dataset.entries()[entry_idx].id {
            return Err(DailError::Config(format!(
                "resume state does not match the stream order at record {:?}",
                record.id
            )));
        }
    }

    let mut bank = match &ctrl.resume_bank {
        Some(b) => {
            if done == 0 {
                return Err(DailError::Config(
                    "resume bank given without resume records".into(),
                ));
            }
            if b.config() != &config.bank_config() {
                return Err(DailError::Config(
                    "resume bank was built with a different configuration".into(),
                ));
            }
            b.clone()
        }
        None => {
            if done > 0 && config.mode == RunMode::Dail {
                return Err(DailError::Config(
                    "resuming a dail run needs the bank snapshot".into(),
                ));
            }
            MemoryBank::new(config.bank_config())?
        }
    };

    let static_demos = match (&config.mode, &config.static_demos) {
        (RunMode::StaticFewShot, Some(path)) => load_static_demos(path)?,
        _ => Vec::new(),
    };

    let echo = config.echo()?;
    let mut sink = match &ctrl.report_path {
        Some(path) => {
            let file = File::create(path)?;
            let mut writer = ReportWriter::new(BufWriter::new(file), &echo)?;
            for record in &ctrl.resume_records {
                writer.record(record)?;
            }
            Sink::File(writer)
        }
        None => Sink::Null,
    };

    let mut records: Vec<PredictionRecord> = ctrl.resume_records.clone();
    let started = std::time::Instant::now();

    for &entry_idx in order.iter().skip(done) {
        if let Some(stop) = ctrl.stop_after {
            if records.len() >= stop {
                return finish_interrupted(config, dataset, sink, records, &bank, ctrl, started);
            }
        }
        let entry = &dataset.entries()[entry_idx];
        let query_text = entry.query_text();
        let labels = entry.labels();

        // (id, text, label) per demonstration, plus the query embedding in
        // dail mode (reused for the post-prediction insert).
        let mut query_embedding = None;
        let demos: Vec<(String, String, String)> = match config.mode {
            RunMode::ZeroShot => Vec::new(),
            RunMode::StaticFewShot => static_demos.clone(),
            RunMode::Dail => {
                let emb = embedder.embed(&query_text)?;
                let mut selected = bank.select_demonstrations(&query_text, &emb)?;
                query_embedding = Some(emb);
                if config.demo_order == DemoOrder::RelevanceDescending {
                    selected.reverse();
                }
                selected
                    .into_iter()
                    .map(|s| (s.id.0, s.query_text, s.pseudo_label))
                    .collect()
            }
        };

        let demo_refs: Vec<(&str, &str)> = demos
            .iter()
            .map(|(_, t, l)| (t.as_str(), l.as_str()))
            .collect();
        let prompt = build_prompt(&template, &demo_refs, &query_text)?;

        let reply = match client.predict(&prompt, &labels) {
            Ok(r) => r,
            Err(e) => {
                // Fatal client error: flush the partial report, then surface.
                finish_interrupted(config, dataset, sink, records, &bank, ctrl, started)?;
                return Err(e);
            }
        };
        let mapped = map_output_to_label(&reply, &labels);

        records.push(PredictionRecord {
            id: entry.id.clone(),
            demo_ids: demos.iter().map(|(id, _, _)| id.clone()).collect(),
            reply: reply.clone(),
            mapped: mapped.as_option().map(str::to_string),
            gold: entry.gold.clone(),
        });
        sink.record(records.last().expect("just pushed"))?;

        if config.mode == RunMode::Dail {
            // Abstentions carry no usable pseudo-label and stay out of the
            // bank; everything else enters, wrong answers included.
            if let LabelOutcome::Label(pseudo_label) = &mapped {
                let entropy = match &reply.label_probs {
                    Some(probs) => Some(entropy_score(probs)?),
                    None => None,
                };
                bank.insert(
                    SampleId::new(entry.id.clone()),
                    query_text.clone(),
                    pseudo_label.clone(),
                    entropy,
                    query_embedding.expect("embedded above in dail mode"),
                )?;
            }
        }
    }

    let summary = compute_metrics(&records, dataset)?;
    eprintln_elapsed(config, started);
    if let Some(path) = &ctrl.snapshot_path {
        write_bank_snapshot(&bank, path)?;
    }
    let report = RunReport {
        config: echo,
        records,
        summary,
    };
    if let Sink::File(writer) = sink {
        writer.summary(&report.summary)?;
    }
    Ok(RunOutcome {
        report,
        completed: true,
    })
}

fn eprintln_elapsed(config: &RunConfig, started: std::time::Instant) {
    eprintln!(
        "stream finished in {:.2}s (mode {:?}, seed {})",
        started.elapsed().as_secs_f64(),
        config.mode,
        config.seed
    );
}

fn finish_interrupted(
    config: &RunConfig,
    dataset: &Dataset,
    sink: Sink,
    records: Vec<PredictionRecord>,
    bank: &MemoryBank,
    ctrl: &RunControl,
    started: std::time::Instant,
) -> Result<RunOutcome> {
    if let Some(path) = &ctrl.snapshot_path {
        write_bank_snapshot(bank, path)?;
    }
    let completed = records.len();
    if let Sink::File(writer) = sink {
        writer.interrupted(completed)?;
    }
    eprintln_elapsed(config, started);
    let summary = compute_metrics(&records, dataset)?;
    Ok(RunOutcome {
        report: RunReport {
            config: config.echo()?,
            records,
            summary,
        },
        completed: false,
    })
}

fn write_bank_snapshot(bank: &MemoryBank, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    bank.write_snapshot(BufWriter::new(file))
}

/// Load a bank snapshot written by a previous run.
pub fn load_bank_snapshot(path: &Path, config: &RunConfig) -> Result<MemoryBank> {
    let file = File::open(path)?;
    MemoryBank::load_snapshot(BufReader::new(file), config.bank_config())
}

/// Accuracy, abstain, and token metrics over a record set. Abstentions and
/// missing gold labels count as incorrect; the macro average is the mean of
/// per-subset accuracies.
pub fn compute_metrics(records: &[PredictionRecord], dataset: &Dataset) -> Result<RunSummary> {
    let mut by_subset: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut abstains = 0usize;
    let mut correct_total = 0usize;
    let mut input_tokens = 0u64;
    let mut output_tokens = 0u64;
    let mut wall_clock_ms = 0u64;

    for record in records {
        let entry = dataset
            .get(&record.id)
            .ok_or_else(|| DailError::UnknownSample(record.id.clone()))?;
        let slot = by_subset.entry(entry.subset.as_str()).or_insert((0, 0));
        slot.0 += 1;
        let is_correct = match (&record.mapped, &record.gold) {
            (Some(m), Some(g)) => m == g,
            _ => false,
        };
        if is_correct {
            slot.1 += 1;
            correct_total += 1;
        }
        if record.mapped.is_none() {
            abstains += 1;
        }
        input_tokens += record.reply.input_tokens;
        output_tokens += record.reply.output_tokens;
        wall_clock_ms += record.reply.latency_ms;
    }

    let per_subset: Vec<SubsetStats> = by_subset
        .into_iter()
        .map(|(subset, (n, correct))| SubsetStats {
            subset: subset.to_string(),
            n,
            correct,
            accuracy: if n > 0 { correct as f64 / n as f64 } else { 0.0 },
        })
        .collect();
    let macro_accuracy = if per_subset.is_empty() {
        0.0
    } else {
        per_subset.iter().map(|s| s.accuracy).sum::<f64>() / per_subset.len() as f64
    };
    let n = records.len();
    Ok(RunSummary {
        per_subset,
        macro_accuracy,
        micro_accuracy: if n > 0 {
            correct_total as f64 / n as f64
        } else {
            0.0
        },
        abstain_rate: if n > 0 { abstains as f64 / n as f64 } else { 0.0 },
        total_input_tokens: input_tokens,
        total_output_tokens: output_tokens,
        wall_clock_ms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Alpha,
    BankSize,
    Selection,
    Deletion,
    Order,
}

impl SweepAxis {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "alpha" => Ok(SweepAxis::Alpha),
            "m" | "bank-size" | "bank_size" => Ok(SweepAxis::BankSize),
            "selection" => Ok(SweepAxis::Selection),
            "deletion" => Ok(SweepAxis::Deletion),
            "order" => Ok(SweepAxis::Order),
            other => Err(DailError::Config(format!("unknown sweep axis {other:?}"))),
        }
    }

    /// Apply one swept value to a copy of the base config.
    pub fn apply(&self, base: &RunConfig, value: &str) -> Result<RunConfig> {
        let mut config = base.clone();
        match self {
            SweepAxis::Alpha => {
                config.alpha = value
                    .parse()
                    .map_err(|_| DailError::Config(format!("bad alpha {value:?}")))?;
            }
            SweepAxis::BankSize => {
                config.bank_size = value
                    .parse()
                    .map_err(|_| DailError::Config(format!("bad bank size {value:?}")))?;
            }
            SweepAxis::Selection => {
                config.selection = parse_selection(value)?;
            }
            SweepAxis::Deletion => {
                config.deletion = parse_deletion(value)?;
            }
            SweepAxis::Order => {
                config.order = parse_order(value)?;
            }
        }
        Ok(config)
    }
}

pub fn parse_selection(value: &str) -> Result<SelectionStrategy> {
    match value.to_ascii_lowercase().as_str() {
        "random" => Ok(SelectionStrategy::Random),
        "bm25" => Ok(SelectionStrategy::Bm25),
        "topk" => Ok(SelectionStrategy::TopK),
        "dpp" => Ok(SelectionStrategy::Dpp),
        other => Err(DailError::Config(format!(
            "unknown selection strategy {other:?}"
        ))),
    }
}

pub fn parse_deletion(value: &str) -> Result<DeletionStrategy> {
    match value.to_ascii_lowercase().as_str() {
        "random" => Ok(DeletionStrategy::Random),
        "fifo" => Ok(DeletionStrategy::Fifo),
        "diverse" => Ok(DeletionStrategy::Diverse),
        other => Err(DailError::Config(format!(
            "unknown deletion strategy {other:?}"
        ))),
    }
}

pub fn parse_order(value: &str) -> Result<StreamOrder> {
    match value.to_ascii_lowercase().as_str() {
        "sequential" => Ok(StreamOrder::Sequential),
        "shuffled" => Ok(StreamOrder::Shuffled),
        other => Err(DailError::Config(format!("unknown stream order {other:?}"))),
    }
}

/// One complete run per swept value, seeds held fixed, fresh bank and
/// client per run so no state leaks across configurations.
pub fn run_sweep(
    base: &RunConfig,
    dataset: &Dataset,
    axis: SweepAxis,
    values: &[String],
) -> Result<Vec<(String, RunReport)>> {
    if values.is_empty() {
        return Err(DailError::Config("sweep needs at least one value".into()));
    }
    let mut out = Vec::with_capacity(values.len());
    for value in values {
        let config = axis.apply(base, value)?;
        config.validate()?;
        let client = build_client(&config, dataset)?;
        let embedder = build_embedder(&config)?;
        let outcome = run_stream(
            &config,
            dataset,
            client.as_ref(),
            embedder.as_ref(),
            &RunControl::default(),
        )?;
        out.push((value.clone(), outcome.report));
    }
    Ok(out)
}
