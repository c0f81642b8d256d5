//! Line-delimited run reports.
//!
//! A report file is one JSON object per line: a `config` line echoing every
//! knob that affects results, one `record` line per completed prediction,
//! and a trailing `summary` line. Interrupted runs end with an
//! `interrupted` marker instead of a summary and can be resumed; a resumed
//! run rewrites the file so the final bytes match an uninterrupted run.

use crate::client::ModelReply;
use crate::error::{DailError, Result};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// One completed inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub demo_ids: Vec<String>,
    pub reply: ModelReply,
    /// Mapped label, or None for an abstention.
    pub mapped: Option<String>,
    pub gold: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetStats {
    pub subset: String,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub per_subset: Vec<SubsetStats>,
    pub macro_accuracy: f64,
    pub micro_accuracy: f64,
    pub abstain_rate: f64,
    pub total_input_tokens: u64,
    pub total_output_tokens: u64,
    /// Sum of per-record model latencies. Kept deterministic so that a
    /// resumed run reproduces an uninterrupted report byte for byte.
    pub wall_clock_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReportLine {
    Config(serde_json::Value),
    Record(PredictionRecord),
    Summary(RunSummary),
    Interrupted { completed: usize },
}

/// A full run: config echo, every prediction, and the summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: serde_json::Value,
    pub records: Vec<PredictionRecord>,
    pub summary: RunSummary,
}

impl RunReport {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        out.push_str(&serde_json::to_string(&ReportLine::Config(self.config.clone()))?);
        out.push('\n');
        for record in &self.records {
            out.push_str(&serde_json::to_string(&ReportLine::Record(record.clone()))?);
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&ReportLine::Summary(self.summary.clone()))?);
        out.push('\n');
        Ok(out)
    }
}

/// The recoverable part of a report file: the config echo, the completed
/// records, and whether the run had finished.
#[derive(Debug, Clone)]
pub struct PartialReport {
    pub config: serde_json::Value,
    pub records: Vec<PredictionRecord>,
    pub summary: Option<RunSummary>,
}

pub fn read_report<R: BufRead>(reader: R) -> Result<PartialReport> {
    let mut config = None;
    let mut records = Vec::new();
    let mut summary = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: ReportLine = serde_json::from_str(&line).map_err(|e| DailError::Dataset {
            line: i + 1,
            msg: format!("bad report line: {e}"),
        })?;
        match parsed {
            ReportLine::Config(c) => config = Some(c),
            ReportLine::Record(r) => records.push(r),
            ReportLine::Summary(s) => summary = Some(s),
            ReportLine::Interrupted { .. } => {}
        }
    }
    Ok(PartialReport {
        config: config.ok_or_else(|| DailError::Dataset {
            line: 0,
            msg: "report has no config line".into(),
        })?,
        records,
        summary,
    })
}

/// Incremental report writer: flushes each record as it completes so an
/// interrupted run leaves a loadable partial report behind.
pub struct ReportWriter<W: Write> {
    out: W,
}

impl<W: Write> ReportWriter<W> {
    pub fn new(mut out: W, config: &serde_json::Value) -> Result<Self> {
        serde_json::to_writer(&mut out, &ReportLine::Config(config.clone()))?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(ReportWriter { out })
    }

    pub fn record(&mut self, record: &PredictionRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, &ReportLine::Record(record.clone()))?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }

    pub fn summary(mut self, summary: &RunSummary) -> Result<()> {
        serde_json::to_writer(&mut self.out, &ReportLine::Summary(summary.clone()))?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }

    pub fn interrupted(mut self, completed: usize) -> Result<()> {
        serde_json::to_writer(&mut self.out, &ReportLine::Interrupted { completed })?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}
