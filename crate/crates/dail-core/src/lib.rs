//! Demonstration-augmented in-context learning.
//!
//! This crate implements a streaming inference loop in which a model's own
//! previously answered queries are stored in a bounded memory bank and reused
//! as in-context demonstrations for later queries. No external demonstration
//! pool is required: at step 0 the bank is empty and inference is zero-shot;
//! after each prediction the (query, pseudo-label) pair is inserted and
//! becomes selectable from step t+1 on.
//!
//! The moving parts:
//!
//! - [`retrieval`]: tokenization and an incrementally maintained Okapi BM25
//!   index over stored queries.
//! - [`embedding`]: unit-norm text embeddings (deterministic feature-hashing
//!   offline, or a remote embeddings service) and cosine similarity.
//! - [`scoring`]: entropy of a prediction's label distribution, min-max
//!   normalization, and the fused score `N(selection) - alpha * N(entropy)`.
//! - [`dpp`]: greedy MAP subset selection on a quality/similarity kernel, used
//!   to diversify the top candidates.
//! - [`bank`]: the bounded memory bank with entry, selection (random / bm25 /
//!   topk / dpp) and deletion (random / fifo / diverse) strategies.
//! - [`prompt`]: template-based prompt construction and its inverse parser.
//! - [`client`]: the model-client abstraction, an OpenAI-compatible remote
//!   completion client, and output-to-label mapping.
//! - [`mock`]: a deterministic synthetic-task oracle used for offline runs
//!   and end-to-end tests.
//! - [`dataset`] / [`synth`]: JSONL dataset ingestion and a synthetic
//!   multiple-choice task generator.
//! - [`run`] / [`report`]: the sequential streaming harness, metrics, sweeps,
//!   and the line-delimited report format with interrupt/resume support.

pub mod bank;
pub mod client;
pub mod dataset;
pub mod dpp;
pub mod embedding;
pub mod error;
pub mod mock;
pub mod prompt;
pub mod report;
pub mod retrieval;
pub mod run;
pub mod scoring;
pub mod synth;
pub mod types;

pub use error::{DailError, Result};
pub use types::SampleId;
