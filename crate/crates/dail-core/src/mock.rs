//! Deterministic mock oracle over a gold-labeled dataset.
//!
//! The oracle parses the prompt back into demonstrations and query, looks
//! both up in its registry (topic = the entry's subset, truth = its gold
//! label), and answers correctly with a probability that depends on the
//! demonstrations:
//!
//! - no demonstration of the query's topic: base probability `p0`;
//! - at least one same-topic demonstration carrying its own correct
//!   pseudo-label: `p1`;
//! - any same-topic demonstration carrying a wrong pseudo-label caps the
//!   probability back at `p0`, even if a correct one is present.
//!
//! Randomness comes from the oracle seed and the query id only, so replies
//! are reproducible and independent of stream order. Emitted label
//! probabilities are peaked when the sampled answer is correct and flat
//! when it is wrong, which makes the stored entropy informative.

use crate::client::{LlmClient, ModelReply};
use crate::dataset::Dataset;
use crate::error::{DailError, Result};
use crate::prompt::{parse_prompt, PromptTemplate};
use crate::types::{fnv1a64, rng_from_parts};
use rand::Rng;
use std::collections::HashMap;

pub const DEFAULT_P0: f64 = 0.55;
pub const DEFAULT_P1: f64 = 0.95;

const RNG_TAG_ORACLE: u64 = 11;

/// Probability put on the chosen label when the sampled answer is correct
/// (remainder spread uniformly), and when it is wrong.
const PEAKED_MASS: f64 = 0.85;
const FLAT_MASS: f64 = 0.40;

#[derive(Debug, Clone)]
struct RegistryEntry {
    topic: String,
    gold: String,
    labels: Vec<String>,
    id_hash: u64,
}

/// Mock model client for a dataset with gold labels.
pub struct MockOracle {
    template: PromptTemplate,
    by_query_text: HashMap<String, RegistryEntry>,
    p0: f64,
    p1: f64,
    seed: u64,
}

impl MockOracle {
    pub fn new(dataset: &Dataset, template: PromptTemplate, seed: u64) -> Result<Self> {
        Self::with_probs(dataset, template, seed, DEFAULT_P0, DEFAULT_P1)
    }

    pub fn with_probs(
        dataset: &Dataset,
        template: PromptTemplate,
        seed: u64,
        p0: f64,
        p1: f64,
    ) -> Result<Self> {
        let mut by_query_text = HashMap::new();
        for entry in dataset.entries() {
            let gold = entry.gold.clone().ok_or_else(|| {
                DailError::Config(format!(
                    "mock oracle needs gold labels; entry {:?} has none",
                    entry.id
                ))
            })?;
            by_query_text.insert(
                entry.query_text(),
                RegistryEntry {
                    topic: entry.subset.clone(),
                    gold,
                    labels: entry.labels(),
                    id_hash: fnv1a64(entry.id.as_bytes(), 0),
                },
            );
        }
        Ok(MockOracle {
            template,
            by_query_text,
            p0,
            p1,
            seed,
        })
    }

    fn lookup(&self, query_text: &str, what: &str) -> Result<&RegistryEntry> {
        self.by_query_text.get(query_text).ok_or_else(|| {
            DailError::PromptParse(format!("{what} text not found in the oracle registry"))
        })
    }
}

impl LlmClient for MockOracle {
    fn predict(&self, prompt: &str, labels: &[String]) -> Result<ModelReply> {
        if prompt.is_empty() {
            return Err(DailError::InvalidInput("empty prompt".into()));
        }
        let (demos, query_text) = parse_prompt(&self.template, prompt)?;
        let entry = self.lookup(&query_text, "query")?;

        let mut correct_match = false;
        let mut wrong_match = false;
        for (demo_text, demo_label) in &demos {
            let demo = self.lookup(demo_text, "demonstration")?;
            if demo.topic == entry.topic {
                if *demo_label == demo.gold {
                    correct_match = true;
                } else {
                    wrong_match = true;
                }
            }
        }
        let p_correct = if wrong_match {
            self.p0
        } else if correct_match {
            self.p1
        } else {
            self.p0
        };

        let mut rng = rng_from_parts(&[self.seed, RNG_TAG_ORACLE, entry.id_hash]);
        let correct = rng.random::<f64>() < p_correct;
        let chosen = if correct {
            entry.gold.clone()
        } else {
            let wrong: Vec<&String> =
                entry.labels.iter().filter(|l| **l != entry.gold).collect();
            if wrong.is_empty() {
                entry.gold.clone()
            } else {
                wrong[rng.random_range(0..wrong.len())].clone()
            }
        };

        let peak = if correct { PEAKED_MASS } else { FLAT_MASS };
        let n = labels.len().max(1);
        let rest = if n > 1 { (1.0 - peak) / (n - 1) as f64 } else { 0.0 };
        let probs: Vec<f64> = labels
            .iter()
            .map(|l| if *l == chosen { peak } else { rest })
            .collect();

        ModelReply {
            text: chosen,
            label_probs: Some(probs),
            input_tokens: prompt.split_whitespace().count() as u64,
            output_tokens: 1,
            latency_ms: 0,
        }
        .normalize_probs()
    }
}
