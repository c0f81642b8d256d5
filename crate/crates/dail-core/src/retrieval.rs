//! Tokenization and Okapi BM25 scoring of stored samples against a query.
//!
//! The index is maintained incrementally as samples enter and leave the
//! memory bank. Document statistics are kept as exact integer sums, so any
//! interleaving of adds and removes leaves the index identical to a rebuild
//! from the surviving documents.

use crate::error::{DailError, Result};
use crate::types::SampleId;
use std::collections::HashMap;

pub const DEFAULT_K1: f64 = 1.5;
pub const DEFAULT_B: f64 = 0.75;

/// A tokenized document: lowercase tokens, no empty strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDoc {
    tokens: Vec<String>,
}

impl TokenizedDoc {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Lowercase the text and split on anything that is not alphanumeric.
/// Punctuation-only fragments disappear because separators never produce
/// tokens. Deterministic by construction.
pub fn tokenize(text: &str) -> TokenizedDoc {
    let tokens = text
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect();
    TokenizedDoc { tokens }
}

/// Incremental Okapi BM25 index keyed by sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct Bm25Index {
    doc_freq: HashMap<String, usize>,
    docs: HashMap<SampleId, TokenizedDoc>,
    total_len: usize,
    k1: f64,
    b: f64,
}

impl Bm25Index {
    pub fn new() -> Self {
        Self::with_params(DEFAULT_K1, DEFAULT_B)
    }

    pub fn with_params(k1: f64, b: f64) -> Self {
        Bm25Index {
            doc_freq: HashMap::new(),
            docs: HashMap::new(),
            total_len: 0,
            k1,
            b,
        }
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        if self.docs.is_empty() {
            0.0
        } else {
            self.total_len as f64 / self.docs.len() as f64
        }
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    pub fn contains(&self, id: &SampleId) -> bool {
        self.docs.contains_key(id)
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &SampleId> {
        self.docs.keys()
    }

    pub fn add(&mut self, id: SampleId, doc: TokenizedDoc) -> Result<()> {
        if self.docs.contains_key(&id) {
            return Err(DailError::DuplicateSample(id.0));
        }
        let mut seen: Vec<&String> = doc.tokens.iter().collect();
        seen.sort_unstable();
        seen.dedup();
        for term in seen {
            *self.doc_freq.entry(term.clone()).or_insert(0) += 1;
        }
        self.total_len += doc.len();
        self.docs.insert(id, doc);
        Ok(())
    }

    pub fn remove(&mut self, id: &SampleId) -> Result<()> {
        let doc = self
            .docs
            .remove(id)
            .ok_or_else(|| DailError::UnknownSample(id.0.clone()))?;
        let mut seen: Vec<&String> = doc.tokens.iter().collect();
        seen.sort_unstable();
        seen.dedup();
        for term in seen {
            match self.doc_freq.get_mut(term) {
                Some(n) if *n > 1 => *n -= 1,
                Some(_) => {
                    self.doc_freq.remove(term);
                }
                None => unreachable!("doc_freq missing indexed term"),
            }
        }
        self.total_len -= doc.len();
        Ok(())
    }

    /// Okapi BM25 score of the stored document `id` against `query`.
    ///
    /// Uses the nonnegative IDF variant `ln(1 + (N - df + 0.5) / (df + 0.5))`
    /// so scores never go negative and min-max normalization downstream stays
    /// well behaved. Query terms contribute once per occurrence in the query
    /// token list.
    pub fn score(&self, query: &TokenizedDoc, id: &SampleId) -> Result<f64> {
        let doc = self
            .docs
            .get(id)
            .ok_or_else(|| DailError::UnknownSample(id.0.clone()))?;

        let n = self.docs.len() as f64;
        let avg = self.avg_doc_len();
        let mut tf: HashMap<&str, f64> = HashMap::new();
        for t in doc.tokens() {
            *tf.entry(t.as_str()).or_insert(0.0) += 1.0;
        }

        let mut score = 0.0;
        for term in query.tokens() {
            let Some(&f) = tf.get(term.as_str()) else {
                continue;
            };
            let df = self.doc_freq(term) as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let norm = self.k1 * (1.0 - self.b + self.b * doc.len() as f64 / avg);
            score += idf * f * (self.k1 + 1.0) / (f + norm);
        }
        Ok(score)
    }
}

impl Default for Bm25Index {
    fn default() -> Self {
        Self::new()
    }
}
