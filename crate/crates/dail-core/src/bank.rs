//! The bounded memory bank of previously answered queries.
//!
//! Samples enter after every prediction (entry strategy), are scored and
//! selected as demonstrations for new queries (selection strategy), and half
//! of them are evicted whenever an insert finds the bank at capacity
//! (deletion strategy). A BM25 index over the stored query texts is kept in
//! lockstep with the samples.
//!
//! All randomness is derived from the bank seed plus durable counters, so a
//! bank reloaded from a snapshot continues exactly as the original would
//! have. Mutations take `&mut self` and selection takes `&self`; callers get
//! single-writer semantics from the borrow checker.

use crate::embedding::{cosine, Embedding};
use crate::error::{DailError, Result};
use crate::retrieval::{tokenize, Bm25Index};
use crate::scoring::{fuse_scores, ScoredCandidate};
use crate::types::{rng_from_parts, SampleId};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

pub const DEFAULT_CAPACITY: usize = 2000;
pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_K: usize = 4;
pub const DEFAULT_DPP_CANDIDATES: usize = 10;

const RNG_TAG_SELECT: u64 = 1;
const RNG_TAG_DELETE: u64 = 2;

/// One stored (query, pseudo-label) record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: SampleId,
    pub query_text: String,
    pub pseudo_label: String,
    /// Entropy of the model's label distribution when this sample was
    /// predicted; absent when the client supplied no probabilities.
    pub entropy: Option<f64>,
    pub embedding: Embedding,
    pub insertion_index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    Random,
    Bm25,
    TopK,
    Dpp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeletionStrategy {
    Random,
    Fifo,
    Diverse,
}

/// Bank knobs. `capacity` must be at least 2: the halving eviction rule
/// removes floor(n/2) samples, which for a single-slot bank removes nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankConfig {
    pub capacity: usize,
    pub selection: SelectionStrategy,
    pub deletion: DeletionStrategy,
    pub alpha: f64,
    pub k: usize,
    pub dpp_candidates: usize,
    pub rng_seed: u64,
    pub bm25_k1: f64,
    pub bm25_b: f64,
}

impl Default for BankConfig {
    fn default() -> Self {
        BankConfig {
            capacity: DEFAULT_CAPACITY,
            selection: SelectionStrategy::Dpp,
            deletion: DeletionStrategy::Diverse,
            alpha: DEFAULT_ALPHA,
            k: DEFAULT_K,
            dpp_candidates: DEFAULT_DPP_CANDIDATES,
            rng_seed: 0,
            bm25_k1: crate::retrieval::DEFAULT_K1,
            bm25_b: crate::retrieval::DEFAULT_B,
        }
    }
}

impl BankConfig {
    pub fn validate(&self) -> Result<()> {
        if self.capacity < 2 {
            return Err(DailError::Config("bank capacity must be >= 2".into()));
        }
        if self.k == 0 {
            return Err(DailError::Config("k must be >= 1".into()));
        }
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(DailError::Config("alpha must be finite and >= 0".into()));
        }
        if self.dpp_candidates == 0 {
            return Err(DailError::Config("dpp candidate count must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MemoryBank {
    config: BankConfig,
    samples: Vec<Sample>,
    live_ids: HashSet<SampleId>,
    bm25: Bm25Index,
    next_insertion_index: u64,
}

impl MemoryBank {
    pub fn new(config: BankConfig) -> Result<Self> {
        config.validate()?;
        let bm25 = Bm25Index::with_params(config.bm25_k1, config.bm25_b);
        Ok(MemoryBank {
            config,
            samples: Vec::new(),
            live_ids: HashSet::new(),
            bm25,
            next_insertion_index: 0,
        })
    }

    pub fn config(&self) -> &BankConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn bm25_index(&self) -> &Bm25Index {
        &self.bm25
    }

    /// Add a freshly predicted sample. If the bank is at capacity the
    /// deletion strategy first removes half, so the post-insert size is at
    /// most capacity/2 + 1. Insertion indices increase monotonically over
    /// the bank's lifetime.
    pub fn insert(
        &mut self,
        id: SampleId,
        query_text: String,
        pseudo_label: String,
        entropy: Option<f64>,
        embedding: Embedding,
    ) -> Result<()> {
        if self.live_ids.contains(&id) {
            return Err(DailError::DuplicateSample(id.0));
        }
        if self.samples.len() == self.config.capacity {
            self.delete_half()?;
        }
        let insertion_index = self.next_insertion_index;
        self.next_insertion_index += 1;
        self.bm25.add(id.clone(), tokenize(&query_text))?;
        self.live_ids.insert(id.clone());
        self.samples.push(Sample {
            id,
            query_text,
            pseudo_label,
            entropy,
            embedding,
            insertion_index,
        });
        Ok(())
    }

    /// Entropy participates only when every stored sample carries one;
    /// otherwise the entropy term is dropped (alpha treated as 0).
    fn effective_alpha(&self) -> f64 {
        if self.samples.iter().all(|s| s.entropy.is_some()) {
            self.config.alpha
        } else {
            0.0
        }
    }

    fn scored_candidates(&self, query: &TokenedQuery<'_>) -> Result<Vec<ScoredCandidate>> {
        let mut candidates = Vec::with_capacity(self.samples.len());
        for sample in &self.samples {
            let raw_selection = match self.config.selection {
                SelectionStrategy::Random => 0.0,
                SelectionStrategy::Bm25 => self.bm25.score(query.tokens, &sample.id)?,
                SelectionStrategy::TopK | SelectionStrategy::Dpp => {
                    cosine(&sample.embedding, query.embedding)?
                }
            };
            let raw_entropy = sample.entropy.unwrap_or(0.0);
            candidates.push(ScoredCandidate::new(
                sample.id.clone(),
                raw_selection,
                raw_entropy,
            ));
        }
        Ok(candidates)
    }

    /// Pick up to K demonstrations for the incoming query.
    ///
    /// Empty bank: empty list (zero-shot). Fewer than K samples: all of
    /// them. Otherwise every sample is scored, scores are fused, and the
    /// strategy picks: random/bm25/topk take the top K by fused score
    /// (random with no entropy term is seeded uniform sampling instead),
    /// dpp refines the top candidates through greedy MAP selection.
    ///
    /// The returned list is ordered by ascending fused score, so the most
    /// relevant demonstration sits last, nearest the query.
    pub fn select_demonstrations(
        &self,
        query_text: &str,
        query_embedding: &Embedding,
    ) -> Result<Vec<Sample>> {
        if self.samples.is_empty() {
            return Ok(Vec::new());
        }
        let k_eff = self.config.k.min(self.samples.len());
        let alpha = self.effective_alpha();

        if self.config.selection == SelectionStrategy::Random && alpha == 0.0 {
            // Uniform pick; all fused scores tie at zero, so order the
            // result by insertion index.
            let mut rng = rng_from_parts(&[
                self.config.rng_seed,
                RNG_TAG_SELECT,
                self.next_insertion_index,
            ]);
            let mut indices: Vec<usize> = (0..self.samples.len()).collect();
            indices.shuffle(&mut rng);
            let mut picked: Vec<usize> = indices.into_iter().take(k_eff).collect();
            picked.sort_by_key(|&i| self.samples[i].insertion_index);
            return Ok(picked.into_iter().map(|i| self.samples[i].clone()).collect());
        }

        let query = TokenedQuery {
            tokens: &tokenize(query_text),
            embedding: query_embedding,
        };
        let candidates = fuse_scores(self.scored_candidates(&query)?, alpha)?;

        // Rank by fused score, older samples first on ties.
        let mut ranked: Vec<usize> = (0..candidates.len()).collect();
        ranked.sort_by(|&a, &b| {
            candidates[b]
                .fused
                .partial_cmp(&candidates[a].fused)
                .expect("fused scores are finite")
                .then(self.samples[a].insertion_index.cmp(&self.samples[b].insertion_index))
        });

        let chosen: Vec<usize> = if self.config.selection == SelectionStrategy::Dpp
            && self.samples.len() > k_eff
        {
            let c = self
                .config
                .dpp_candidates
                .max(k_eff)
                .min(self.samples.len());
            let pool: Vec<usize> = ranked[..c].to_vec();
            let pool_candidates: Vec<ScoredCandidate> =
                pool.iter().map(|&i| candidates[i].clone()).collect();
            let pool_embeddings: Vec<Embedding> =
                pool.iter().map(|&i| self.samples[i].embedding.clone()).collect();
            let kernel = crate::dpp::build_kernel(&pool_candidates, &pool_embeddings)?;
            crate::dpp::greedy_map_select(&kernel, k_eff.min(c))?
                .into_iter()
                .map(|i| pool[i])
                .collect()
        } else {
            ranked[..k_eff].to_vec()
        };

        // Ascending fused score; most relevant demonstration last.
        let mut ordered = chosen;
        ordered.sort_by(|&a, &b| {
            candidates[a]
                .fused
                .partial_cmp(&candidates[b].fused)
                .expect("fused scores are finite")
                .then(self.samples[a].insertion_index.cmp(&self.samples[b].insertion_index))
        });
        Ok(ordered.into_iter().map(|i| self.samples[i].clone()).collect())
    }

    /// Remove floor(n/2) samples according to the deletion strategy.
    pub fn delete_half(&mut self) -> Result<()> {
        let n = self.samples.len();
        if n < 2 {
            return Err(DailError::InvalidInput(
                "delete_half needs at least 2 samples".into(),
            ));
        }
        let remove_count = n / 2;
        let victims: Vec<usize> = match self.config.deletion {
            DeletionStrategy::Random => {
                let mut rng = rng_from_parts(&[
                    self.config.rng_seed,
                    RNG_TAG_DELETE,
                    self.next_insertion_index,
                ]);
                let mut indices: Vec<usize> = (0..n).collect();
                indices.shuffle(&mut rng);
                indices.into_iter().take(remove_count).collect()
            }
            DeletionStrategy::Fifo => {
                let mut by_age: Vec<usize> = (0..n).collect();
                by_age.sort_by_key(|&i| self.samples[i].insertion_index);
                by_age.into_iter().take(remove_count).collect()
            }
            DeletionStrategy::Diverse => {
                let redundancy = self.redundancy_by_index()?;
                let mut by_redundancy: Vec<usize> = (0..n).collect();
                // Most redundant first; among ties the newer sample goes.
                by_redundancy.sort_by(|&a, &b| {
                    redundancy[b]
                        .partial_cmp(&redundancy[a])
                        .expect("cosines are finite")
                        .then(self.samples[b].insertion_index.cmp(&self.samples[a].insertion_index))
                });
                by_redundancy.into_iter().take(remove_count).collect()
            }
        };

        let victim_set: HashSet<usize> = victims.into_iter().collect();
        let mut survivors = Vec::with_capacity(n - remove_count);
        for (i, sample) in self.samples.drain(..).enumerate() {
            if victim_set.contains(&i) {
                self.bm25.remove(&sample.id)?;
                self.live_ids.remove(&sample.id);
            } else {
                survivors.push(sample);
            }
        }
        self.samples = survivors;
        Ok(())
    }

    fn redundancy_by_index(&self) -> Result<Vec<f64>> {
        let n = self.samples.len();
        let mut redundancy = vec![f64::NEG_INFINITY; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let c = cosine(&self.samples[i].embedding, &self.samples[j].embedding)?;
                if c > redundancy[i] {
                    redundancy[i] = c;
                }
                if c > redundancy[j] {
                    redundancy[j] = c;
                }
            }
        }
        Ok(redundancy)
    }

    /// Redundancy of each sample: its maximum cosine similarity to any other
    /// sample in the bank. Needs at least two samples.
    pub fn diversity_redundancy(&self) -> Result<HashMap<SampleId, f64>> {
        if self.samples.len() < 2 {
            return Err(DailError::InvalidInput(
                "redundancy needs at least 2 samples".into(),
            ));
        }
        let by_index = self.redundancy_by_index()?;
        Ok(self
            .samples
            .iter()
            .zip(by_index)
            .map(|(s, r)| (s.id.clone(), r))
            .collect())
    }

    /// Write the bank as line-delimited sample records.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        for sample in &self.samples {
            serde_json::to_writer(&mut w, sample)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Rebuild a bank from a snapshot. The insertion counter resumes at
    /// max(insertion_index) + 1; snapshots are written at record boundaries
    /// (right after an insert), where that recovery is exact.
    pub fn load_snapshot<R: BufRead>(reader: R, config: BankConfig) -> Result<Self> {
        config.validate()?;
        let mut bank = MemoryBank::new(config)?;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let sample: Sample = serde_json::from_str(&line).map_err(|e| DailError::Dataset {
                line: lineno + 1,
                msg: format!("bad snapshot record: {e}"),
            })?;
            sample.embedding.validate_unit()?;
            if let Some(h) = sample.entropy {
                if !h.is_finite() || h < 0.0 {
                    return Err(DailError::Dataset {
                        line: lineno + 1,
                        msg: "entropy must be finite and nonnegative".into(),
                    });
                }
            }
            if bank.live_ids.contains(&sample.id) {
                return Err(DailError::DuplicateSample(sample.id.0));
            }
            if bank.samples.len() == bank.config.capacity {
                return Err(DailError::Config(
                    "snapshot holds more samples than the configured capacity".into(),
                ));
            }
            bank.bm25.add(sample.id.clone(), tokenize(&sample.query_text))?;
            bank.live_ids.insert(sample.id.clone());
            bank.next_insertion_index = bank.next_insertion_index.max(sample.insertion_index + 1);
            bank.samples.push(sample);
        }
        Ok(bank)
    }
}

struct TokenedQuery<'a> {
    tokens: &'a crate::retrieval::TokenizedDoc,
    embedding: &'a Embedding,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{Embedder, HashingEmbedder};

    fn test_config(selection: SelectionStrategy, deletion: DeletionStrategy) -> BankConfig {
        BankConfig {
            capacity: 8,
            selection,
            deletion,
            alpha: 0.1,
            k: 4,
            dpp_candidates: 10,
            rng_seed: 42,
            ..BankConfig::default()
        }
    }

    fn unit(values: Vec<f64>) -> Embedding {
        Embedding::normalized(values).unwrap()
    }

    fn insert_n(bank: &mut MemoryBank, n: usize, entropy: Option<f64>) {
        let embedder = HashingEmbedder::new(8, 1).unwrap();
        for i in 0..n {
            let text = format!("sample text number {i}");
            let emb = embedder.embed(&text).unwrap();
            bank.insert(
                SampleId::new(format!("q{i}")),
                text,
                "A".to_string(),
                entropy,
                emb,
            )
            .unwrap();
        }
    }

    #[test]
    fn insert_into_empty_bank() {
        let mut bank =
            MemoryBank::new(test_config(SelectionStrategy::TopK, DeletionStrategy::Fifo)).unwrap();
        insert_n(&mut bank, 1, Some(0.5));
        assert_eq!(bank.len(), 1);
    }

    #[test]
    fn insert_at_capacity_halves_first() {
        let mut bank =
            MemoryBank::new(test_config(SelectionStrategy::TopK, DeletionStrategy::Fifo)).unwrap();
        insert_n(&mut bank, 8, Some(0.5));
        assert_eq!(bank.len(), 8);
        insert_n_more(&mut bank, 8, 1);
        assert_eq!(bank.len(), 5); // 8 -> 4 survivors + 1 new
    }

    fn insert_n_more(bank: &mut MemoryBank, start: usize, n: usize) {
        let embedder = HashingEmbedder::new(8, 1).unwrap();
        for i in start..start + n {
            let text = format!("sample text number {i}");
            let emb = embedder.embed(&text).unwrap();
            bank.insert(
                SampleId::new(format!("q{i}")),
                text,
                "A".to_string(),
                Some(0.5),
                emb,
            )
            .unwrap();
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let mut bank =
            MemoryBank::new(test_config(SelectionStrategy::TopK, DeletionStrategy::Fifo)).unwrap();
        insert_n(&mut bank, 1, None);
        let emb = unit(vec![1.0, 0.0]);
        assert!(matches!(
            bank.insert(SampleId::new("q0"), "dup".into(), "A".into(), None, emb),
            Err(DailError::DuplicateSample(_))
        ));
    }

    #[test]
    fn capacity_below_two_rejected() {
        let mut cfg = test_config(SelectionStrategy::TopK, DeletionStrategy::Fifo);
        cfg.capacity = 1;
        assert!(MemoryBank::new(cfg).is_err());
    }

    #[test]
    fn empty_bank_selects_nothing() {
        let bank =
            MemoryBank::new(test_config(SelectionStrategy::TopK, DeletionStrategy::Fifo)).unwrap();
        let e = unit(vec![1.0, 0.0]);
        assert!(bank.select_demonstrations("anything", &e).unwrap().is_empty());
    }

    #[test]
    fn bank_smaller_than_k_returns_all() {
        let mut bank =
            MemoryBank::new(test_config(SelectionStrategy::TopK, DeletionStrategy::Fifo)).unwrap();
        insert_n(&mut bank, 2, Some(0.5));
        let embedder = HashingEmbedder::new(8, 1).unwrap();
        let q = embedder.embed("sample text number 0").unwrap();
        let demos = bank.select_demonstrations("sample text number 0", &q).unwrap();
        assert_eq!(demos.len(), 2);
    }

    #[test]
    fn topk_finds_token_overlapping_sample() {
        let mut cfg = test_config(SelectionStrategy::TopK, DeletionStrategy::Fifo);
        cfg.k = 2;
        let mut bank = MemoryBank::new(cfg).unwrap();
        let embedder = HashingEmbedder::new(64, 1).unwrap();
        let texts = [
            "the solar panel converts sunlight into electricity",
            "a recipe for sourdough bread needs flour and patience",
            "tax law changes affect small business owners",
            "migratory birds navigate by the stars at night",
            "the solar panel array powers the whole cabin",
        ];
        for (i, text) in texts.iter().enumerate() {
            bank.insert(
                SampleId::new(format!("q{i}")),
                text.to_string(),
                "A".to_string(),
                Some(0.5),
                embedder.embed(text).unwrap(),
            )
            .unwrap();
        }
        let query = "how much electricity does a solar panel make";
        let q_emb = embedder.embed(query).unwrap();

        // Brute-force cosine oracle over the same embeddings.
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, text) in texts.iter().enumerate() {
            let c = cosine(&embedder.embed(text).unwrap(), &q_emb).unwrap();
            if c > best.1 {
                best = (i, c);
            }
        }

        let demos = bank.select_demonstrations(query, &q_emb).unwrap();
        assert!(demos.iter().any(|d| d.id.as_str() == format!("q{}", best.0)));
    }

    #[test]
    fn demos_ordered_ascending_by_relevance() {
        let mut cfg = test_config(SelectionStrategy::TopK, DeletionStrategy::Fifo);
        cfg.k = 3;
        cfg.alpha = 0.0;
        let mut bank = MemoryBank::new(cfg).unwrap();
        // Hand-placed embeddings with known cosines to the query (1, 0).
        let placements = [
            ("far", unit(vec![0.1, 1.0])),
            ("near", unit(vec![1.0, 0.1])),
            ("mid", unit(vec![1.0, 1.0])),
        ];
        for (name, emb) in placements {
            bank.insert(SampleId::new(name), name.to_string(), "A".into(), None, emb)
                .unwrap();
        }
        let q = unit(vec![1.0, 0.0]);
        let demos = bank.select_demonstrations("q", &q).unwrap();
        let ids: Vec<&str> = demos.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, ["far", "mid", "near"]); // most relevant last
    }

    #[test]
    fn fifo_keeps_newest_half() {
        let mut bank =
            MemoryBank::new(test_config(SelectionStrategy::TopK, DeletionStrategy::Fifo)).unwrap();
        insert_n(&mut bank, 8, Some(0.5));
        bank.delete_half().unwrap();
        let mut indices: Vec<u64> = bank.samples().iter().map(|s| s.insertion_index).collect();
        indices.sort_unstable();
        assert_eq!(indices, [4, 5, 6, 7]);
    }

    #[test]
    fn diverse_deletion_keeps_the_outlier() {
        let mut bank = MemoryBank::new(test_config(
            SelectionStrategy::TopK,
            DeletionStrategy::Diverse,
        ))
        .unwrap();
        let same = unit(vec![1.0, 0.0]);
        for i in 0..3 {
            bank.insert(
                SampleId::new(format!("dup{i}")),
                format!("dup{i}"),
                "A".into(),
                None,
                same.clone(),
            )
            .unwrap();
        }
        bank.insert(
            SampleId::new("outlier"),
            "outlier".into(),
            "A".into(),
            None,
            unit(vec![0.0, 1.0]),
        )
        .unwrap();
        bank.delete_half().unwrap();
        assert!(bank.samples().iter().any(|s| s.id.as_str() == "outlier"));
        assert_eq!(bank.len(), 2);
    }

    #[test]
    fn random_deletion_is_seed_deterministic() {
        let make = || {
            let mut bank = MemoryBank::new(test_config(
                SelectionStrategy::TopK,
                DeletionStrategy::Random,
            ))
            .unwrap();
            insert_n(&mut bank, 8, Some(0.5));
            bank.delete_half().unwrap();
            let mut ids: Vec<String> =
                bank.samples().iter().map(|s| s.id.to_string()).collect();
            ids.sort();
            ids
        };
        assert_eq!(make(), make());
    }

    #[test]
    fn delete_half_rejects_tiny_banks() {
        let mut bank =
            MemoryBank::new(test_config(SelectionStrategy::TopK, DeletionStrategy::Fifo)).unwrap();
        insert_n(&mut bank, 1, None);
        assert!(bank.delete_half().is_err());
    }

    #[test]
    fn redundancy_identical_and_orthogonal() {
        let mut bank = MemoryBank::new(test_config(
            SelectionStrategy::TopK,
            DeletionStrategy::Diverse,
        ))
        .unwrap();
        let same = unit(vec![1.0, 0.0]);
        bank.insert(SampleId::new("a"), "a".into(), "A".into(), None, same.clone())
            .unwrap();
        bank.insert(SampleId::new("b"), "b".into(), "A".into(), None, same)
            .unwrap();
        let red = bank.diversity_redundancy().unwrap();
        assert_eq!(red[&SampleId::new("a")], 1.0);
        assert_eq!(red[&SampleId::new("b")], 1.0);

        let mut bank2 = MemoryBank::new(test_config(
            SelectionStrategy::TopK,
            DeletionStrategy::Diverse,
        ))
        .unwrap();
        bank2
            .insert(SampleId::new("x"), "x".into(), "A".into(), None, unit(vec![1.0, 0.0]))
            .unwrap();
        bank2
            .insert(SampleId::new("y"), "y".into(), "A".into(), None, unit(vec![0.0, 1.0]))
            .unwrap();
        let red2 = bank2.diversity_redundancy().unwrap();
        assert_eq!(red2[&SampleId::new("x")], 0.0);
        assert_eq!(red2[&SampleId::new("y")], 0.0);
    }

    #[test]
    fn redundancy_matches_brute_force() {
        let mut bank = MemoryBank::new(test_config(
            SelectionStrategy::TopK,
            DeletionStrategy::Diverse,
        ))
        .unwrap();
        let embedder = HashingEmbedder::new(16, 9).unwrap();
        let mut embs = Vec::new();
        for i in 0..8 {
            let text = format!("text {i} with word{} and word{}", i % 3, i % 5);
            let e = embedder.embed(&text).unwrap();
            embs.push(e.clone());
            bank.insert(SampleId::new(format!("q{i}")), text, "A".into(), None, e)
                .unwrap();
        }
        let red = bank.diversity_redundancy().unwrap();
        for i in 0..8 {
            let mut expected = f64::NEG_INFINITY;
            for j in 0..8 {
                if i != j {
                    expected = expected.max(cosine(&embs[i], &embs[j]).unwrap());
                }
            }
            assert_eq!(red[&SampleId::new(format!("q{i}"))], expected);
        }
    }

    #[test]
    fn random_selection_uniform_when_alpha_zero() {
        let mut cfg = test_config(SelectionStrategy::Random, DeletionStrategy::Fifo);
        cfg.alpha = 0.0;
        cfg.k = 3;
        let mut bank = MemoryBank::new(cfg).unwrap();
        insert_n(&mut bank, 8, Some(0.5));
        let q = unit(vec![1.0; 8]);
        let first = bank.select_demonstrations("q", &q).unwrap();
        let second = bank.select_demonstrations("q", &q).unwrap();
        assert_eq!(first.len(), 3);
        // Same bank state, same derived rng: identical picks.
        let ids = |demos: &[Sample]| demos.iter().map(|d| d.id.to_string()).collect::<Vec<_>>();
        assert_eq!(ids(&first), ids(&second));
        // Ordered by insertion index.
        let idx: Vec<u64> = first.iter().map(|d| d.insertion_index).collect();
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        assert_eq!(idx, sorted);
    }

    #[test]
    fn random_selection_with_alpha_ranks_by_entropy() {
        let mut cfg = test_config(SelectionStrategy::Random, DeletionStrategy::Fifo);
        cfg.k = 2;
        let mut bank = MemoryBank::new(cfg).unwrap();
        let entropies = [1.3, 0.2, 0.9, 0.4];
        for (i, h) in entropies.iter().enumerate() {
            bank.insert(
                SampleId::new(format!("q{i}")),
                format!("text {i}"),
                "A".into(),
                Some(*h),
                unit(vec![1.0, i as f64 + 1.0]),
            )
            .unwrap();
        }
        let demos = bank
            .select_demonstrations("q", &unit(vec![1.0, 0.0]))
            .unwrap();
        let mut ids: Vec<&str> = demos.iter().map(|d| d.id.as_str()).collect();
        ids.sort();
        assert_eq!(ids, ["q1", "q3"]); // the two lowest entropies
    }

    #[test]
    fn missing_entropy_disables_entropy_term() {
        // One sample lacks entropy: selection must not favor low entropy.
        let mut cfg = test_config(SelectionStrategy::Random, DeletionStrategy::Fifo);
        cfg.k = 1;
        let mut bank = MemoryBank::new(cfg).unwrap();
        bank.insert(SampleId::new("a"), "a".into(), "A".into(), Some(0.1), unit(vec![1.0, 0.0]))
            .unwrap();
        bank.insert(SampleId::new("b"), "b".into(), "A".into(), None, unit(vec![0.0, 1.0]))
            .unwrap();
        // alpha > 0 but entropy coverage is partial -> uniform path; with
        // this seed the pick is deterministic either way, just must not error.
        let demos = bank
            .select_demonstrations("q", &unit(vec![1.0, 1.0]))
            .unwrap();
        assert_eq!(demos.len(), 1);
    }

    #[test]
    fn dpp_selection_prefers_diverse_set() {
        let mut cfg = test_config(SelectionStrategy::Dpp, DeletionStrategy::Fifo);
        cfg.k = 2;
        cfg.dpp_candidates = 4;
        cfg.alpha = 0.0;
        let mut bank = MemoryBank::new(cfg).unwrap();
        // Two duplicates close to the query, one moderately similar sample,
        // one unrelated sample anchoring the normalization minimum.
        bank.insert(SampleId::new("dup1"), "d1".into(), "A".into(), None, unit(vec![1.0, 0.0, 0.0]))
            .unwrap();
        bank.insert(SampleId::new("dup2"), "d2".into(), "A".into(), None, unit(vec![1.0, 0.0, 0.0]))
            .unwrap();
        bank.insert(SampleId::new("other"), "o".into(), "A".into(), None, unit(vec![0.6, 0.8, 0.0]))
            .unwrap();
        bank.insert(SampleId::new("unrelated"), "u".into(), "A".into(), None, unit(vec![0.0, 0.0, 1.0]))
            .unwrap();
        let q = unit(vec![1.0, 0.05, 0.0]);
        let demos = bank.select_demonstrations("q", &q).unwrap();
        let mut ids: Vec<&str> = demos.iter().map(|d| d.id.as_str()).collect();
        ids.sort();
        assert_eq!(ids, ["dup1", "other"]);
    }

    #[test]
    fn snapshot_round_trip_preserves_bank() {
        let mut bank =
            MemoryBank::new(test_config(SelectionStrategy::TopK, DeletionStrategy::Fifo)).unwrap();
        insert_n(&mut bank, 5, Some(0.7));
        let mut buf = Vec::new();
        bank.write_snapshot(&mut buf).unwrap();
        let loaded = MemoryBank::load_snapshot(
            buf.as_slice(),
            test_config(SelectionStrategy::TopK, DeletionStrategy::Fifo),
        )
        .unwrap();
        assert_eq!(loaded.samples(), bank.samples());
        assert_eq!(loaded.next_insertion_index, bank.next_insertion_index);
        assert_eq!(loaded.bm25_index(), bank.bm25_index());
    }

    #[test]
    fn selection_size_bound_holds() {
        for strategy in [
            SelectionStrategy::Random,
            SelectionStrategy::Bm25,
            SelectionStrategy::TopK,
            SelectionStrategy::Dpp,
        ] {
            let mut bank =
                MemoryBank::new(test_config(strategy, DeletionStrategy::Fifo)).unwrap();
            insert_n(&mut bank, 6, Some(0.5));
            let embedder = HashingEmbedder::new(8, 1).unwrap();
            let q = embedder.embed("sample text number 3").unwrap();
            let demos = bank.select_demonstrations("sample text number 3", &q).unwrap();
            let expected = bank.config().k.min(bank.len());
            if strategy == SelectionStrategy::Dpp {
                assert!(demos.len() <= expected);
                assert!(!demos.is_empty());
            } else {
                assert_eq!(demos.len(), expected);
            }
        }
    }
}
