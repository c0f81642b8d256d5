//! Synthetic multiple-choice task generator.
//!
//! Each query gets a latent topic; queries of the same topic share a small
//! signature vocabulary (so lexical and embedding retrieval can find them)
//! and share one correct label. The subset field carries the topic, which
//! the mock oracle uses as ground truth.

use crate::dataset::{Dataset, DatasetEntry};
use crate::error::Result;
use crate::types::rng_from_parts;
use rand::Rng;

const RNG_TAG_SYNTH: u64 = 101;

const LABELS: [&str; 4] = ["A", "B", "C", "D"];

const VOCAB: [&str; 48] = [
    "amber", "basalt", "cedar", "delta", "ember", "fjord", "garnet", "harbor", "indigo", "juniper",
    "kelp", "lagoon", "marble", "nectar", "onyx", "prairie", "quartz", "reef", "sierra", "tundra",
    "umber", "violet", "willow", "xenon", "yarrow", "zephyr", "anchor", "beacon", "canyon",
    "dune", "estuary", "flint", "glacier", "heath", "islet", "jade", "knoll", "lichen", "mesa",
    "nimbus", "orchid", "pumice", "quarry", "ridge", "summit", "thicket", "ursa", "vale",
];

const CHOICE_TEXTS: [&str; 4] = [
    "the first option",
    "the second option",
    "the third option",
    "the fourth option",
];

/// Signature words for one topic: a block of five vocabulary entries.
/// Blocks are disjoint for up to eight topics and wrap after that.
fn topic_words(topic: usize) -> Vec<&'static str> {
    (0..5)
        .map(|j| VOCAB[(topic * 6 + j) % VOCAB.len()])
        .collect()
}

/// Generate `n` queries over `topics` latent topics. Topic assignment,
/// filler words, and question lengths are drawn from `seed`; the gold label
/// is a fixed function of the topic.
pub fn synthetic_dataset(n: usize, topics: usize, seed: u64) -> Result<Dataset> {
    assert!(topics >= 1, "need at least one topic");
    let mut rng = rng_from_parts(&[seed, RNG_TAG_SYNTH, 0]);
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let topic = rng.random_range(0..topics);
        let words = topic_words(topic);
        let filler_a = VOCAB[rng.random_range(0..VOCAB.len())];
        let filler_b = VOCAB[rng.random_range(0..VOCAB.len())];
        let question = format!(
            "In the study of {} {} {}, which {} best fits case {} near the {} {}?",
            words[0], words[1], words[2], words[3], i, words[4], filler_a,
        );
        let mut choices = serde_json::Map::new();
        for (label, text) in LABELS.iter().zip(CHOICE_TEXTS.iter()) {
            choices.insert(label.to_string(), serde_json::Value::String(text.to_string()));
        }
        // One filler-flavored distractor keeps choices from being fully
        // constant across the stream.
        choices.insert(
            "D".to_string(),
            serde_json::Value::String(format!("the fourth option about {filler_b}")),
        );
        entries.push(DatasetEntry {
            id: format!("q{i:05}"),
            subset: format!("topic_{topic}"),
            question,
            choices,
            gold: Some(LABELS[topic % LABELS.len()].to_string()),
        });
    }
    Dataset::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = synthetic_dataset(50, 8, 3).unwrap();
        let b = synthetic_dataset(50, 8, 3).unwrap();
        assert_eq!(a.entries(), b.entries());
    }

    #[test]
    fn gold_is_topic_determined() {
        let ds = synthetic_dataset(200, 8, 1).unwrap();
        for e in ds.entries() {
            let topic: usize = e.subset.strip_prefix("topic_").unwrap().parse().unwrap();
            assert_eq!(e.gold.as_deref(), Some(LABELS[topic % 4]));
        }
    }

    #[test]
    fn same_topic_questions_share_signature_words() {
        let ds = synthetic_dataset(100, 4, 9).unwrap();
        let of_topic: Vec<&DatasetEntry> = ds
            .entries()
            .iter()
            .filter(|e| e.subset == "topic_1")
            .collect();
        assert!(of_topic.len() >= 2);
        let words = topic_words(1);
        for e in of_topic {
            for w in &words {
                assert!(e.question.contains(w), "{} missing {w}", e.question);
            }
        }
    }

    #[test]
    fn all_topics_appear() {
        let ds = synthetic_dataset(500, 8, 7).unwrap();
        let mut seen = std::collections::HashSet::new();
        for e in ds.entries() {
            seen.insert(e.subset.clone());
        }
        assert_eq!(seen.len(), 8);
    }
}
