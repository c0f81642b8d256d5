//! Line-delimited dataset ingestion.
//!
//! One JSON object per line:
//!
//! ```json
//! {"id": "anatomy_0", "subset": "anatomy", "question": "…",
//!  "choices": {"A": "…", "B": "…", "C": "…", "D": "…"}, "gold": "B"}
//! ```
//!
//! Choice order follows the object's key order and defines the label order
//! shown to the model. `gold` is optional and used only for scoring; it is
//! never shown to the model. Entry order on disk is the stream order.

use crate::error::{DailError, Result};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: String,
    pub subset: String,
    pub question: String,
    /// Ordered label -> choice text map (serde_json preserves key order).
    pub choices: serde_json::Map<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
}

impl DatasetEntry {
    /// Labels in choice order.
    pub fn labels(&self) -> Vec<String> {
        self.choices.keys().cloned().collect()
    }

    /// The canonical untemplated query text: the question followed by one
    /// "LABEL. text" line per choice. This is what gets stored in the bank,
    /// embedded, BM25-indexed, and substituted into the prompt template.
    pub fn query_text(&self) -> String {
        let mut text = self.question.clone();
        for (label, choice) in &self.choices {
            let choice = choice.as_str().unwrap_or_default();
            text.push('\n');
            text.push_str(label);
            text.push_str(". ");
            text.push_str(choice);
        }
        text
    }

    fn validate(&self, line: usize) -> Result<()> {
        if self.id.is_empty() {
            return Err(DailError::Dataset {
                line,
                msg: "empty id".into(),
            });
        }
        if self.choices.is_empty() {
            return Err(DailError::Dataset {
                line,
                msg: format!("entry {:?} has no choices", self.id),
            });
        }
        for (label, text) in &self.choices {
            if label.is_empty() || !text.is_string() {
                return Err(DailError::Dataset {
                    line,
                    msg: format!("entry {:?} has a malformed choice", self.id),
                });
            }
        }
        if let Some(gold) = &self.gold {
            if !self.choices.contains_key(gold) {
                return Err(DailError::Dataset {
                    line,
                    msg: format!("entry {:?} gold label {gold:?} not among choices", self.id),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    entries: Vec<DatasetEntry>,
}

impl Dataset {
    /// Build from entries, enforcing id uniqueness and per-subset label
    /// alphabet consistency.
    pub fn new(entries: Vec<DatasetEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(DailError::Dataset {
                line: 0,
                msg: "no entries".into(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        let mut subset_labels: std::collections::HashMap<&str, Vec<String>> =
            std::collections::HashMap::new();
        for (i, entry) in entries.iter().enumerate() {
            entry.validate(i + 1)?;
            if !seen.insert(entry.id.as_str()) {
                return Err(DailError::Dataset {
                    line: i + 1,
                    msg: format!("duplicate id {:?}", entry.id),
                });
            }
            let labels = entry.labels();
            match subset_labels.get(entry.subset.as_str()) {
                None => {
                    subset_labels.insert(&entry.subset, labels);
                }
                Some(expected) if *expected == labels => {}
                Some(expected) => {
                    return Err(DailError::Dataset {
                        line: i + 1,
                        msg: format!(
                            "entry {:?} labels {labels:?} differ from subset alphabet {expected:?}",
                            entry.id
                        ),
                    });
                }
            }
        }
        Ok(Dataset { entries })
    }

    pub fn entries(&self) -> &[DatasetEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&DatasetEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

/// Load a dataset from line-delimited JSON, preserving file order.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| DailError::Dataset {
        line: 0,
        msg: format!("cannot open {}: {e}", path.display()),
    })?;
    parse_dataset(BufReader::new(file))
}

pub fn parse_dataset<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut entries = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: DatasetEntry =
            serde_json::from_str(&line).map_err(|e| DailError::Dataset {
                line: i + 1,
                msg: e.to_string(),
            })?;
        entry.validate(i + 1)?;
        entries.push(entry);
    }
    Dataset::new(entries)
}
