//! Prompt construction from a template, demonstrations, and the query.
//!
//! A prompt is the demonstration renderings followed by the query rendering,
//! joined by the separator; the query rendering ends with the answer prefix
//! so the model completes the answer. [`parse_prompt`] is the exact inverse
//! and is used by the mock oracle to recover demonstrations and query.

use crate::error::{DailError, Result};
use serde::{Deserialize, Serialize};

pub const QUESTION_SLOT: &str = "{question}";
pub const CHOICES_SLOT: &str = "{choices}";
pub const ANSWER_SLOT: &str = "{answer}";

/// Multiple-choice prompt template.
///
/// `demo_format` takes {question}, {choices} and {answer}; `query_format`
/// takes {question} and {choices}. Stored samples carry one flat query text
/// (question plus rendered choices), so the pipeline fills {question} with
/// that text and {choices} with the empty string; datasets that keep the
/// parts separate can fill both slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub demo_format: String,
    pub query_format: String,
    pub separator: String,
    pub answer_prefix: String,
}

impl PromptTemplate {
    /// The default multiple-choice template:
    ///
    /// ```text
    /// Question: <question and choices>
    /// Answer: <label>
    ///
    /// Question: <question and choices>
    /// Answer:
    /// ```
    pub fn multiple_choice() -> Self {
        PromptTemplate {
            demo_format: "Question: {question}{choices}\nAnswer: {answer}".to_string(),
            query_format: "Question: {question}{choices}\nAnswer:".to_string(),
            separator: "\n\n".to_string(),
            answer_prefix: "Answer:".to_string(),
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, fmt, slots) in [
            ("demo_format", &self.demo_format, &[QUESTION_SLOT, ANSWER_SLOT][..]),
            ("query_format", &self.query_format, &[QUESTION_SLOT][..]),
        ] {
            for slot in slots {
                if !fmt.contains(slot) {
                    return Err(DailError::Template(format!("{name} is missing {slot}")));
                }
            }
        }
        if !self.query_format.trim_end().ends_with(&self.answer_prefix) {
            return Err(DailError::Template(
                "query_format must end with the answer prefix".into(),
            ));
        }
        Ok(())
    }

    pub fn render_demo(&self, question: &str, choices: &str, answer: &str) -> String {
        self.demo_format
            .replace(QUESTION_SLOT, question)
            .replace(CHOICES_SLOT, choices)
            .replace(ANSWER_SLOT, answer)
    }

    pub fn render_query(&self, question: &str, choices: &str) -> String {
        self.query_format
            .replace(QUESTION_SLOT, question)
            .replace(CHOICES_SLOT, choices)
    }
}

/// Assemble the full prompt: each demonstration is the template applied to
/// the demo's flat query text and its label, in the given order; the query
/// rendering comes last and ends with the answer prefix.
pub fn build_prompt(
    template: &PromptTemplate,
    demos: &[(&str, &str)], // (query text, label)
    query_text: &str,
) -> Result<String> {
    template.validate()?;
    let mut parts: Vec<String> = Vec::with_capacity(demos.len() + 1);
    for (text, label) in demos {
        parts.push(template.render_demo(text, "", label));
    }
    parts.push(template.render_query(query_text, ""));
    Ok(parts.join(&template.separator))
}

/// Literal prefix/infix/suffix pieces of a format string around its slots.
/// Only flat rendering is inverted, so {choices} is treated as empty.
fn format_pieces(fmt: &str, with_answer: bool) -> Result<(String, String, String)> {
    let flat = fmt.replace(CHOICES_SLOT, "");
    let q = flat
        .find(QUESTION_SLOT)
        .ok_or_else(|| DailError::Template("missing {question}".into()))?;
    let prefix = flat[..q].to_string();
    let rest = &flat[q + QUESTION_SLOT.len()..];
    if with_answer {
        let a = rest
            .find(ANSWER_SLOT)
            .ok_or_else(|| DailError::Template("missing {answer}".into()))?;
        Ok((prefix, rest[..a].to_string(), rest[a + ANSWER_SLOT.len()..].to_string()))
    } else {
        Ok((prefix, rest.to_string(), String::new()))
    }
}

fn strip_wrapped<'a>(s: &'a str, prefix: &str, suffix: &str, what: &str) -> Result<&'a str> {
    s.strip_prefix(prefix)
        .and_then(|m| m.strip_suffix(suffix))
        .ok_or_else(|| DailError::PromptParse(format!("{what} does not match template")))
}

/// Inverse of [`build_prompt`] for flat-rendered prompts: recover the
/// (query text, label) demonstration pairs and the final query text.
pub fn parse_prompt(
    template: &PromptTemplate,
    prompt: &str,
) -> Result<(Vec<(String, String)>, String)> {
    template.validate()?;
    let (d_pre, d_mid, d_suf) = format_pieces(&template.demo_format, true)?;
    let (q_pre, q_suf, _) = format_pieces(&template.query_format, false)?;

    let segments: Vec<&str> = prompt.split(&template.separator).collect();
    if segments.is_empty() {
        return Err(DailError::PromptParse("empty prompt".into()));
    }
    let (query_seg, demo_segs) = segments.split_last().unwrap();

    let mut demos = Vec::with_capacity(demo_segs.len());
    for seg in demo_segs {
        let inner = strip_wrapped(seg, &d_pre, &d_suf, "demonstration")?;
        let split = inner
            .rfind(&d_mid)
            .ok_or_else(|| DailError::PromptParse("demonstration missing answer".into()))?;
        demos.push((
            inner[..split].to_string(),
            inner[split + d_mid.len()..].to_string(),
        ));
    }
    let query = strip_wrapped(query_seg, &q_pre, &q_suf, "query")?;
    Ok((demos, query.to_string()))
}
