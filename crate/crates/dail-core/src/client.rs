//! Model-client abstraction, output-to-label mapping, and the remote
//! OpenAI-compatible completion client.

use crate::error::{DailError, Result};
use serde::{Deserialize, Serialize};
use std::time::Duration;

/// Environment variable holding the bearer token for the completion client.
pub const API_TOKEN_ENV: &str = "DAIL_API_TOKEN";

/// One model completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReply {
    pub text: String,
    /// Probability over the task's label set, aligned with the label order
    /// handed to `predict`. Present only when the endpoint exposes logprobs.
    pub label_probs: Option<Vec<f64>>,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub latency_ms: u64,
}

impl ModelReply {
    /// Renormalize and validate label probabilities; call when constructing
    /// a reply with `label_probs` present.
    pub fn normalize_probs(mut self) -> Result<Self> {
        if let Some(probs) = &mut self.label_probs {
            if probs.is_empty() || probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(DailError::InvalidProbabilities(
                    "label probabilities must be finite and nonnegative".into(),
                ));
            }
            let sum: f64 = probs.iter().sum();
            if sum <= 0.0 {
                return Err(DailError::InvalidProbabilities("all-zero label mass".into()));
            }
            for p in probs.iter_mut() {
                *p /= sum;
            }
        }
        Ok(self)
    }
}

/// The label a reply mapped to, or an explicit abstention when the
/// completion mentions no label at all.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelOutcome {
    Label(String),
    Abstain,
}

impl LabelOutcome {
    pub fn as_option(&self) -> Option<&str> {
        match self {
            LabelOutcome::Label(l) => Some(l),
            LabelOutcome::Abstain => None,
        }
    }
}

/// Map a model reply into the label space.
///
/// With probabilities present: argmax, ties broken by label order. Without:
/// scan the completion left to right for the first standalone occurrence of
/// a label token (case-insensitive, so "Answer: b" maps to "B"); abstain if
/// none occurs.
pub fn map_output_to_label(reply: &ModelReply, labels: &[String]) -> LabelOutcome {
    if labels.is_empty() {
        return LabelOutcome::Abstain;
    }
    if let Some(probs) = &reply.label_probs {
        let n = probs.len().min(labels.len());
        let mut best = 0usize;
        for i in 1..n {
            if probs[i] > probs[best] {
                best = i;
            }
        }
        return LabelOutcome::Label(labels[best].clone());
    }
    for token in reply
        .text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        for label in labels {
            if token.eq_ignore_ascii_case(label) {
                return LabelOutcome::Label(label.clone());
            }
        }
    }
    LabelOutcome::Abstain
}

pub trait LlmClient: Send + Sync {
    /// Complete `prompt` and report token counts; `labels` is the task's
    /// label set in presentation order, used to populate `label_probs`.
    fn predict(&self, prompt: &str, labels: &[String]) -> Result<ModelReply>;
}

/// Bounded exponential backoff for transient remote failures.
#[derive(Debug, Clone)]
pub struct Backoff {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff {
            max_retries: 3,
            base_delay: Duration::from_millis(200),
        }
    }
}

impl Backoff {
    pub fn fast() -> Self {
        Backoff {
            max_retries: 3,
            base_delay: Duration::from_millis(1),
        }
    }

    fn delay(&self, attempt: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(attempt)
    }
}

/// POST a JSON body, retrying transport failures and 5xx responses with
/// exponential backoff. Non-5xx HTTP errors and body parse failures are
/// fatal. Shared by the completion client and the remote embedder.
pub fn post_json_with_retry(
    http: &reqwest::blocking::Client,
    url: &str,
    body: &serde_json::Value,
    bearer: Option<&str>,
    backoff: &Backoff,
) -> Result<serde_json::Value> {
    let mut attempt = 0u32;
    loop {
        let mut req = http.post(url).json(body);
        if let Some(token) = bearer {
            req = req.bearer_auth(token);
        }
        let outcome: std::result::Result<(), String> = match req.send() {
            Err(e) => Err(format!("request failed: {e}")),
            Ok(resp) => {
                let status = resp.status();
                if status.is_server_error() {
                    Err(format!("server error {status}"))
                } else if !status.is_success() {
                    return Err(DailError::MalformedResponse(format!(
                        "endpoint returned {status}"
                    )));
                } else {
                    return resp
                        .json::<serde_json::Value>()
                        .map_err(|e| DailError::MalformedResponse(format!("bad JSON body: {e}")));
                }
            }
        };
        let msg = outcome.unwrap_err();
        if attempt >= backoff.max_retries {
            return Err(DailError::Transport {
                attempts: attempt + 1,
                msg,
            });
        }
        std::thread::sleep(backoff.delay(attempt));
        attempt += 1;
    }
}

/// OpenAI-compatible completions client. Sends greedy (temperature 0)
/// completion requests and fills label probabilities from the first
/// generated token's logprobs when the endpoint provides them.
pub struct RemoteClient {
    endpoint: String,
    model: String,
    max_tokens: u64,
    logprobs: u32,
    http: reqwest::blocking::Client,
    backoff: Backoff,
}

impl RemoteClient {
    pub fn new(endpoint: String, model: String, max_tokens: u64) -> Result<Self> {
        let http = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| DailError::Config(format!("http client: {e}")))?;
        Ok(RemoteClient {
            endpoint,
            model,
            max_tokens,
            logprobs: 5,
            http,
            backoff: Backoff::default(),
        })
    }

    pub fn with_backoff(mut self, backoff: Backoff) -> Self {
        self.backoff = backoff;
        self
    }

    /// Pull per-label probabilities out of the first completion token's
    /// `top_logprobs` map. Tokens are matched to labels after trimming
    /// whitespace, case-insensitively; mass over matched labels is
    /// renormalized. Returns None when no label token appears.
    fn label_probs_from_logprobs(
        logprobs: &serde_json::Value,
        labels: &[String],
    ) -> Option<Vec<f64>> {
        let top = logprobs.get("top_logprobs")?.as_array()?.first()?.as_object()?;
        let mut mass = vec![0.0f64; labels.len()];
        let mut any = false;
        for (token, lp) in top {
            let lp = lp.as_f64()?;
            let trimmed = token.trim();
            for (i, label) in labels.iter().enumerate() {
                if trimmed.eq_ignore_ascii_case(label) {
                    mass[i] += lp.exp();
                    any = true;
                }
            }
        }
        if any {
            Some(mass)
        } else {
            None
        }
    }
}

impl LlmClient for RemoteClient {
    fn predict(&self, prompt: &str, labels: &[String]) -> Result<ModelReply> {
        if prompt.is_empty() {
            return Err(DailError::InvalidInput("empty prompt".into()));
        }
        let body = serde_json::json!({
            "model": self.model,
            "prompt": prompt,
            "temperature": 0,
            "max_tokens": self.max_tokens,
            "logprobs": self.logprobs,
        });
        let started = std::time::Instant::now();
        let value = post_json_with_retry(
            &self.http,
            &self.endpoint,
            &body,
            std::env::var(API_TOKEN_ENV).ok().as_deref(),
            &self.backoff,
        )?;
        let latency_ms = started.elapsed().as_millis() as u64;

        let choice = value
            .get("choices")
            .and_then(|c| c.get(0))
            .ok_or_else(|| DailError::MalformedResponse("missing choices[0]".into()))?;
        let text = choice
            .get("text")
            .and_then(|t| t.as_str())
            .ok_or_else(|| DailError::MalformedResponse("missing choices[0].text".into()))?
            .to_string();
        let label_probs = choice
            .get("logprobs")
            .filter(|v| !v.is_null())
            .and_then(|lp| Self::label_probs_from_logprobs(lp, labels));
        let usage = value.get("usage");
        let get_count = |key: &str| -> u64 {
            usage
                .and_then(|u| u.get(key))
                .and_then(|v| v.as_u64())
                .unwrap_or(0)
        };
        ModelReply {
            text,
            label_probs,
            input_tokens: get_count("prompt_tokens"),
            output_tokens: get_count("completion_tokens"),
            latency_ms,
        }
        .normalize_probs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reply_with_text(text: &str) -> ModelReply {
        ModelReply {
            text: text.to_string(),
            label_probs: None,
            input_tokens: 0,
            output_tokens: 0,
            latency_ms: 0,
        }
    }

    fn labels() -> Vec<String> {
        ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn bare_label_maps_directly() {
        let out = map_output_to_label(&reply_with_text("B"), &labels());
        assert_eq!(out, LabelOutcome::Label("B".into()));
    }

    #[test]
    fn answer_prefix_is_tolerated() {
        let out = map_output_to_label(&reply_with_text("Answer: B"), &labels());
        assert_eq!(out, LabelOutcome::Label("B".into()));
    }

    #[test]
    fn scan_is_case_insensitive_and_left_to_right() {
        let out = map_output_to_label(&reply_with_text("I think c, maybe d"), &labels());
        assert_eq!(out, LabelOutcome::Label("C".into()));
    }

    #[test]
    fn label_inside_word_does_not_match() {
        // "Answer" contains no standalone "A".
        let out = map_output_to_label(&reply_with_text("Answer unclear"), &labels());
        assert_eq!(out, LabelOutcome::Abstain);
    }

    #[test]
    fn probs_argmax_wins_over_text() {
        let reply = ModelReply {
            label_probs: Some(vec![0.1, 0.6, 0.2, 0.1]),
            ..reply_with_text("D")
        };
        assert_eq!(
            map_output_to_label(&reply, &labels()),
            LabelOutcome::Label("B".into())
        );
    }

    #[test]
    fn argmax_tie_breaks_by_label_order() {
        let reply = ModelReply {
            label_probs: Some(vec![0.4, 0.4, 0.1, 0.1]),
            ..reply_with_text("")
        };
        assert_eq!(
            map_output_to_label(&reply, &labels()),
            LabelOutcome::Label("A".into())
        );
    }

    #[test]
    fn no_label_abstains() {
        assert_eq!(
            map_output_to_label(&reply_with_text("the answer is unknowable"), &labels()),
            LabelOutcome::Abstain
        );
    }

    #[test]
    fn normalize_rejects_bad_probs() {
        let bad = ModelReply {
            label_probs: Some(vec![0.5, -0.5]),
            ..reply_with_text("")
        };
        assert!(bad.normalize_probs().is_err());
    }

    #[test]
    fn normalize_scales_to_unit_mass() {
        let reply = ModelReply {
            label_probs: Some(vec![2.0, 2.0]),
            ..reply_with_text("")
        };
        let normed = reply.normalize_probs().unwrap();
        assert_eq!(normed.label_probs.unwrap(), vec![0.5, 0.5]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            /// Argmax mapping is invariant under strictly monotone
            /// transforms of the probability vector.
            #[test]
            fn argmax_invariant_under_monotone_transform(
                raw in prop::collection::vec(0.05f64..1.0, 4),
            ) {
                let sum: f64 = raw.iter().sum();
                let probs: Vec<f64> = raw.iter().map(|p| p / sum).collect();
                let reply = ModelReply {
                    text: String::new(),
                    label_probs: Some(probs.clone()),
                    input_tokens: 0,
                    output_tokens: 0,
                    latency_ms: 0,
                };
                // exp is strictly monotone; renormalize afterwards.
                let transformed: Vec<f64> = probs.iter().map(|p| p.exp()).collect();
                let tsum: f64 = transformed.iter().sum();
                let reply2 = ModelReply {
                    label_probs: Some(transformed.iter().map(|p| p / tsum).collect()),
                    ..reply.clone()
                };
                let labels = super::labels();
                prop_assert_eq!(
                    map_output_to_label(&reply, &labels),
                    map_output_to_label(&reply2, &labels)
                );
            }
        }
    }
}
