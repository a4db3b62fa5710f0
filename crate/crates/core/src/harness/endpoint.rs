//! Chat-completions client.

use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use base64::Engine;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::extract::{extract_yes_no, AnswerEvidence};
use super::{HarnessError, ResponseRecord};
use crate::testgen::PromptBundle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    /// e.g. `https://api.openai.com/v1`; `/chat/completions` is appended when absent.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token. Unset means no auth.
    pub auth_env: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub concurrency: usize,
    pub logprob_depth: u32,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: String::new(),
            model: String::new(),
            auth_env: "OPENAI_API_KEY".into(),
            timeout_ms: 60_000,
            max_retries: 5,
            concurrency: 4,
            logprob_depth: 20,
            backoff_base_ms: 1_000,
            backoff_cap_ms: 30_000,
        }
    }
}

impl EndpointConfig {
    pub fn new(base_url: &str, model: &str) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        if self.base_url.is_empty() {
            return bad("endpoint base URL is empty");
        }
        if self.model.is_empty() {
            return bad("endpoint model name is empty");
        }
        if self.concurrency == 0 {
            return bad("endpoint concurrency must be at least 1");
        }
        if self.timeout_ms == 0 {
            return bad("endpoint timeout must be positive");
        }
        if self.backoff_cap_ms < self.backoff_base_ms {
            return bad("backoff cap is below the backoff base");
        }
        Ok(())
    }

    pub fn url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }

    /// Delay before retry number `retry` (1-based): exponential, capped, with jitter in
    /// the upper half of the window.
    pub fn backoff(&self, retry: u32) -> Duration {
        let exp = self
            .backoff_base_ms
            .saturating_mul(1u64 << (retry.saturating_sub(1)).min(32));
        let window = exp.min(self.backoff_cap_ms) as f64;
        let jitter: f64 = rand::rng().random_range(0.5..=1.0);
        Duration::from_millis((window * jitter) as u64)
    }
}

pub struct EndpointClient {
    config: EndpointConfig,
    agent: ureq::Agent,
    token: Option<String>,
}

impl std::fmt::Debug for EndpointClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EndpointClient")
            .field("config", &self.config)
            .field("token", &self.token.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl EndpointClient {
    /// Reads the auth token from the configured environment variable.
    pub fn new(config: EndpointConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let token = std::env::var(&config.auth_env)
            .ok()
            .filter(|t| !t.is_empty());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            config,
            agent,
            token,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn request_body(&self, text: &str, image: Option<&Path>) -> Result<Value, HarnessError> {
        let mut content = vec![json!({"type": "text", "text": text})];
        if let Some(path) = image {
            let bytes = std::fs::read(path)
                .map_err(|_| HarnessError::MissingImage(path.display().to_string()))?;
            let mime = match path.extension().and_then(|e| e.to_str()) {
                Some("jpg") | Some("jpeg") => "image/jpeg",
                Some("webp") => "image/webp",
                _ => "image/png",
            };
            let encoded = base64::engine::general_purpose::STANDARD.encode(bytes);
            content.push(json!({
                "type": "image_url",
                "image_url": {"url": format!("data:{mime};base64,{encoded}")}
            }));
        }
        Ok(json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": content}],
            "max_tokens": 1,
            "temperature": 0,
            "logprobs": true,
            "top_logprobs": self.config.logprob_depth,
        }))
    }

    fn post_once(&self, body: &Value) -> Result<Value, HarnessError> {
        let mut request = self
            .agent
            .post(self.config.url())
            .header("Content-Type", "application/json");
        if let Some(token) = &self.token {
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        let mut response = request.send(serde_json::to_vec(body)?).map_err(transport)?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(transport)?;
        match status {
            200..=299 => serde_json::from_str(&text)
                .map_err(|e| HarnessError::MalformedResponse(format!("invalid JSON: {e}"))),
            401 | 403 => Err(HarnessError::AuthFailure(format!("HTTP {status}"))),
            408 | 429 | 500..=599 => Err(HarnessError::Transport {
                message: format!("HTTP {status}"),
                retryable: true,
            }),
            _ => Err(HarnessError::Transport {
                message: format!("HTTP {status}: {}", truncate(&text, 200)),
                retryable: false,
            }),
        }
    }
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

fn transport(e: ureq::Error) -> HarnessError {
    let retryable = matches!(
        e,
        ureq::Error::Timeout(_)
            | ureq::Error::Io(_)
            | ureq::Error::ConnectionFailed
            | ureq::Error::HostNotFound
    );
    HarnessError::Transport {
        message: e.to_string(),
        retryable,
    }
}

/// Reads the first-token alternatives and the text of the first choice.
fn parse_completion(body: &Value) -> Result<(Vec<(String, f64)>, String), HarnessError> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| HarnessError::MalformedResponse("no choices".into()))?;
    let text = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let mut tokens: Vec<(String, f64)> = Vec::new();
    if let Some(first) = choice.pointer("/logprobs/content/0") {
        let entry = |v: &Value| match (
            v.get("token").and_then(Value::as_str),
            v.get("logprob").and_then(Value::as_f64),
        ) {
            (Some(t), Some(lp)) => Ok((t.to_string(), lp)),
            _ => Err(HarnessError::MalformedResponse(
                "logprob entry without token".into(),
            )),
        };
        if let Some(alternatives) = first.get("top_logprobs").and_then(Value::as_array) {
            for alt in alternatives {
                tokens.push(entry(alt)?);
            }
        }
        let sampled = entry(first)?;
        if !tokens.iter().any(|(t, _)| *t == sampled.0) {
            tokens.push(sampled);
        }
    }
    if tokens.is_empty() && text.is_empty() {
        return Err(HarnessError::MalformedResponse(
            "neither logprobs nor content".into(),
        ));
    }
    Ok((tokens, text))
}

/// Sends one yes/no query, retrying transient transport failures with backoff. The
/// bundle's answer instruction is appended to `prompt`.
pub fn query_model(
    client: &EndpointClient,
    case_id: &str,
    prompt: &str,
    image: Option<&Path>,
    bundle: &PromptBundle,
) -> Result<ResponseRecord, HarnessError> {
    if prompt.trim().is_empty() {
        return Err(HarnessError::InvalidConfig(format!(
            "empty prompt for {case_id}"
        )));
    }
    let text = format!("{prompt} {}", bundle.answer_instruction);
    let body = client.request_body(&text, image)?;
    let mut attempts = 0u32;
    let completion = loop {
        attempts += 1;
        match client.post_once(&body) {
            Ok(v) => break v,
            Err(e) if e.is_retryable() && attempts <= client.config.max_retries => {
                std::thread::sleep(client.config.backoff(attempts));
            }
            Err(e) => return Err(e),
        }
    };
    let (tokens, raw_text) = parse_completion(&completion)?;
    let (p_yes, p_no, source) = if tokens.is_empty() {
        extract_yes_no(
            AnswerEvidence::Text(&raw_text),
            &bundle.affirmative,
            &bundle.negative,
        )?
    } else {
        extract_yes_no(
            AnswerEvidence::Logprobs(&tokens),
            &bundle.affirmative,
            &bundle.negative,
        )
        .or_else(|_| {
            extract_yes_no(
                AnswerEvidence::Text(&raw_text),
                &bundle.affirmative,
                &bundle.negative,
            )
        })?
    };
    Ok(ResponseRecord {
        case_id: case_id.to_string(),
        model_id: client.config.model.clone(),
        p_yes,
        p_no,
        raw_text,
        answer_source: source,
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs()),
        attempts,
    })
}
