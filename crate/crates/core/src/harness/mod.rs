//! Response collection: live chat-completions endpoints, synthetic responders and replay
//! of recorded response files.

mod endpoint;
mod extract;
mod oracle;
mod store;
mod suite;

pub use endpoint::{query_model, EndpointClient, EndpointConfig};
pub use extract::{extract_yes_no, normalize_answer, AnswerEvidence};
pub use oracle::{
    baseline_respond, oracle_respond, probe_oracle_respond, Baseline, OracleConfig, OracleShape,
};
pub use store::{read_responses, ResponseWriter, RESPONSES_SCHEMA_VERSION};
pub use suite::{run_suite, Responder, SuiteOptions, SuiteSummary};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::testgen::BundleError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnswerSource {
    Logprobs,
    TextMatch,
    Oracle,
}

/// One answered query, as persisted in a response file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub case_id: String,
    pub model_id: String,
    pub p_yes: f64,
    pub p_no: f64,
    pub raw_text: String,
    pub answer_source: AnswerSource,
    /// Unix seconds; absent for synthetic responders so their files are reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub attempts: u32,
}

impl ResponseRecord {
    pub fn local_prob(&self) -> f64 {
        crate::metrics::local_prob(self.p_yes, self.p_no)
            .expect("persisted records always carry positive mass")
    }

    fn is_valid(&self) -> bool {
        self.p_yes >= 0.0
            && self.p_no >= 0.0
            && self.p_yes.is_finite()
            && self.p_no.is_finite()
            && self.p_yes + self.p_no > 0.0
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("transport error: {message}")]
    Transport { message: String, retryable: bool },
    #[error("authentication rejected: {0}")]
    AuthFailure(String),
    #[error("malformed endpoint response: {0}")]
    MalformedResponse(String),
    #[error("answer not recognized as yes or no: {0:?}")]
    AnswerUnrecognized(String),
    #[error("invalid responder configuration: {0}")]
    InvalidConfig(String),
    #[error("image for scene {0} not found")]
    MissingImage(String),
    #[error("case {0} is absent from the replay file")]
    NotInReplay(String),
    #[error("unknown scene `{0}`")]
    UnknownScene(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("response file: {0}")]
    ResponseFile(String),
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Short class name used in suite summaries.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Transport { .. } => "transport",
            HarnessError::AuthFailure(_) => "auth",
            HarnessError::MalformedResponse(_) => "malformed-response",
            HarnessError::AnswerUnrecognized(_) => "answer-unrecognized",
            HarnessError::InvalidConfig(_) => "invalid-config",
            HarnessError::MissingImage(_) => "missing-image",
            HarnessError::NotInReplay(_) => "not-in-replay",
            HarnessError::UnknownScene(_) => "unknown-scene",
            HarnessError::Geometry(_) => "geometry",
            HarnessError::Bundle(_) => "missing-translation",
            HarnessError::ResponseFile(_) => "response-file",
            HarnessError::Io(_) => "io",
            HarnessError::Json(_) => "json",
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            HarnessError::Transport {
                retryable: true,
                ..
            }
        )
    }
}
