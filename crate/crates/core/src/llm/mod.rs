//! Chat-completion gateway shared by the three pipeline stages.
//!
//! Two backends: a live HTTP endpoint and a replayed transcript. Nothing
//! outside this module talks to the network.

mod answer;
mod http;
mod mock;

use std::sync::{Condvar, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use answer::extract_answer_label;
pub use http::{HttpBackend, RetryPolicy, ENV_API_KEY, ENV_ENDPOINT};
pub use mock::{MockBackend, TranscriptEntry};

/// Model id that resolves to the transcript backend.
pub const MOCK_MODEL: &str = "mock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Cot,
    Enhance,
    Infer,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Cot, Stage::Enhance, Stage::Infer];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Cot => "cot",
            Stage::Enhance => "enhance",
            Stage::Infer => "infer",
        }
    }

    /// Sampling temperature used unless configured otherwise.
    pub fn default_temperature(self) -> f64 {
        match self {
            Stage::Cot => 0.7,
            Stage::Enhance | Stage::Infer => 0.0,
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which model serves each stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelAssignment {
    pub cot_model: String,
    pub enhance_model: String,
    pub infer_model: String,
}

impl ModelAssignment {
    pub fn new(cot: &str, enhance: &str, infer: &str) -> Result<Self> {
        let a = Self {
            cot_model: cot.to_string(),
            enhance_model: enhance.to_string(),
            infer_model: infer.to_string(),
        };
        a.validate()?;
        Ok(a)
    }

    pub fn uniform(model: &str) -> Self {
        Self {
            cot_model: model.to_string(),
            enhance_model: model.to_string(),
            infer_model: model.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for stage in Stage::ALL {
            if self.model_for(stage).trim().is_empty() {
                return Err(Error::validation(format!(
                    "no model assigned to {stage} stage"
                )));
            }
        }
        Ok(())
    }

    pub fn model_for(&self, stage: Stage) -> &str {
        match stage {
            Stage::Cot => &self.cot_model,
            Stage::Enhance => &self.enhance_model,
            Stage::Infer => &self.infer_model,
        }
    }
}

impl Default for ModelAssignment {
    fn default() -> Self {
        Self::uniform(MOCK_MODEL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub stage: Stage,
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl LlmRequest {
    /// Single user-message request with the stage's default temperature.
    pub fn user(stage: Stage, model: &str, prompt: impl Into<String>) -> Self {
        Self {
            stage,
            model: model.to_string(),
            messages: vec![Message {
                role: Role::User,
                content: prompt.into(),
            }],
            temperature: stage.default_temperature(),
            max_tokens: 1024,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.messages.is_empty() {
            return Err(Error::validation("request has no messages"));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(Error::validation("temperature must be non-negative"));
        }
        if self.model.trim().is_empty() {
            return Err(Error::validation("request has no model"));
        }
        Ok(())
    }

    /// Content of the last user message, or empty.
    pub fn last_user_content(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub usage: Usage,
    pub latency_ms: u64,
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse>;

    /// Whether responses are replayed rather than generated.
    fn is_mock(&self) -> bool {
        false
    }
}

/// Counting semaphore bounding concurrent requests.
struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        {
            let mut free = self.free.lock().unwrap();
            while *free == 0 {
                free = self.cv.wait(free).unwrap();
            }
            *free -= 1;
        }
        let out = f();
        *self.free.lock().unwrap() += 1;
        self.cv.notify_one();
        out
    }
}

pub struct LlmGateway {
    backend: Box<dyn ChatBackend>,
    limiter: Limiter,
}

pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

impl LlmGateway {
    pub fn new(backend: Box<dyn ChatBackend>, max_in_flight: usize) -> Self {
        Self {
            backend,
            limiter: Limiter::new(max_in_flight),
        }
    }

    pub fn mock(backend: MockBackend) -> Self {
        Self::new(Box::new(backend), 1)
    }

    pub fn is_mock(&self) -> bool {
        self.backend.is_mock()
    }

    pub fn complete(&self, request: &LlmRequest) -> Result<LlmResponse> {
        request.validate()?;
        let started = Instant::now();
        let mut response = self.limiter.run(|| self.backend.complete(request))?;
        if !self.backend.is_mock() && response.latency_ms == 0 {
            response.latency_ms = started.elapsed().as_millis() as u64;
        }
        Ok(response)
    }
}
