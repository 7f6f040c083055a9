//! Chat-completion backends: an OpenAI-compatible HTTP client and a
//! deterministic mock persona policy, behind one trait.

mod extract;
mod http;
mod mock;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::GatewayError;

pub use extract::extract_json;
pub use http::{HttpChatBackend, HttpChatConfig};
pub use mock::{mock_policy_respond, MockPolicyBackend, PromptKind};

pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 512;

/// Sampling parameters shared by every request of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequestParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for RequestParams {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub sampling_temperature: f64,
    pub max_output_tokens: u32,
    /// 1 for the first ask, incremented on every repair re-ask.
    pub attempt: u32,
}

impl CompletionRequest {
    pub fn new(prompt: String, params: RequestParams, attempt: u32) -> Self {
        Self {
            prompt,
            sampling_temperature: params.temperature,
            max_output_tokens: params.max_output_tokens,
            attempt,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.prompt.is_empty() {
            return Err(GatewayError::InvalidRequest("empty prompt".into()));
        }
        if self.sampling_temperature.is_nan() || self.sampling_temperature < 0.0 {
            return Err(GatewayError::InvalidRequest(
                "temperature must be >= 0".into(),
            ));
        }
        if self.max_output_tokens == 0 {
            return Err(GatewayError::InvalidRequest(
                "max_output_tokens must be positive".into(),
            ));
        }
        if self.attempt == 0 {
            return Err(GatewayError::InvalidRequest("attempt counts from 1".into()));
        }
        Ok(())
    }
}

/// Which model answers. The credential is referenced by environment variable
/// name only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat {
        endpoint: String,
        model: String,
        api_key_env: Option<String>,
    },
    MockPolicy {
        seed: u64,
    },
    Scripted,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendKind::HttpChat {
                model, endpoint, ..
            } => write!(f, "http:{model}@{endpoint}"),
            BackendKind::MockPolicy { seed } => write!(f, "mock:{seed}"),
            BackendKind::Scripted => f.write_str("scripted"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawCompletion {
    pub text: String,
    pub latency: Duration,
    pub backend: BackendKind,
}

pub trait ChatBackend: Send + Sync {
    fn kind(&self) -> BackendKind;

    /// Produces the model text for one validated request.
    fn respond(&self, request: &CompletionRequest) -> Result<String, GatewayError>;

    fn complete(&self, request: &CompletionRequest) -> Result<RawCompletion, GatewayError> {
        request.validate()?;
        let start = Instant::now();
        let text = self.respond(request)?;
        Ok(RawCompletion {
            text,
            latency: start.elapsed(),
            backend: self.kind(),
        })
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Arc<B> {
    fn kind(&self) -> BackendKind {
        (**self).kind()
    }

    fn respond(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        (**self).respond(request)
    }
}

pub fn complete(
    request: &CompletionRequest,
    backend: &dyn ChatBackend,
) -> Result<RawCompletion, GatewayError> {
    backend.complete(request)
}

/// Builds the backend a [`BackendKind`] names.
pub fn connect(
    kind: &BackendKind,
    http: HttpChatConfig,
) -> Result<Arc<dyn ChatBackend>, GatewayError> {
    match kind {
        BackendKind::MockPolicy { seed } => Ok(Arc::new(MockPolicyBackend::new(*seed))),
        BackendKind::HttpChat {
            endpoint,
            model,
            api_key_env,
        } => {
            let cfg = HttpChatConfig {
                endpoint: endpoint.clone(),
                model: model.clone(),
                api_key_env: api_key_env.clone(),
                ..http
            };
            Ok(Arc::new(HttpChatBackend::new(cfg)?))
        }
        BackendKind::Scripted => Err(GatewayError::InvalidRequest(
            "scripted backends are constructed directly".into(),
        )),
    }
}

/// Counts requests and refuses any beyond `cap`.
pub struct BudgetGuard {
    inner: Arc<dyn ChatBackend>,
    cap: Option<u64>,
    used: Arc<AtomicU64>,
}

impl BudgetGuard {
    pub fn new(inner: Arc<dyn ChatBackend>, cap: Option<u64>) -> Self {
        Self::with_counter(inner, cap, Arc::new(AtomicU64::new(0)))
    }

    /// Several guards sharing one counter enforce one joint cap.
    pub fn with_counter(
        inner: Arc<dyn ChatBackend>,
        cap: Option<u64>,
        used: Arc<AtomicU64>,
    ) -> Self {
        Self { inner, cap, used }
    }

    pub fn requests(&self) -> u64 {
        self.used.load(Ordering::SeqCst)
    }
}

impl ChatBackend for BudgetGuard {
    fn kind(&self) -> BackendKind {
        self.inner.kind()
    }

    fn respond(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let n = self.used.fetch_add(1, Ordering::SeqCst);
        if let Some(cap) = self.cap {
            if n >= cap {
                self.used.fetch_sub(1, Ordering::SeqCst);
                return Err(GatewayError::BudgetExceeded(cap));
            }
        }
        self.inner.respond(request)
    }
}

type Responder = Box<dyn FnMut(&str) -> String + Send>;

/// Backend driven by a closure or a fixed reply list. Records every prompt.
pub struct ScriptedBackend {
    responder: Mutex<Responder>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedBackend {
    pub fn from_fn<F>(f: F) -> Self
    where
        F: FnMut(&str) -> String + Send + 'static,
    {
        Self {
            responder: Mutex::new(Box::new(f)),
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn constant(reply: &str) -> Self {
        let reply = reply.to_string();
        Self::from_fn(move |_| reply.clone())
    }

    /// Replies in order, repeating the last one once the list runs out.
    pub fn sequence(replies: Vec<String>) -> Self {
        assert!(!replies.is_empty());
        let mut i = 0;
        Self::from_fn(move |_| {
            let r = replies[i.min(replies.len() - 1)].clone();
            i += 1;
            r
        })
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }

    pub fn calls(&self) -> usize {
        self.prompts.lock().unwrap().len()
    }
}

impl ChatBackend for ScriptedBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Scripted
    }

    fn respond(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        self.prompts.lock().unwrap().push(request.prompt.clone());
        Ok((self.responder.lock().unwrap())(&request.prompt))
    }
}
