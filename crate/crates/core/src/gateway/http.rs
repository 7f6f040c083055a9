use std::sync::{Condvar, Mutex};
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{BackendKind, ChatBackend, CompletionRequest};
use crate::error::GatewayError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpChatConfig {
    /// Base URL (e.g. `https://api.openai.com/v1`) or the full
    /// `.../chat/completions` URL.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the API key. `None` sends no credential.
    pub api_key_env: Option<String>,
    pub auth_header: String,
    /// Re-tries after the first attempt, for transport failures, 429 and 5xx.
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub timeout: Duration,
    pub max_in_flight: usize,
}

impl Default for HttpChatConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-4".into(),
            api_key_env: Some("OPENAI_API_KEY".into()),
            auth_header: "Authorization".into(),
            max_retries: 3,
            initial_backoff: Duration::from_secs(1),
            timeout: Duration::from_secs(120),
            max_in_flight: 8,
        }
    }
}

impl HttpChatConfig {
    pub fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Counting semaphore bounding concurrent requests.
struct InFlight {
    slots: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn acquire(&self) -> InFlightPermit<'_> {
        let mut free = self.slots.lock().unwrap();
        while *free == 0 {
            free = self.freed.wait(free).unwrap();
        }
        *free -= 1;
        InFlightPermit(self)
    }
}

struct InFlightPermit<'a>(&'a InFlight);

impl Drop for InFlightPermit<'_> {
    fn drop(&mut self) {
        *self.0.slots.lock().unwrap() += 1;
        self.0.freed.notify_one();
    }
}

pub struct HttpChatBackend {
    config: HttpChatConfig,
    client: Client,
    in_flight: InFlight,
}

enum Failure {
    Retryable(String),
    Fatal(GatewayError),
}

impl HttpChatBackend {
    pub fn new(config: HttpChatConfig) -> Result<Self, GatewayError> {
        let client = Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::Transport {
                attempts: 0,
                message: e.to_string(),
            })?;
        let slots = config.max_in_flight.max(1);
        Ok(Self {
            config,
            client,
            in_flight: InFlight {
                slots: Mutex::new(slots),
                freed: Condvar::new(),
            },
        })
    }

    pub fn config(&self) -> &HttpChatConfig {
        &self.config
    }

    fn api_key(&self) -> Result<Option<String>, GatewayError> {
        let Some(var) = &self.config.api_key_env else {
            return Ok(None);
        };
        match std::env::var(var) {
            Ok(key) if !key.trim().is_empty() => Ok(Some(key)),
            _ => Err(GatewayError::Credential(format!(
                "environment variable {var} is not set"
            ))),
        }
    }

    fn attempt(&self, request: &CompletionRequest, key: Option<&str>) -> Result<String, Failure> {
        let body = ChatRequest {
            model: &self.config.model,
            messages: [ChatMessage {
                role: "user",
                content: &request.prompt,
            }],
            temperature: request.sampling_temperature,
            max_tokens: request.max_output_tokens,
        };
        let mut builder = self.client.post(self.config.url()).json(&body);
        if let Some(key) = key {
            builder = builder.header(self.config.auth_header.as_str(), format!("Bearer {key}"));
        }
        let response = builder
            .send()
            .map_err(|e| Failure::Retryable(e.to_string()))?;
        let status = response.status();
        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            return Err(Failure::Fatal(GatewayError::Credential(format!(
                "endpoint rejected credential ({status})"
            ))));
        }
        if status == StatusCode::TOO_MANY_REQUESTS || status.is_server_error() {
            return Err(Failure::Retryable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(Failure::Fatal(GatewayError::Transport {
                attempts: 1,
                message: format!("HTTP {status}"),
            }));
        }
        let parsed: ChatResponse = response.json().map_err(|e| {
            Failure::Fatal(GatewayError::Transport {
                attempts: 1,
                message: format!("malformed response body: {e}"),
            })
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| {
                Failure::Fatal(GatewayError::Transport {
                    attempts: 1,
                    message: "response has no message content".into(),
                })
            })
    }
}

impl ChatBackend for HttpChatBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::HttpChat {
            endpoint: self.config.endpoint.clone(),
            model: self.config.model.clone(),
            api_key_env: self.config.api_key_env.clone(),
        }
    }

    fn respond(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let key = self.api_key()?;
        let _permit = self.in_flight.acquire();
        let mut backoff = self.config.initial_backoff;
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(request, key.as_deref()) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(message)) => {
                    if attempts > self.config.max_retries {
                        return Err(GatewayError::Transport { attempts, message });
                    }
                    log::warn!("chat request failed ({message}); retrying in {backoff:?}");
                    std::thread::sleep(backoff);
                    backoff = backoff.saturating_mul(2);
                }
            }
        }
    }
}
