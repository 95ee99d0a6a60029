//! Text-generation clients: deterministic mocks for tests and offline runs,
//! and a minimal JSON-over-HTTP client for real endpoints.
//!
//! HTTP protocol: `POST <url>` with body `{"prompt": "...", "image_ref": "..."|null}`,
//! answered by `{"text": "..."}`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub image_ref: Option<String>,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>, image_ref: Option<&str>) -> Self {
        Self { prompt: prompt.into(), image_ref: image_ref.map(str::to_string) }
    }
}

#[derive(Debug, Error)]
#[error("client {client:?}: {message}")]
pub struct ClientError {
    pub client: String,
    pub message: String,
}

pub trait GenerationClient: Send + Sync {
    fn name(&self) -> &str;
    fn generate(&self, request: &GenerationRequest) -> Result<String, ClientError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockMode {
    /// Returns `"<name>: <prompt>"`, with `" [image]"` appended when an image
    /// reference is attached.
    #[default]
    Echo,
    /// Always fails.
    Fail,
}

/// Deterministic in-process client that also records every request.
#[derive(Debug)]
pub struct MockClient {
    name: String,
    mode: MockMode,
    calls: Mutex<Vec<GenerationRequest>>,
}

impl MockClient {
    pub fn new(name: impl Into<String>, mode: MockMode) -> Self {
        Self { name: name.into(), mode, calls: Mutex::default() }
    }

    pub fn echo(name: impl Into<String>) -> Self {
        Self::new(name, MockMode::Echo)
    }

    pub fn failing(name: impl Into<String>) -> Self {
        Self::new(name, MockMode::Fail)
    }

    pub fn calls(&self) -> Vec<GenerationRequest> {
        self.calls.lock().unwrap().clone()
    }
}

impl GenerationClient for MockClient {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, ClientError> {
        self.calls.lock().unwrap().push(request.clone());
        match self.mode {
            MockMode::Echo => {
                let mut out = format!("{}: {}", self.name, request.prompt);
                if request.image_ref.is_some() {
                    out.push_str(" [image]");
                }
                Ok(out)
            }
            MockMode::Fail => Err(ClientError {
                client: self.name.clone(),
                message: "mock configured to fail".into(),
            }),
        }
    }
}

pub struct HttpClient {
    name: String,
    url: String,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct HttpReply {
    text: String,
}

impl HttpClient {
    pub fn new(name: impl Into<String>, url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Self { name: name.into(), url: url.into(), agent }
    }
}

impl GenerationClient for HttpClient {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, ClientError> {
        let err = |message: String| ClientError { client: self.name.clone(), message };
        let body = serde_json::to_value(request).map_err(|e| err(e.to_string()))?;
        let reply: HttpReply = self
            .agent
            .post(&self.url)
            .send_json(body)
            .map_err(|e| err(format!("{}: {e}", self.url)))?
            .into_json()
            .map_err(|e| err(format!("{}: bad reply: {e}", self.url)))?;
        Ok(reply.text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientKind {
    Mock,
    Http,
}

fn default_timeout_ms() -> u64 {
    30_000
}

/// Config-file entry describing one client endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientSpec {
    pub name: String,
    pub kind: ClientKind,
    #[serde(default)]
    pub url: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub mock_mode: MockMode,
}

impl ClientSpec {
    pub fn mock(name: &str) -> Self {
        Self {
            name: name.into(),
            kind: ClientKind::Mock,
            url: None,
            timeout_ms: default_timeout_ms(),
            mock_mode: MockMode::Echo,
        }
    }

    pub fn build(&self) -> Result<Arc<dyn GenerationClient>, ClientError> {
        match self.kind {
            ClientKind::Mock => Ok(Arc::new(MockClient::new(&self.name, self.mock_mode))),
            ClientKind::Http => {
                let url = self.url.as_deref().ok_or_else(|| ClientError {
                    client: self.name.clone(),
                    message: "http client requires a url".into(),
                })?;
                Ok(Arc::new(HttpClient::new(
                    &self.name,
                    url,
                    Duration::from_millis(self.timeout_ms),
                )))
            }
        }
    }
}

/// Named clients built from config entries.
#[derive(Default, Clone)]
pub struct ClientRegistry {
    clients: BTreeMap<String, Arc<dyn GenerationClient>>,
}

impl ClientRegistry {
    pub fn from_specs(specs: &[ClientSpec]) -> Result<Self, ClientError> {
        let mut reg = Self::default();
        for spec in specs {
            reg.insert(spec.build()?);
        }
        Ok(reg)
    }

    pub fn insert(&mut self, client: Arc<dyn GenerationClient>) {
        self.clients.insert(client.name().to_string(), client);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn GenerationClient>, ClientError> {
        self.clients.get(name).cloned().ok_or_else(|| ClientError {
            client: name.to_string(),
            message: "no client registered under this name".into(),
        })
    }
}
