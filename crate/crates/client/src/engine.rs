use belief_core::document::{GraphDocument, OutcomeDocument};
use belief_core::metrics::{ConsistencyReport, DatasetReport};
use belief_core::Label;
use reqwest::blocking::{Client, RequestBuilder};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::api::*;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("{kind} error: {message}")]
    Api { status: u16, kind: ErrorKind, message: String },
    #[error("cannot reach the engine at {url}: {message}")]
    Transport { url: String, message: String },
    #[error("malformed engine response: {0}")]
    Decode(String),
}

/// Blocking client for one engine. Requests carry no timeout since solves
/// and evaluations can run long.
#[derive(Clone, Debug)]
pub struct EngineClient {
    base: String,
    http: Client,
}

impl EngineClient {
    pub fn new(base: impl Into<String>) -> Result<Self, ClientError> {
        let base = base.into().trim_end_matches('/').to_string();
        let http = Client::builder()
            .timeout(None)
            .build()
            .map_err(|e| ClientError::Transport { url: base.clone(), message: e.to_string() })?;
        Ok(EngineClient { base, http })
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn send<R: DeserializeOwned>(&self, path: &str, request: RequestBuilder) -> Result<R, ClientError> {
        let url = self.url(path);
        let response = request.send().map_err(|e| ClientError::Transport { url, message: e.to_string() })?;
        let status = response.status();
        let bytes = response.bytes().map_err(|e| ClientError::Decode(e.to_string()))?;
        if !status.is_success() {
            return Err(match serde_json::from_slice::<ErrorBody>(&bytes) {
                Ok(body) => ClientError::Api { status: status.as_u16(), kind: body.error.kind, message: body.error.message },
                Err(_) => ClientError::Api {
                    status: status.as_u16(),
                    kind: if status.is_client_error() { ErrorKind::Input } else { ErrorKind::Internal },
                    message: String::from_utf8_lossy(&bytes).into_owned(),
                },
            });
        }
        serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode(e.to_string()))
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R, ClientError> {
        self.send(path, self.http.post(self.url(path)).json(body))
    }

    pub fn health(&self) -> Result<Health, ClientError> {
        self.send("/health", self.http.get(self.url("/health")))
    }

    pub fn build(&self, request: &BuildRequest) -> Result<GraphDocument, ClientError> {
        self.post("/v1/graphs/build", request)
    }

    pub fn synthetic(&self, request: &SynthRequest) -> Result<GraphDocument, ClientError> {
        self.post("/v1/graphs/synthetic", request)
    }

    pub fn reason(&self, request: &ReasonRequest) -> Result<OutcomeDocument, ClientError> {
        self.post("/v1/reason", request)
    }

    pub fn start_resolution(&self, request: &ResolveRequest) -> Result<SessionState, ClientError> {
        self.post("/v1/resolve/sessions", request)
    }

    pub fn answer(&self, session: &str, verdict: Label) -> Result<SessionState, ClientError> {
        self.post(&format!("/v1/resolve/sessions/{session}/answer"), &AnswerRequest { verdict })
    }

    pub fn finish_resolution(&self, session: &str, fallback: bool) -> Result<OutcomeDocument, ClientError> {
        self.post(&format!("/v1/resolve/sessions/{session}/finish"), &FinishRequest { fallback })
    }

    pub fn cancel_resolution(&self, session: &str) -> Result<(), ClientError> {
        let path = format!("/v1/resolve/sessions/{session}");
        let request = self.http.delete(self.url(&path));
        self.send::<serde_json::Value>(&path, request).map(|_| ())
    }

    pub fn tau(&self, request: &TauRequest) -> Result<ConsistencyReport, ClientError> {
        self.post("/v1/metrics/tau", request)
    }

    pub fn export_dot(&self, request: &DotRequest) -> Result<String, ClientError> {
        self.post::<_, TextResponse>("/v1/export/dot", request).map(|r| r.text)
    }

    pub fn export_wcnf(&self, graph: &GraphDocument) -> Result<String, ClientError> {
        self.post::<_, TextResponse>("/v1/export/wcnf", &WcnfRequest { graph: graph.clone() }).map(|r| r.text)
    }

    pub fn evaluate(&self, request: &EvaluateRequest) -> Result<DatasetReport, ClientError> {
        self.post("/v1/evaluate", request)
    }
}
