//! Typed HTTP client for the lumen service.

use lumen_core::planner::MissionPlan;
use lumen_core::wire::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("{}", .body.error)]
    Api { status: u16, body: ErrorBody },
}

impl ClientError {
    /// True when the service rejected the input rather than failing itself.
    pub fn is_invalid_input(&self) -> bool {
        matches!(self, ClientError::Api { body, .. } if body.kind == ErrorKind::Invalid)
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:7070`.
    pub fn new(base: impl Into<String>) -> Self {
        Client { base: base.into().trim_end_matches('/').to_string(), http: reqwest::Client::new() }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    async fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp, ClientError> {
        let resp = self.http.post(format!("{}{path}", self.base)).json(body).send().await?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await?;
        let body = serde_json::from_str::<ErrorBody>(&text).unwrap_or(ErrorBody {
            kind: ErrorKind::Internal,
            error: format!("HTTP {status}: {text}"),
            line: None,
        });
        Err(ClientError::Api { status: status.as_u16(), body })
    }

    pub async fn health(&self) -> Result<(), ClientError> {
        self.http.get(format!("{}/health", self.base)).send().await?.error_for_status()?;
        Ok(())
    }

    pub async fn validate(&self, req: &ValidateRequest) -> Result<ValidateResponse, ClientError> {
        self.post("/v1/scenario/validate", req).await
    }

    pub async fn plan(&self, req: &PlanRequest) -> Result<PlanResponse, ClientError> {
        self.post("/v1/plan", req).await
    }

    pub async fn compile(&self, plan: &MissionPlan, sn_codes: &[String]) -> Result<CompileResponse, ClientError> {
        self.post("/v1/compile", &CompileRequest { plan: plan.clone(), sn_codes: sn_codes.to_vec() }).await
    }

    pub async fn parse(&self, text: &str) -> Result<ParseResponse, ClientError> {
        self.post("/v1/parse", &ParseRequest { text: text.into() }).await
    }

    pub async fn fly(&self, req: &FlyRequest) -> Result<FlyResponse, ClientError> {
        self.post("/v1/fly", req).await
    }

    pub async fn report(&self, log: &str, plan: &MissionPlan) -> Result<ReportResponse, ClientError> {
        self.post("/v1/report", &ReportRequest { log: log.into(), plan: plan.clone() }).await
    }
}
