//! HTTP/JSON service exposing planning, compilation, flight execution and
//! reporting.
//!
//! Routes (all bodies JSON):
//!
//! | route                    | request           | response            |
//! |--------------------------|-------------------|---------------------|
//! | `GET /health`            |                   | `"ok"`              |
//! | `POST /v1/scenario/validate` | `ValidateRequest` | `ValidateResponse` |
//! | `POST /v1/plan`          | `PlanRequest`     | `PlanResponse`      |
//! | `POST /v1/compile`       | `CompileRequest`  | `CompileResponse`   |
//! | `POST /v1/parse`         | `ParseRequest`    | `ParseResponse`     |
//! | `POST /v1/fly`           | `FlyRequest`      | `FlyResponse`       |
//! | `POST /v1/report`        | `ReportRequest`   | `ReportResponse`    |
//!
//! Failures come back as `ErrorBody` with status 400 (bad input) or 500.

use std::net::SocketAddr;

use axum::body::Bytes;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lumen_core::flight_log::FlightLog;
use lumen_core::flight_text::{compile, parse, FlightText};
use lumen_core::planner::{plan_mission_with, MissionPlan};
use lumen_core::report::build_report;
use lumen_core::svg::line_chart;
use lumen_core::wire::*;
use lumen_link::{fly, MissionClock, MockConfig, MockDrone, RetryPolicy};
use serde::de::DeserializeOwned;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

/// Mission seconds the engine waits for every drone to answer discovery.
pub const DISCOVERY_TIMEOUT_S: f64 = 10.0;

#[derive(Debug, Error)]
#[error("{message}")]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
    pub line: Option<usize>,
}

impl ApiError {
    pub fn invalid(message: impl Into<String>) -> Self {
        ApiError { kind: ErrorKind::Invalid, message: message.into(), line: None }
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError { kind: ErrorKind::Internal, message: message.into(), line: None }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.kind {
            ErrorKind::Invalid => StatusCode::BAD_REQUEST,
            ErrorKind::Aborted => StatusCode::CONFLICT,
            ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = ErrorBody { kind: self.kind, error: self.message, line: self.line };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn decode<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid(format!("bad request body: {e}")))
}

fn parse_text(text: &str) -> Result<FlightText, ApiError> {
    parse(text).map_err(|e| ApiError { kind: ErrorKind::Invalid, line: Some(e.line()), message: e.to_string() })
}

pub fn router() -> Router {
    Router::new()
        .route("/health", get(|| async { Json("ok") }))
        .route("/v1/scenario/validate", post(validate))
        .route("/v1/plan", post(plan))
        .route("/v1/compile", post(compile_text))
        .route("/v1/parse", post(parse_flight_text))
        .route("/v1/fly", post(fly_mission))
        .route("/v1/report", post(report))
}

async fn validate(body: Bytes) -> ApiResult<ValidateResponse> {
    let req: ValidateRequest = decode(&body)?;
    let s = req.scenario.into_scenario().map_err(|e| ApiError::invalid(e.to_string()))?;
    Ok(Json(ValidateResponse { users: s.users.len(), fleet: s.fleet_size() }))
}

async fn plan(body: Bytes) -> ApiResult<PlanResponse> {
    let req: PlanRequest = decode(&body)?;
    let scenario = req.scenario.into_scenario().map_err(|e| ApiError::invalid(e.to_string()))?;
    let cfg = req.anneal.unwrap_or_default();
    cfg.validate().map_err(ApiError::invalid)?;
    let outcome = tokio::task::spawn_blocking(move || plan_mission_with(&scenario, &cfg))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| ApiError::invalid(e.to_string()))?;
    Ok(Json(PlanResponse { plan: outcome.plan, traces: outcome.traces }))
}

async fn compile_text(body: Bytes) -> ApiResult<CompileResponse> {
    let req: CompileRequest = decode(&body)?;
    let out = compile(&req.plan, &req.sn_codes).map_err(|e| ApiError::invalid(e.to_string()))?;
    Ok(Json(CompileResponse { text: out.text.render(), warnings: out.warnings }))
}

async fn parse_flight_text(body: Bytes) -> ApiResult<ParseResponse> {
    let req: ParseRequest = decode(&body)?;
    let ft = parse_text(&req.text)?;
    Ok(Json(ParseResponse {
        canonical: ft.render(),
        drones: ft.drone_count(),
        sn_map: ft.sn_map().to_vec(),
        commands: ft.preamble.len() + ft.body.len(),
        battery_check: ft.battery_threshold(),
    }))
}

async fn spawn_mocks(
    text: &FlightText,
    faults: &[FaultProfile],
    initial_battery: Option<f64>,
    plan: Option<&MissionPlan>,
    clock: MissionClock,
) -> Result<Vec<MockDrone>, ApiError> {
    let sns = text.sn_map();
    if faults.len() > 1 && faults.len() != sns.len() {
        return Err(ApiError::invalid(format!("{} fault profiles for {} drones", faults.len(), sns.len())));
    }
    let mut drones = Vec::new();
    for (k, (_, sn)) in sns.iter().enumerate() {
        let mut cfg = MockConfig::new(sn.clone());
        if let Some(p) = plan {
            cfg.propulsion = p.propulsion;
            cfg.energy = p.energy_config;
            cfg.kinematics = p.kinematics;
            cfg.initial_battery = p.battery_full_pct;
        }
        if let Some(b) = initial_battery {
            cfg.initial_battery = b;
        }
        cfg.faults = match faults {
            [] => FaultProfile::default(),
            [one] => FaultProfile { seed: one.seed.wrapping_add(k as u64), ..one.clone() },
            many => many[k].clone(),
        };
        cfg.faults.validate().map_err(ApiError::invalid)?;
        let local: SocketAddr = "127.0.0.1:0".parse().expect("literal address");
        drones.push(lumen_link::run_endpoint(cfg, local, clock).await.map_err(|e| ApiError::internal(e.to_string()))?);
    }
    Ok(drones)
}

async fn resolve(addrs: &[String]) -> Result<Vec<SocketAddr>, ApiError> {
    let mut out = Vec::new();
    for a in addrs {
        let with_port = if a.contains(':') { a.clone() } else { format!("{a}:{}", lumen_link::engine::DRONE_PORT) };
        let addr = tokio::net::lookup_host(&with_port)
            .await
            .ok()
            .and_then(|mut it| it.next())
            .ok_or_else(|| ApiError::invalid(format!("cannot resolve endpoint {a:?}")))?;
        out.push(addr);
    }
    Ok(out)
}

async fn fly_mission(body: Bytes) -> ApiResult<FlyResponse> {
    let req: FlyRequest = decode(&body)?;
    let text = parse_text(&req.text)?;
    if !(req.time_scale > 0.0 && req.time_scale.is_finite()) {
        return Err(ApiError::invalid(format!("time_scale must be positive, got {}", req.time_scale)));
    }
    let clock = MissionClock::new(req.time_scale);
    let (mocks, addrs) = match &req.target {
        FlyTarget::Mock { faults } => {
            let mocks = spawn_mocks(&text, faults, req.initial_battery, req.plan.as_ref(), clock).await?;
            let addrs = mocks.iter().map(|m| m.addr).collect();
            (mocks, addrs)
        }
        FlyTarget::Endpoints { addrs } => {
            if req.time_scale != 1.0 {
                return Err(ApiError::invalid("real endpoints fly in real time; time_scale must be 1"));
            }
            (Vec::new(), resolve(addrs).await?)
        }
    };
    let result = fly(&text, &addrs, &RetryPolicy::default(), clock, DISCOVERY_TIMEOUT_S).await;
    let mock_final = mocks.iter().map(|m| (m.sn(), m.state().battery)).collect();
    let resp = match result {
        Ok(log) => {
            tracing::info!(drones = addrs.len(), "mission completed");
            FlyResponse { outcome: FlyOutcome::Completed, log: log.render(), abort_reason: None, mock_final }
        }
        Err(abort) => {
            tracing::warn!(reason = %abort.reason, "mission aborted");
            FlyResponse {
                outcome: FlyOutcome::Aborted,
                log: abort.log.render(),
                abort_reason: Some(abort.reason),
                mock_final,
            }
        }
    };
    Ok(Json(resp))
}

async fn report(body: Bytes) -> ApiResult<ReportResponse> {
    let req: ReportRequest = decode(&body)?;
    let log: FlightLog = req.log.parse().map_err(|e: lumen_core::flight_log::LogError| {
        let line = match &e {
            lumen_core::flight_log::LogError::Malformed { line, .. } => Some(*line),
            _ => None,
        };
        ApiError { kind: ErrorKind::Invalid, message: e.to_string(), line }
    })?;
    let report = build_report(&log, &req.plan).map_err(|e| ApiError::invalid(e.to_string()))?;
    let series: Vec<(String, Vec<(f64, f64)>)> =
        report.series.iter().map(|s| (format!("drone {}", s.drone), s.points.clone())).collect();
    let svg = line_chart("Battery over the mission", "time (s)", "battery (%)", &series);
    Ok(Json(ReportResponse { csv: report.series_csv(), summary: report.summary_text(), svg, report }))
}

/// A service running on a background task.
pub struct ServiceHandle {
    pub addr: SocketAddr,
    task: JoinHandle<()>,
}

impl ServiceHandle {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        self.task.abort();
    }
}

pub async fn serve(listener: TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router()).await
}

/// Binds `bind` (port 0 picks a free one) and serves in the background.
pub async fn spawn(bind: SocketAddr) -> std::io::Result<ServiceHandle> {
    let listener = TcpListener::bind(bind).await?;
    let addr = listener.local_addr()?;
    let task = tokio::spawn(async move {
        if let Err(e) = serve(listener).await {
            tracing::error!("service stopped: {e}");
        }
    });
    Ok(ServiceHandle { addr, task })
}
