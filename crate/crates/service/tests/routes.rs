use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use lumen_core::wire::*;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(method: &str, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let resp = lumen_service::router().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn dense() -> Value {
    json!({
        "users": [
            {"x": 0.0, "y": 3.0, "beta": 2, "t_user": 10.0},
            {"x": 0.5, "y": 3.2, "beta": 2, "t_user": 10.0},
            {"x": -0.3, "y": 2.8, "beta": 2, "t_user": 10.0}
        ],
        "fleet": [{"home": [0.0, 0.0, 0.0]}]
    })
}

async fn planned() -> PlanResponse {
    let (s, v) = call("POST", "/v1/plan", json!({"scenario": dense()})).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    serde_json::from_value(v).unwrap()
}

async fn compiled(plan: &PlanResponse) -> String {
    let (s, v) = call("POST", "/v1/compile", json!({"plan": plan.plan, "sn_codes": ["SNA"]})).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    serde_json::from_value::<CompileResponse>(v).unwrap().text
}

#[tokio::test]
async fn health() {
    let (s, v) = call("GET", "/health", Value::Null).await;
    assert_eq!((s, v), (StatusCode::OK, json!("ok")));
}

#[tokio::test]
async fn validate_counts_and_rejects() {
    let (s, v) = call("POST", "/v1/scenario/validate", json!({"scenario": dense()})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!({"users": 3, "fleet": 1}));

    let mut bad = dense();
    bad["users"][0]["beta"] = json!(7);
    let (s, v) = call("POST", "/v1/scenario/validate", json!({"scenario": bad})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["kind"], "invalid");
}

#[tokio::test]
async fn malformed_body_is_bad_request() {
    let (s, v) = call("POST", "/v1/plan", json!({"nope": 1})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("bad request body"));
}

#[tokio::test]
async fn plan_is_deterministic() {
    let a = planned().await;
    let b = planned().await;
    assert_eq!(a, b);
    assert_eq!(a.plan.uavs.len(), 1);
    assert_eq!(a.traces.len(), 1);
}

#[tokio::test]
async fn compile_then_parse() {
    let plan = planned().await;
    let text = compiled(&plan).await;
    let (s, v) = call("POST", "/v1/parse", json!({"text": text})).await;
    assert_eq!(s, StatusCode::OK);
    let p: ParseResponse = serde_json::from_value(v).unwrap();
    assert_eq!(p.canonical, text);
    assert_eq!(p.drones, 1);
    assert_eq!(p.battery_check, 5);
}

#[tokio::test]
async fn parse_error_carries_line() {
    let (s, v) = call("POST", "/v1/parse", json!({"text": "scan 1\ncorrect_ip\nbogus\n"})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["line"], 3);
}

#[tokio::test]
async fn fly_then_report() {
    let plan = planned().await;
    let text = compiled(&plan).await;
    let req = json!({"text": text, "target": {"kind": "mock"}, "time_scale": 0.02, "plan": plan.plan});
    let (s, v) = call("POST", "/v1/fly", req).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let fly: FlyResponse = serde_json::from_value(v).unwrap();
    assert_eq!(fly.outcome, FlyOutcome::Completed);
    assert_eq!(fly.mock_final.len(), 1);

    let (s, v) = call("POST", "/v1/report", json!({"log": fly.log, "plan": plan.plan})).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let r: ReportResponse = serde_json::from_value(v).unwrap();
    assert!(r.csv.starts_with("drone,t_s,battery_pct"));
    assert!(r.svg.contains("<polyline"));
    assert!(r.summary.contains("drone 1"));
}

#[tokio::test]
async fn fly_abort_is_reported_with_log() {
    let plan = planned().await;
    let text = compiled(&plan).await;
    let faults = json!([{"drop_first": {"forward": 99}}]);
    let req = json!({"text": text, "target": {"kind": "mock", "faults": faults}, "time_scale": 0.01});
    let (s, v) = call("POST", "/v1/fly", req).await;
    assert_eq!(s, StatusCode::OK);
    let fly: FlyResponse = serde_json::from_value(v).unwrap();
    assert_eq!(fly.outcome, FlyOutcome::Aborted);
    assert!(fly.abort_reason.unwrap().contains("lost"));
    assert!(fly.log.contains("EVENT retry"));
}

#[tokio::test]
async fn fly_rejects_bad_inputs() {
    let plan = planned().await;
    let text = compiled(&plan).await;
    let (s, _) = call("POST", "/v1/fly", json!({"text": text, "target": {"kind": "mock"}, "time_scale": 0.0})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let faults = json!([{"drop_prob": 2.0}]);
    let (s, v) = call("POST", "/v1/fly", json!({"text": text, "target": {"kind": "mock", "faults": faults}})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"].as_str().unwrap().contains("drop_prob"));
    let eps = json!({"kind": "endpoints", "addrs": ["127.0.0.1:9"]});
    let (s, _) = call("POST", "/v1/fly", json!({"text": text, "target": eps, "time_scale": 0.5})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn report_rejects_malformed_log() {
    let plan = planned().await;
    let (s, v) = call("POST", "/v1/report", json!({"log": "0 1 SENT ok\nnonsense\n", "plan": plan.plan})).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["line"], 2);
}
