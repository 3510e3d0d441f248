use std::collections::HashSet;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use chance_utility::elicitation::{Session, CASE_STUDY_C_GRID, CASE_STUDY_END_POINT_P};
use chance_utility_service::{router, SessionStore};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(dir: &Path) -> Router {
    router(Arc::new(SessionStore::open(dir).unwrap()))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn end_point_request() -> Value {
    json!({
        "mode": "end_point",
        "c_grid": CASE_STUDY_C_GRID,
        "p_grids": [CASE_STUDY_END_POINT_P],
        "seed": 3,
    })
}

async fn create(app: &Router, body: Value) -> (String, Value) {
    let (status, resp) = call(app, Method::POST, "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{resp}");
    (resp["session_id"].as_str().unwrap().to_string(), resp)
}

async fn answer(app: &Router, id: &str, gamble_id: &str, y: i64) -> (StatusCode, Value) {
    call(app, Method::POST, &format!("/sessions/{id}/answers"), Some(json!({"gamble_id": gamble_id, "y": y}))).await
}

/// Answers every remaining gamble with the step rule `y = 1 iff p >= c`.
async fn answer_all(app: &Router, id: &str) -> usize {
    let mut n = 0;
    loop {
        let (status, next) = call(app, Method::GET, &format!("/sessions/{id}/next"), None).await;
        assert_eq!(status, StatusCode::OK);
        if next["status"] == "complete" {
            return n;
        }
        let g = &next["gamble"];
        let y = i64::from(g["p"].as_f64().unwrap() >= g["c"].as_f64().unwrap());
        let (status, ack) = answer(app, id, g["id"].as_str().unwrap(), y).await;
        assert_eq!(status, StatusCode::OK, "{ack}");
        n += 1;
    }
}

#[tokio::test]
async fn create_returns_first_scheduled_gamble() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (_, resp) = create(&app, end_point_request()).await;
    assert_eq!(resp["created"], true);
    assert_eq!(resp["next"]["status"], "gamble");
    assert_eq!(resp["next"]["progress"], json!({"answered": 0, "total": 40}));
    let g = &resp["next"]["gamble"];
    assert!(CASE_STUDY_C_GRID.contains(&g["c"].as_f64().unwrap()));
    assert!(CASE_STUDY_END_POINT_P.contains(&g["p"].as_f64().unwrap()));
    assert_eq!((g["prize_lo"].as_f64(), g["prize_hi"].as_f64()), (Some(0.0), Some(1.0)));
}

#[tokio::test]
async fn create_validates_requests() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let mut no_mode = end_point_request();
    no_mode.as_object_mut().unwrap().remove("mode");
    assert_eq!(call(&app, Method::POST, "/sessions", Some(no_mode)).await.0, StatusCode::UNPROCESSABLE_ENTITY);

    for (field, bad) in [("c_grid", json!([0.0, 0.5])), ("c_grid", json!([0.5, 1.0])), ("p_grids", json!([[0.3, 1.0]]))] {
        let mut req = end_point_request();
        req[field] = bad;
        let (status, body) = call(&app, Method::POST, "/sessions", Some(req)).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
        assert!(body["error"].as_str().unwrap().contains("strictly inside"), "{body}");
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[tokio::test]
async fn client_token_makes_create_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let mut req = end_point_request();
    req["client_token"] = json!("desk-7");
    let (id, _) = create(&app, req.clone()).await;
    let (status, again) = call(&app, Method::POST, "/sessions", Some(req)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again["session_id"], id.as_str());
    assert_eq!(again["created"], false);
}

#[tokio::test]
async fn answers_advance_progress_and_reject_replays() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (id, resp) = create(&app, end_point_request()).await;
    let gid = resp["next"]["gamble"]["id"].as_str().unwrap().to_string();

    assert_eq!(answer(&app, &id, &gid, 2).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(answer(&app, &id, &gid, -1).await.0, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, ack) = answer(&app, &id, &gid, 1).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ack["progress"]["answered"], 1);
    assert_eq!(ack["complete"], false);
    assert_eq!(answer(&app, &id, &gid, 0).await.0, StatusCode::CONFLICT);
    assert_eq!(answer(&app, &id, "e9-9-9", 0).await.0, StatusCode::NOT_FOUND);

    let (_, next) = call(&app, Method::GET, &format!("/sessions/{id}/next"), None).await;
    assert_ne!(next["gamble"]["id"], gid.as_str());
}

#[tokio::test]
async fn unknown_sessions_are_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    for uri in ["/sessions/nope", "/sessions/nope/next", "/sessions/nope/utility"] {
        assert_eq!(call(&app, Method::GET, uri, None).await.0, StatusCode::NOT_FOUND, "{uri}");
    }
    assert_eq!(answer(&app, "nope", "e0-0-0", 1).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn completed_session_reports_curve_and_refuses_answers() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (id, resp) = create(&app, end_point_request()).await;
    let first = resp["next"]["gamble"]["id"].as_str().unwrap().to_string();

    let (_, empty) = call(&app, Method::GET, &format!("/sessions/{id}/utility"), None).await;
    assert_eq!(empty["points"], json!([]));
    assert!(empty["note"].as_str().is_some());

    assert_eq!(answer_all(&app, &id).await, 40);
    let (_, done) = call(&app, Method::GET, &format!("/sessions/{id}/next"), None).await;
    assert_eq!(done["status"], "complete");
    assert_eq!(done["utility"]["points"].as_array().unwrap().len(), 5);
    assert_eq!(answer(&app, &id, &first, 1).await.0, StatusCode::CONFLICT);

    for method in ["mle", "bayes"] {
        let (status, curve) = call(&app, Method::GET, &format!("/sessions/{id}/utility?method={method}"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(curve["method"], method);
        assert!(curve.get("note").is_none());
        let points = curve["points"].as_array().unwrap();
        assert_eq!(points.len(), 5);
        assert!(points.iter().all(|p| p["method"] == method));
    }
    let uri = format!("/sessions/{id}/utility?method=median");
    assert_eq!(call(&app, Method::GET, &uri, None).await.0, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn exported_document_replays_to_the_same_curve() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (id, _) = create(&app, end_point_request()).await;
    answer_all(&app, &id).await;
    let (_, doc) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    let session = Session::from_json(&doc.to_string()).unwrap();
    assert_eq!(session.replay().unwrap(), session);
    let (_, curve) = call(&app, Method::GET, &format!("/sessions/{id}/utility?method=bayes"), None).await;
    let cfg = chance_utility::EstimationConfig::with_method(chance_utility::EstimationMethod::Bayes);
    let local = chance_utility::compute_session_utilities(&session, &cfg, false).unwrap();
    let served: Vec<f64> = curve["points"].as_array().unwrap().iter().map(|p| p["u"].as_f64().unwrap()).collect();
    assert_eq!(served, local.iter().map(|p| p.u).collect::<Vec<_>>());
}

#[tokio::test]
async fn restart_reproduces_session_state() {
    let dir = tempfile::tempdir().unwrap();
    let (id, before) = {
        let app = app(dir.path());
        let (id, resp) = create(&app, json!({"mode": "adjacent", "c_grid": CASE_STUDY_C_GRID, "p_grids": [[0.3, 0.5, 0.7]], "seed": 11})).await;
        let mut next = resp["next"].clone();
        for k in 0..12 {
            let gid = next["gamble"]["id"].as_str().unwrap().to_string();
            assert_eq!(answer(&app, &id, &gid, k % 2).await.0, StatusCode::OK);
            next = call(&app, Method::GET, &format!("/sessions/{id}/next"), None).await.1;
        }
        let doc = call(&app, Method::GET, &format!("/sessions/{id}"), None).await.1;
        (id, doc)
    };
    let app = app(dir.path());
    let after = call(&app, Method::GET, &format!("/sessions/{id}"), None).await.1;
    assert_eq!(before, after);
    assert_eq!(after["answered"].as_array().unwrap().len(), 12);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_answers_apply_exactly_once() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (id, _) = create(&app, end_point_request()).await;
    let (_, doc) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    let ids: Vec<String> = doc["pending"].as_array().unwrap().iter().map(|g| g["id"].as_str().unwrap().to_string()).collect();
    assert_eq!(ids.len(), 40);

    // every gamble is answered twice, concurrently
    let mut tasks = Vec::new();
    for gid in ids.iter().chain(ids.iter()).cloned() {
        let (app, id) = (app.clone(), id.clone());
        tasks.push(tokio::spawn(async move { answer(&app, &id, &gid, 1).await.0 }));
    }
    let mut ok = 0;
    for t in tasks {
        match t.await.unwrap() {
            StatusCode::OK => ok += 1,
            StatusCode::CONFLICT => {}
            other => panic!("unexpected status {other}"),
        }
    }
    assert_eq!(ok, 40);
    let (_, doc) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    let answered: Vec<&str> = doc["answered"].as_array().unwrap().iter().map(|a| a["gamble"]["id"].as_str().unwrap()).collect();
    assert_eq!(answered.len(), 40);
    assert_eq!(answered.iter().collect::<HashSet<_>>().len(), 40);
    assert_eq!(doc["pending"], json!([]));
    let reopened = SessionStore::open(dir.path()).unwrap();
    assert_eq!(reopened.get(&id).unwrap().answered.len(), 40);
}
