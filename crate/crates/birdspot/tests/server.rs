mod common;

use axum::body::Body;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use birdspot::events::{read_event_log, replay};
use birdspot::server::{router, AppState};
use common::{fixture_engine, fixture_route, FOUR};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>, key: Option<&str>) -> (StatusCode, HeaderMap, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(k) = key {
        req = req.header("idempotency-key", k);
    }
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, headers, value)
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let (s, _, v) = call(app, Method::POST, uri, Some(body), None).await;
    (s, v)
}

fn app() -> Router {
    router(AppState::new(fixture_engine(), None))
}

fn assert_error_shape(v: &Value, code: &str) {
    assert_eq!(v["code"], code, "{v}");
    assert!(v["message"].as_str().is_some_and(|m| !m.is_empty()), "{v}");
    assert!(v.as_object().unwrap().contains_key("detail"), "{v}");
}

/// Player, route and started hike; returns (player_id, hike_id).
async fn start_hike(app: &Router) -> (String, String) {
    let (s, player) = post(app, "/players", json!({})).await;
    assert_eq!(s, StatusCode::CREATED);
    let route = serde_json::to_value(fixture_route()).unwrap();
    let (s, r) = post(app, "/routes", route).await;
    assert_eq!(s, StatusCode::CREATED);
    assert!((r["length_km"].as_f64().unwrap() - 4.5).abs() < 0.01);
    let player_id = player["player_id"].as_str().unwrap().to_string();
    let body = json!({ "player_id": player_id, "route_id": r["route_id"], "ts": "2017-05-20T07:00:00" });
    let (s, h) = post(app, "/hikes", body).await;
    assert_eq!(s, StatusCode::CREATED, "{h}");
    (player_id, h["hike_id"].as_str().unwrap().to_string())
}

#[tokio::test]
async fn health_reports_ok() {
    let (s, _, v) = call(&app(), Method::GET, "/health", None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!({ "status": "ok" }));
}

#[tokio::test]
async fn new_player_starts_at_level_one() {
    let app = app();
    let (s, v) = post(&app, "/players", json!({})).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["points"], 0);
    assert_eq!(v["level"], 1);
    let id = v["player_id"].as_str().unwrap();
    let (s, _, got) = call(&app, Method::GET, &format!("/players/{id}"), None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(got, v);
}

#[tokio::test]
async fn unknown_ids_are_not_found() {
    let app = app();
    let (_, p) = post(&app, "/players", json!({})).await;
    let (s, v) = post(&app, "/hikes", json!({ "player_id": p["player_id"], "route_id": "r404" })).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_error_shape(&v, "not_found");
    let (s, _, v) = call(&app, Method::GET, "/players/nobody", None, None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_error_shape(&v, "not_found");
    let (s, v) = post(&app, "/verification/v999/answer", json!({ "attribute": "a", "answer": "yes" })).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_error_shape(&v, "not_found");
    let (s, _, v) = call(&app, Method::GET, "/nowhere", None, None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_error_shape(&v, "not_found");
}

#[tokio::test]
async fn malformed_bodies_are_bad_requests() {
    let app = app();
    let (_, hike) = start_hike(&app).await;
    let (s, v) = post(&app, &format!("/hikes/{hike}/position"), json!({ "lat": "north" })).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error_shape(&v, "bad_request");
    let bad_ts = json!({ "lat": 37.38, "lon": -80.07, "ts": "yesterday" });
    let (s, v) = post(&app, &format!("/hikes/{hike}/position"), bad_ts).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error_shape(&v, "bad_request");
    let (s, v) = post(&app, "/routes", json!({ "name": "x", "waypoints": [[1.0, 2.0]] })).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error_shape(&v, "bad_request");
    let photo = json!({ "claimed_species": "Pine Warbler", "photo_attributes": [0, 1] });
    let (s, v) = post(&app, &format!("/hikes/{hike}/sightings"), photo).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error_shape(&v, "bad_request");
}

#[tokio::test]
async fn sparse_area_gives_empty_suggestions() {
    let app = app();
    let (_, hike) = start_hike(&app).await;
    let body = json!({ "lat": 10.0, "lon": 10.0, "ts": "2017-05-20T07:05:00" });
    let (s, v) = post(&app, &format!("/hikes/{hike}/position"), body).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v, json!({ "suggestions": [] }));
}

#[tokio::test]
async fn time_going_backwards_is_a_conflict() {
    let app = app();
    let (_, hike) = start_hike(&app).await;
    let uri = format!("/hikes/{hike}/position");
    let (s, _) = post(&app, &uri, json!({ "lat": 37.38, "lon": -80.07, "ts": "2017-05-20T07:10:00" })).await;
    assert_eq!(s, StatusCode::OK);
    let (s, v) = post(&app, &uri, json!({ "lat": 37.38, "lon": -80.07, "ts": "2017-05-20T07:05:00" })).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_error_shape(&v, "conflict");
}

#[tokio::test]
async fn full_hike_awards_points_and_reports() {
    let engine = fixture_engine();
    let truth: Vec<u8> = engine.matrix().row_of("Pine Warbler").unwrap().iter().map(|&b| b as u8).collect();
    let attributes = engine.matrix().attributes().to_vec();
    let app = router(AppState::new(engine, None));
    let (player, hike) = start_hike(&app).await;

    let route = fixture_route();
    let mid = route.position_at(route.length_km() / 2.0).unwrap();
    let body = json!({ "lat": mid.lat(), "lon": mid.lon(), "ts": "2017-05-20T07:45:00" });
    let (s, v) = post(&app, &format!("/hikes/{hike}/position"), body).await;
    assert_eq!(s, StatusCode::OK);
    let names: Vec<&str> = v["suggestions"].as_array().unwrap().iter().map(|s| s["species"].as_str().unwrap()).collect();
    for s in FOUR {
        assert!(names.contains(&s), "{names:?}");
    }

    let body = json!({ "claimed_species": "pine  warbler", "photo_attributes": truth });
    let (s, opened) = post(&app, &format!("/hikes/{hike}/sightings"), body).await;
    assert_eq!(s, StatusCode::CREATED, "{opened}");
    assert_eq!(opened["status"], "open");
    let session = opened["session_id"].as_str().unwrap().to_string();

    // Answering the wrong attribute is refused and names the pending one.
    let pending = opened["question"].as_str().unwrap().to_string();
    let wrong = attributes.iter().find(|a| **a != pending).unwrap();
    let (s, v) = post(&app, &format!("/verification/{session}/answer"), json!({ "attribute": wrong, "answer": "yes" })).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["detail"]["expected"], pending.as_str());

    let mut question = Some(pending);
    let mut last = Value::Null;
    while let Some(q) = question {
        let a = attributes.iter().position(|x| *x == q).unwrap();
        let answer = if truth[a] == 1 { "yes" } else { "no" };
        let (s, v) = post(&app, &format!("/verification/{session}/answer"), json!({ "attribute": q, "answer": answer })).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        question = v["question"].as_str().map(str::to_string);
        last = v;
    }
    assert_eq!(last["status"], "verified");
    assert_eq!(last["points_awarded"], 10);
    assert_eq!(last["points"], 10);

    // The session is closed now.
    let (s, v) = post(&app, &format!("/verification/{session}/answer"), json!({ "attribute": "eye_ring", "answer": "no" })).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(v["detail"]["status"], "verified");

    let (_, _, p) = call(&app, Method::GET, &format!("/players/{player}"), None, None).await;
    assert_eq!(p["points"], 10);
    assert_eq!(p["captures"], json!(["Pine Warbler"]));

    let (s, report) = post(&app, &format!("/hikes/{hike}/finish"), json!({})).await;
    assert_eq!(s, StatusCode::OK, "{report}");
    assert_eq!(report["spotted"], json!(["Pine Warbler"]));
    let expected: Vec<&str> = report["expected_species"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let missed: Vec<&str> = expected.iter().copied().filter(|s| *s != "Pine Warbler").collect();
    assert_eq!(report["missed"], json!(missed));
    for s in FOUR {
        assert!(expected.contains(&s));
    }

    let (s, v) = post(&app, &format!("/hikes/{hike}/finish"), json!({})).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_error_shape(&v, "conflict");
}

#[tokio::test]
async fn idempotency_key_replays_the_first_response() {
    let app = app();
    let (s1, h1, v1) = call(&app, Method::POST, "/players", Some(json!({})), Some("k-1")).await;
    let (s2, h2, v2) = call(&app, Method::POST, "/players", Some(json!({})), Some("k-1")).await;
    assert_eq!((s1, s2), (StatusCode::CREATED, StatusCode::CREATED));
    assert_eq!(v1, v2);
    assert!(h1.get("idempotent-replayed").is_none());
    assert_eq!(h2.get("idempotent-replayed").unwrap(), "true");

    // Without a key every call creates a new player.
    let (_, _, v3) = call(&app, Method::POST, "/players", Some(json!({})), None).await;
    assert_ne!(v3["player_id"], v1["player_id"]);

    // Same key, different body.
    let (s, _, v) = call(&app, Method::POST, "/players", Some(json!({ "x": 1 })), Some("k-1")).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_error_shape(&v, "conflict");
}

#[tokio::test]
async fn retried_position_is_applied_once() {
    let app = app();
    let (_, hike) = start_hike(&app).await;
    let body = json!({ "lat": 37.381, "lon": -80.07, "ts": "2017-05-20T07:02:00" });
    let uri = format!("/hikes/{hike}/position");
    let (s1, _, a) = call(&app, Method::POST, &uri, Some(body.clone()), Some("pos-1")).await;
    let (s2, _, b) = call(&app, Method::POST, &uri, Some(body), Some("pos-1")).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(a, b);
    let next = json!({ "lat": 37.389, "lon": -80.07, "ts": "2017-05-20T07:04:00" });
    post(&app, &uri, next).await;
    let (_, report) = post(&app, &format!("/hikes/{hike}/finish"), json!({})).await;
    // Two samples in the trace, not three.
    let expected = birdspot_core::geo::haversine_km(
        birdspot_core::GeoPoint::new(37.381, -80.07).unwrap(),
        birdspot_core::GeoPoint::new(37.389, -80.07).unwrap(),
    );
    assert_eq!(report["trace_distance_km"].as_f64().unwrap(), expected);
}

#[tokio::test]
async fn event_log_replays_to_served_state() {
    let dir = tempfile::tempdir().unwrap();
    let engine = fixture_engine();
    let truth: Vec<u8> = engine.matrix().row_of("Black Vulture").unwrap().iter().map(|&b| b as u8).collect();
    let attributes = engine.matrix().attributes().to_vec();
    let app = router(AppState::new(engine, Some(dir.path().to_path_buf())));
    let (player, hike) = start_hike(&app).await;
    let body = json!({ "claimed_species": "Black Vulture", "photo_attributes": truth });
    let (_, opened) = post(&app, &format!("/hikes/{hike}/sightings"), body).await;
    let session = opened["session_id"].as_str().unwrap().to_string();
    let mut question = opened["question"].as_str().map(str::to_string);
    while let Some(q) = question {
        let a = attributes.iter().position(|x| *x == q).unwrap();
        let answer = if truth[a] == 1 { "yes" } else { "no" };
        let (_, v) = post(&app, &format!("/verification/{session}/answer"), json!({ "attribute": q, "answer": answer })).await;
        question = v["question"].as_str().map(str::to_string);
    }
    post(&app, &format!("/hikes/{hike}/finish"), json!({})).await;

    let lines = read_event_log(&dir.path().join(format!("{player}.jsonl"))).unwrap();
    assert_eq!(lines.len(), 3);
    let record = replay(&player, &lines).unwrap();
    let (_, _, served) = call(&app, Method::GET, &format!("/players/{player}"), None, None).await;
    assert_eq!(served["points"], record.player.points);
    assert_eq!(served["points"], 10);
    assert_eq!(served["level"], record.player.level);
}
