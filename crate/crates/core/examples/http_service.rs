//! Drives the HTTP router in-process: create a session, post actions until
//! a hint arrives, fetch an explanation page and the usage stats.

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use acsp::service::{router, AppState, ManualClock, Registry};

async fn call(app: &axum::Router, method: Method, uri: &str, body: Option<Value>) -> (u16, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status().as_u16();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::main]
async fn main() {
    let state = Arc::new(AppState::new(Registry::default(), Box::new(ManualClock::new(0, 700)), None));
    let app = router(state);

    let (status, created) =
        call(&app, Method::POST, "/sessions", Some(json!({"problem": "coloring", "model": "demo"}))).await;
    let id = created["session"].as_str().unwrap().to_string();
    println!("{status} created {id} with {} arcs", created["network"]["arcs"].as_array().unwrap().len());

    let (status, err) = call(&app, Method::GET, &format!("/sessions/{id}/explanations/WhyHint"), None).await;
    println!("{status} before any hint: {}", err["error"]["code"]);

    for i in 0.. {
        let action = if i % 2 == 0 { "AutoAC" } else { "Reset" };
        let (_, r) =
            call(&app, Method::POST, &format!("/sessions/{id}/actions"), Some(json!({"action": action}))).await;
        if !r["hint"].is_null() {
            println!("hint after seq {}: {}", r["seq"], r["hint"]["text"]);
            break;
        }
    }

    let (status, page) = call(&app, Method::GET, &format!("/sessions/{id}/explanations/HowScore"), None).await;
    println!("{status} {}", page["title"]);
    let (_, stats) = call(&app, Method::GET, &format!("/sessions/{id}/stats"), None).await;
    println!("stats {stats}");
}
