use std::time::Duration;

use axum::routing::post;
use axum::{Json, Router};
use persuasion_core::social::{Safety, SocialBackend};
use persuasion_service::backend::HttpSocialBackend;
use serde_json::{json, Value};

fn spawn_server() -> String {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    let app = Router::new()
        .route(
            "/reply",
            post(|Json(body): Json<Value>| async move {
                let ctx = body["context"].as_str().unwrap_or("").to_string();
                let safety = if ctx.contains("weapons") { "potentially_unsafe" } else { "safe" };
                Json(json!({ "text": format!("echo {}", ctx.lines().count()), "safety": safety }))
            }),
        )
        .route(
            "/slow",
            post(|| async {
                tokio::time::sleep(Duration::from_secs(2)).await;
                Json(json!({ "text": "late", "safety": "safe" }))
            }),
        );
    std::thread::spawn(move || rt.block_on(async { axum::serve(listener, app).await.unwrap() }));
    format!("http://{addr}")
}

#[test]
fn posts_context_and_reads_candidate() {
    let base = spawn_server();
    let backend = HttpSocialBackend::new(format!("{base}/reply"), Duration::from_secs(5), 3);
    let c = backend.generate("PERSUADER: hi\nPERSUADEE: hello").unwrap();
    assert_eq!(c.text, "echo 2");
    assert_eq!(c.safety, Safety::Safe);
    assert_eq!(backend.generate("weapons").unwrap().safety, Safety::PotentiallyUnsafe);
    assert_eq!(backend.max_in_flight(), 3);
}

#[test]
fn timeouts_and_bad_endpoints_are_errors() {
    let base = spawn_server();
    let slow = HttpSocialBackend::new(format!("{base}/slow"), Duration::from_millis(200), 1);
    assert!(slow.generate("x").is_err());
    let missing = HttpSocialBackend::new(format!("{base}/missing"), Duration::from_secs(2), 1);
    assert!(missing.generate("x").is_err());
}
