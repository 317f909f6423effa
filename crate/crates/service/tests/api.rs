use std::collections::HashSet;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use lstp::datagen::{gen_kg, GenConfig};
use lstp::dialog::{Engine, LexicalLinker, RandomGrounding, RandomTarget};
use lstp::kg::KnowledgeGraph;
use lstp::kge::{EmbeddingTable, NormKind};
use lstp::nn::Tensor2;
use lstp_service::{router, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

fn engine() -> Engine {
    let g = gen_kg(&GenConfig::desk()).unwrap();
    let emb = EmbeddingTable::new(Tensor2::zeros(g.num_entities(), 8), Tensor2::zeros(g.num_relations(), 8), NormKind::L2).unwrap();
    let linker = LexicalLinker::new(&g, 8);
    Engine::new(
        Arc::new(g),
        Arc::new(emb),
        Arc::new(linker),
        Arc::new(RandomTarget { seed: 1 }),
        Arc::new(RandomGrounding { seed: 2 }),
    )
    .unwrap()
}

fn app() -> (Router, Arc<KnowledgeGraph>) {
    let e = engine();
    let g = e.graph.clone();
    (router(e, ServiceConfig::default()), g)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, v)
}

async fn new_session(app: &Router, body: Value) -> String {
    let (s, v) = call(app, "POST", "/session", Some(body)).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn health_and_session_creation() {
    let (app, _) = app();
    assert_eq!(call(&app, "GET", "/healthz", None).await.0, StatusCode::OK);
    let id = new_session(&app, json!({})).await;
    assert_eq!(id.len(), 32);
    assert!(id.chars().all(|c| c.is_ascii_hexdigit()));
    assert_ne!(id, new_session(&app, json!({})).await);
    let (s, _) = call(&app, "POST", "/session", None).await;
    assert_eq!(s, StatusCode::CREATED);
}

#[tokio::test]
async fn profile_is_stored_and_validated() {
    let (app, _) = app();
    let id = new_session(&app, json!({"profile": [[3, 100]]})).await;
    let (s, v) = call(&app, "GET", &format!("/session/{id}/state"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["profile"], json!([[3, 100]]));

    let (s, v) = call(&app, "POST", "/session", Some(json!({"profile": [[3, 100], [99999, 200]]}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["field"], "profile[1][0]");
    let (s, v) = call(&app, "POST", "/session", Some(json!({"profile": [[3]]}))).await;
    assert_eq!((s, v["field"].as_str()), (StatusCode::BAD_REQUEST, Some("profile[0]")));
    let req = Request::post("/session").body(Body::from("{not json")).unwrap();
    assert_eq!(app.clone().oneshot(req).await.unwrap().status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn message_payload_has_every_field() {
    let (app, g) = app();
    let id = new_session(&app, json!({})).await;
    let name = g.entities()[5].name.clone();
    let (s, v) = call(&app, "POST", &format!("/session/{id}/message"), Some(json!({"text": format!("I like {name}")}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    for f in ["reply", "action", "entity", "knowledge", "linked_entities", "debug"] {
        assert!(v.get(f).is_some(), "missing {f}: {v}");
    }
    assert!(["recommend", "ground"].contains(&v["action"].as_str().unwrap()));
    assert_eq!(v["linked_entities"][0]["name"], name);
    for k in ["id", "name", "kind"] {
        assert!(v["entity"].get(k).is_some());
    }
    assert!(v["debug"]["ltp_target"]["id"].is_u64() && v["debug"]["stp_top"]["id"].is_u64());
    assert_eq!(v["debug"]["stp_top"], v["entity"]);
    assert!(v["knowledge"].as_array().unwrap().iter().all(|t| t.as_array().unwrap().len() == 3));
}

#[tokio::test]
async fn bad_messages_are_rejected() {
    let (app, _) = app();
    let id = new_session(&app, json!({})).await;
    let (s, _) = call(&app, "POST", &format!("/session/{id}/message"), Some(json!({"text": "   "}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", &format!("/session/{id}/message"), Some(json!({}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "POST", "/session/deadbeef/message", Some(json!({"text": "hi"}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/session/deadbeef/state", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn state_lists_user_and_agent_turns() {
    let (app, _) = app();
    let id = new_session(&app, json!({})).await;
    for t in ["hello", "something else"] {
        call(&app, "POST", &format!("/session/{id}/message"), Some(json!({"text": t}))).await;
    }
    let (_, v) = call(&app, "GET", &format!("/session/{id}/state"), None).await;
    let speakers: Vec<&str> = v["turns"].as_array().unwrap().iter().map(|t| t["speaker"].as_str().unwrap()).collect();
    assert_eq!(speakers, ["user", "agent", "user", "agent"]);
    assert_eq!(v["trace"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn entity_card_lists_graph_triples() {
    let (app, g) = app();
    let known: HashSet<[String; 3]> = g
        .triples()
        .iter()
        .map(|t| [g.name(t.head).to_string(), g.relation_name(t.rel).to_string(), g.name(t.tail).to_string()])
        .collect();
    for id in [0usize, 7, 150] {
        let (s, v) = call(&app, "GET", &format!("/kg/entity/{id}"), None).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v["name"], g.entities()[id].name);
        let ts = v["triples"].as_array().unwrap();
        assert!(!ts.is_empty() && ts.len() <= 20);
        for t in ts {
            let t: [String; 3] = serde_json::from_value(t.clone()).unwrap();
            assert!(known.contains(&t));
            assert!(t[0] == v["name"] || t[2] == v["name"]);
        }
    }
    assert_eq!(call(&app, "GET", "/kg/entity/99999", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/kg/entity/abc", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn interleaved_sessions_do_not_share_state() {
    let (app, _) = app();
    let a = new_session(&app, json!({})).await;
    let b = new_session(&app, json!({})).await;
    for i in 0..3 {
        call(&app, "POST", &format!("/session/{a}/message"), Some(json!({"text": format!("a{i}")}))).await;
        call(&app, "POST", &format!("/session/{b}/message"), Some(json!({"text": format!("b{i}")}))).await;
    }
    for (id, p) in [(a, "a"), (b, "b")] {
        let (_, v) = call(&app, "GET", &format!("/session/{id}/state"), None).await;
        let texts: Vec<&str> = v["trace"].as_array().unwrap().iter().map(|r| r["user_text"].as_str().unwrap()).collect();
        assert_eq!(texts, [format!("{p}0"), format!("{p}1"), format!("{p}2")]);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_posts_to_one_session_are_serialised() {
    let (app, _) = app();
    let id = new_session(&app, json!({})).await;
    let uri = format!("/session/{id}/message");
    let posts = (0..8).map(|i| {
        let app = app.clone();
        let uri = uri.clone();
        tokio::spawn(async move { call(&app, "POST", &uri, Some(json!({"text": format!("m{i}")}))).await })
    });
    for p in posts {
        assert_eq!(p.await.unwrap().0, StatusCode::OK);
    }
    let (_, v) = call(&app, "GET", &format!("/session/{id}/state"), None).await;
    let trace = v["trace"].as_array().unwrap();
    assert_eq!(trace.len(), 8);
    let turns: Vec<u64> = trace.iter().map(|r| r["turn"].as_u64().unwrap()).collect();
    assert_eq!(turns, (0..8).collect::<Vec<_>>());
    let texts: HashSet<&str> = trace.iter().map(|r| r["user_text"].as_str().unwrap()).collect();
    assert_eq!(texts.len(), 8);
    assert_eq!(v["turns"].as_array().unwrap().len(), 16);
}

#[tokio::test]
async fn idle_sessions_expire() {
    let app = router(engine(), ServiceConfig { ttl: Duration::ZERO });
    let id = new_session(&app, json!({})).await;
    let (s, _) = call(&app, "GET", &format!("/session/{id}/state"), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn cors_preflight_is_answered() {
    let (app, _) = app();
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/session")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert!(resp.headers().contains_key("access-control-allow-origin"));
}
