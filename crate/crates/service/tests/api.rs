use std::sync::{Arc, RwLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use cbtnlu_core::{LabelCatalog, Post};
use cbtnlu_service::{router, AnnotationStore};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(n: usize) -> axum::Router {
    let posts = (0..n)
        .map(|i| Post::new(&format!("post-{i:03}"), "I failed the exam.", "I am useless."))
        .collect();
    let store = AnnotationStore::in_memory(posts, LabelCatalog::load()).unwrap();
    router(Arc::new(RwLock::new(store)))
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
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
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn label(app: &axum::Router, post: &str, annotator: &str, add: &[&str], remove: &[&str]) -> (StatusCode, Value) {
    let body = json!({ "annotator": annotator, "add": add, "remove": remove });
    call(app, "POST", &format!("/api/posts/{post}/labels"), Some(body)).await
}

#[tokio::test]
async fn first_page_holds_fifty_of_120_posts() {
    let app = app(120);
    let (status, body) = call(&app, "GET", "/api/posts?page=1", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["error"].is_null());
    assert_eq!(body["data"]["items"].as_array().unwrap().len(), 50);
    assert_eq!(body["data"]["total"], 120);
    let (_, body) = call(&app, "GET", "/api/posts?page=3&page_size=50", None).await;
    assert_eq!(body["data"]["items"].as_array().unwrap().len(), 20);
    let (status, body) = call(&app, "GET", "/api/posts?page=9", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["data"]["items"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn malformed_pages_are_rejected() {
    let app = app(3);
    for uri in ["/api/posts?page=0", "/api/posts?page=abc", "/api/posts?page_size=500", "/api/posts?status=pending"] {
        let (status, body) = call(&app, "GET", uri, None).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert_eq!(body["error"]["code"], "BadPage", "{uri}");
        assert!(body["data"].is_null());
    }
}

#[tokio::test]
async fn labels_toggle_round_trip() {
    let app = app(3);
    let (status, body) = label(&app, "post-001", "ann", &["anxiety"], &[]).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["data"]["labels"], json!(["anxiety"]));
    let (_, body) = label(&app, "post-001", "ann", &["anxiety"], &[]).await;
    assert_eq!(body["data"]["labels"], json!(["anxiety"]));

    let (_, detail) = call(&app, "GET", "/api/posts/post-001", None).await;
    assert_eq!(detail["data"]["annotations"]["ann"], json!(["anxiety"]));

    label(&app, "post-001", "ann", &["work"], &[]).await;
    label(&app, "post-001", "ann", &[], &["work"]).await;
    let (_, detail) = call(&app, "GET", "/api/posts/post-001", None).await;
    assert_eq!(detail["data"]["annotations"]["ann"], json!(["anxiety"]));
}

#[tokio::test]
async fn error_statuses() {
    let app = app(2);
    let (status, body) = label(&app, "nope", "ann", &["anxiety"], &[]).await;
    assert_eq!((status, body["error"]["code"].as_str()), (StatusCode::NOT_FOUND, Some("UnknownPost")));
    let (status, body) = label(&app, "post-000", "ann", &["x"], &[]).await;
    assert_eq!((status, body["error"]["code"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("UnknownLabel")));
    let (status, body) = label(&app, "post-000", "ann", &["anger"], &["anger"]).await;
    assert_eq!(
        (status, body["error"]["code"].as_str()),
        (StatusCode::UNPROCESSABLE_ENTITY, Some("ConflictingRequest"))
    );
    let (status, _) = call(&app, "GET", "/api/posts/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, body) = call(&app, "POST", "/api/posts/post-000/labels", Some(json!({"add": []}))).await;
    assert_eq!((status, body["error"]["code"].as_str()), (StatusCode::BAD_REQUEST, Some("BadRequest")));
    let (status, body) = call(&app, "GET", "/api/nothing", None).await;
    assert_eq!((status, body["error"]["code"].as_str()), (StatusCode::NOT_FOUND, Some("NotFound")));
}

#[tokio::test]
async fn catalog_lists_31_labels() {
    let app = app(1);
    let (status, body) = call(&app, "GET", "/api/catalog", None).await;
    assert_eq!(status, StatusCode::OK);
    let labels = body["data"].as_array().unwrap();
    assert_eq!(labels.len(), 31);
    assert!(labels.iter().any(|l| l["id"] == "anxiety" && l["category"] == "emotion"));
}

#[tokio::test]
async fn agreement_reports_three_categories_and_overlap() {
    let app = app(60);
    for i in 0..60 {
        let post = format!("post-{i:03}");
        let labels: &[&str] = if i % 3 == 0 { &["anxiety", "work", "labelling"] } else { &["anger"] };
        label(&app, &post, "a", labels, &[]).await;
        if i < 50 {
            label(&app, &post, "b", labels, &[]).await;
        }
    }
    let (status, body) = call(&app, "GET", "/api/agreement?a=a&b=b", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["data"]["posts"], 50);
    let cats = body["data"]["categories"].as_array().unwrap();
    assert_eq!(cats.len(), 3);
    assert!(cats.iter().all(|c| c["result"]["kappa"] == 1.0));

    let (status, body) = call(&app, "GET", "/api/agreement?a=a&b=zed", None).await;
    assert_eq!((status, body["error"]["code"].as_str()), (StatusCode::CONFLICT, Some("NoDoublyAnnotatedPosts")));
    let (status, _) = call(&app, "GET", "/api/agreement?a=a", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn export_merges_by_policy() {
    let app = app(2);
    label(&app, "post-000", "a", &["anger"], &[]).await;
    label(&app, "post-000", "b", &["anger", "work"], &[]).await;
    let (_, body) = call(&app, "GET", "/api/export?policy=union", None).await;
    let rows = body["data"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["labels"], json!(["anger", "work"]));
    assert!(rows[1]["labels"].is_null());
    let (_, body) = call(&app, "GET", "/api/export?policy=primary&annotator=a", None).await;
    assert_eq!(body["data"][0]["labels"], json!(["anger"]));
    let (status, _) = call(&app, "GET", "/api/export?policy=primary", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn pending_filter_tracks_the_annotator() {
    let app = app(4);
    label(&app, "post-000", "ann", &[], &[]).await;
    label(&app, "post-002", "ann", &["grief"], &[]).await;
    let (_, body) = call(&app, "GET", "/api/posts?status=pending&annotator=ann", None).await;
    let ids: Vec<&str> = body["data"]["items"].as_array().unwrap().iter().map(|i| i["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["post-001", "post-003"]);
    assert_eq!(body["data"]["pending"], 2);
    let (_, body) = call(&app, "GET", "/api/posts?status=annotated&annotator=ann", None).await;
    assert_eq!(body["data"]["total"], 2);
    assert_eq!(body["data"]["items"][1]["labels"], json!(["grief"]));
}
