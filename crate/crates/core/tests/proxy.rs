//! Proxy mode against mock OpenAI-compatible upstreams.

use axum::body::{Body, Bytes};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use futures::stream;
use matrix_router::gateway::{Gateway, GatewayConfig, GatewayMode, RouteRequest};
use matrix_router::registry::MatrixConfig;
use matrix_router::sim::SuccessLimits;
use std::convert::Infallible;
use std::time::Duration;

const FIRST_CHUNK_DELAY: Duration = Duration::from_millis(100);

async fn streamed() -> Response {
    let chunks = ["Hello", " world"];
    let events = stream::unfold(0usize, move |i| async move {
        let line = match i {
            0 | 1 => {
                tokio::time::sleep(FIRST_CHUNK_DELAY).await;
                let v = serde_json::json!({"choices": [{"delta": {"content": chunks[i]}}]});
                format!("data: {v}\n\n")
            }
            2 => "data: [DONE]\n\n".to_string(),
            _ => return None,
        };
        Some((Ok::<_, Infallible>(Bytes::from(line)), i + 1))
    });
    // a role-only chunk first: it carries no content and must not count as TTFT
    let preamble = stream::once(async {
        Ok::<_, Infallible>(Bytes::from(
            "data: {\"choices\":[{\"delta\":{\"role\":\"assistant\"}}]}\n\n",
        ))
    });
    Response::builder()
        .header(header::CONTENT_TYPE, "text/event-stream")
        .body(Body::from_stream(futures::StreamExt::chain(preamble, events)))
        .unwrap()
}

async fn whole() -> Json<serde_json::Value> {
    tokio::time::sleep(Duration::from_millis(50)).await;
    Json(serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": "a complete answer"}}],
        "usage": {"completion_tokens": 3}
    }))
}

async fn broken() -> impl IntoResponse {
    (StatusCode::INTERNAL_SERVER_ERROR, "upstream exploded")
}

async fn stalled() -> Json<serde_json::Value> {
    tokio::time::sleep(Duration::from_secs(5)).await;
    Json(serde_json::json!({}))
}

async fn upstream() -> String {
    let app = Router::new()
        .route("/stream/v1/chat/completions", post(streamed))
        .route("/json/v1/chat/completions", post(whole))
        .route("/broken/v1/chat/completions", post(broken))
        .route("/stalled/v1/chat/completions", post(stalled));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await });
    format!("http://{addr}")
}

async fn proxy_gateway(path: &str, request_timeout: f64) -> Gateway {
    let base = upstream().await;
    let matrix = MatrixConfig::from_toml_str(&format!(
        r#"
        [[models]]
        id = "m"
        tier = "medium"
        unit_cost = 0.002
        latency_prior = 1.0

        [[backends]]
        id = "b"
        throughput_class = 2
        latency_class = 2
        memory_class = 2

        [[cells]]
        model = "m"
        backend = "b"
        replicas = 1
        endpoint = "{base}/{path}"
        "#
    ))
    .unwrap();
    let config = GatewayConfig {
        mode: GatewayMode::Proxy,
        scaling: false,
        limits: SuccessLimits {
            request_timeout,
            max_output_tokens: 256,
        },
        ..GatewayConfig::default()
    };
    Gateway::new(config, &matrix).unwrap()
}

#[tokio::test]
async fn streaming_ttft_is_first_content_chunk() {
    let g = proxy_gateway("stream", 10.0).await;
    let r = g.handle_route(RouteRequest::new("tell me about rivers")).await.unwrap();
    assert_eq!(r.completion, "Hello world");
    assert!(!r.ttft_estimated);
    assert_eq!(r.output_tokens, 2);
    let first = FIRST_CHUNK_DELAY.as_secs_f64();
    assert!(r.ttft >= first * 0.9 && r.ttft < first + 0.15, "ttft {}", r.ttft);
    assert!(
        r.latency >= 2.0 * first * 0.9 && r.latency > r.ttft,
        "latency {}",
        r.latency
    );
}

#[tokio::test]
async fn non_streaming_reply_estimates_ttft() {
    let g = proxy_gateway("json", 10.0).await;
    let r = g.handle_route(RouteRequest::new("tell me about rivers")).await.unwrap();
    assert_eq!(r.completion, "a complete answer");
    assert!(r.ttft_estimated);
    assert_eq!(r.ttft, r.latency);
    assert_eq!(r.output_tokens, 3);
}

#[tokio::test]
async fn upstream_error_is_502() {
    let g = proxy_gateway("broken", 10.0).await;
    let e = g
        .handle_route(RouteRequest::new("tell me about rivers"))
        .await
        .unwrap_err();
    assert_eq!(e.status, StatusCode::BAD_GATEWAY);
    assert_eq!(e.body.service_id.as_deref(), Some("m:b"));
    let m = g.metrics();
    assert_eq!((m.requests_total, m.failures), (1, 1));
}

#[tokio::test]
async fn slow_upstream_is_504() {
    let g = proxy_gateway("stalled", 0.3).await;
    let started = std::time::Instant::now();
    let e = g
        .handle_route(RouteRequest::new("tell me about rivers"))
        .await
        .unwrap_err();
    assert_eq!(e.status, StatusCode::GATEWAY_TIMEOUT);
    assert!(started.elapsed() < Duration::from_secs(2));
}
