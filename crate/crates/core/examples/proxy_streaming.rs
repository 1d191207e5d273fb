//! Proxy mode against a local mock upstream that streams server-sent
//! events; the reported TTFT is the arrival of the first content chunk.
//!
//! cargo run --example proxy_streaming

use axum::body::{Body, Bytes};
use axum::http::header;
use axum::response::Response;
use axum::routing::post;
use axum::Router;
use futures::stream;
use matrix_router::gateway::{Gateway, GatewayConfig, GatewayMode, RouteRequest};
use matrix_router::registry::MatrixConfig;
use std::convert::Infallible;
use std::time::Duration;

async fn completions() -> Response {
    let words = ["Rivers ", "carve ", "valleys."];
    let events = stream::unfold(0usize, move |i| async move {
        let line = match i {
            i if i < words.len() => {
                tokio::time::sleep(Duration::from_millis(if i == 0 { 250 } else { 40 })).await;
                format!(
                    "data: {}\n\n",
                    serde_json::json!({"choices": [{"delta": {"content": words[i]}}]})
                )
            }
            i if i == words.len() => "data: [DONE]\n\n".into(),
            _ => return None,
        };
        Some((Ok::<_, Infallible>(Bytes::from(line)), i + 1))
    });
    Response::builder()
        .header(header::CONTENT_TYPE, "text/event-stream")
        .body(Body::from_stream(events))
        .unwrap()
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let upstream = format!("http://{}", listener.local_addr()?);
    tokio::spawn(
        async move { axum::serve(listener, Router::new().route("/v1/chat/completions", post(completions))).await },
    );

    let matrix = MatrixConfig::from_toml_str(&format!(
        r#"
        [[models]]
        id = "llama-3"
        tier = "medium"
        unit_cost = 0.004
        latency_prior = 1.5

        [[backends]]
        id = "vllm"
        throughput_class = 3
        latency_class = 2
        memory_class = 2

        [[cells]]
        model = "llama-3"
        backend = "vllm"
        replicas = 1
        endpoint = "{upstream}"
        upstream_model = "meta-llama/Llama-3-8B-Instruct"
        "#
    ))?;
    let config = GatewayConfig {
        mode: GatewayMode::Proxy,
        scaling: false,
        ..GatewayConfig::default()
    };
    let gateway = Gateway::new(config, &matrix)?;
    let r = gateway
        .handle_route(RouteRequest::new("How do rivers shape land?"))
        .await?;
    println!(
        "{:?} from {}: ttft {:.3}s, latency {:.3}s, {} chunks, estimated ttft: {}",
        r.completion,
        r.service_id.as_deref().unwrap_or("?"),
        r.ttft,
        r.latency,
        r.output_tokens,
        r.ttft_estimated
    );
    Ok(())
}
