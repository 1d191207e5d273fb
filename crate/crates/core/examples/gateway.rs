//! Starts a simulated gateway in-process and exercises its HTTP API.
//!
//! cargo run --example gateway

use matrix_router::gateway::{Gateway, GatewayConfig, MetricsSnapshot, RouteRequest, RouteResponse};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = GatewayConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/gateway.toml"))?;
    config.decision_log = None;
    let (addr, server) = Gateway::from_config(config)?.spawn("127.0.0.1:0").await?;
    let base = format!("http://{addr}");
    let client = reqwest::Client::new();

    for (text, profile) in [
        ("List three colors", None),
        ("Prove that every bounded monotone sequence converges", Some("quality")),
        ("Tell me about Paris", Some("cost")),
    ] {
        let mut req = RouteRequest::new(text);
        req.profile = profile.map(String::from);
        let r: RouteResponse = client
            .post(format!("{base}/v1/route"))
            .json(&req)
            .send()
            .await?
            .json()
            .await?;
        println!(
            "{text:?} [{}] -> {} ({:?}, {:?}) ttft {:.2}s latency {:.2}s cost {:.4}",
            profile.unwrap_or("default"),
            r.service_id.as_deref().unwrap_or("?"),
            r.tier,
            r.complexity_class,
            r.ttft,
            r.latency,
            r.cost
        );
    }

    let resp = client
        .post(format!("{base}/health/qwen-3:vllm"))
        .json(&serde_json::json!({"health": "down"}))
        .send()
        .await?;
    println!("mark qwen-3:vllm down: {}", resp.status());

    let bad = client
        .post(format!("{base}/v1/route"))
        .json(&serde_json::json!({"prompt": "hi", "profile": "fastest"}))
        .send()
        .await?;
    println!("unknown profile: {} {}", bad.status(), bad.text().await?);

    let m: MetricsSnapshot = client.get(format!("{base}/metrics")).send().await?.json().await?;
    println!("{}", serde_json::to_string_pretty(&m)?);
    server.abort();
    Ok(())
}
