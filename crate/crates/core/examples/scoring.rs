//! Scores one prompt against a small matrix under every built-in profile.
//!
//! cargo run --example scoring

use matrix_router::orchestrator::{select_service, SelectionOptions};
use matrix_router::registry::{BackendSpec, ModelSpec, Registry, ServiceInstance};
use matrix_router::router::{ComplexityRouter, ModelTier, Prompt};
use matrix_router::scoring::WeightProfile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let registry = Registry::default();
    let backend = |id: &str, t, l| BackendSpec {
        backend_id: id.into(),
        throughput_class: t,
        latency_class: l,
        memory_class: 2,
    };
    for (model, tier, cost, prior) in [
        ("gemma-3", ModelTier::Small, 0.001, 0.8),
        ("llama-3", ModelTier::Medium, 0.004, 1.6),
        ("qwen-3", ModelTier::Large, 0.012, 3.5),
    ] {
        let spec = ModelSpec {
            model_id: model.into(),
            tier,
            parameter_count: 0,
            warm_pool_floor: None,
        };
        // the slower backend is cheaper per request
        for (b, speed, factor) in [("vllm", 3, 1.0), ("tgi", 1, 0.7)] {
            let inst = ServiceInstance::new(model, b, cost * factor, prior / factor).with_replicas(1);
            let _ = registry.register(spec.clone(), backend(b, speed, speed), inst)?;
        }
    }
    let snapshot = registry.snapshot(0.0);
    let router = ComplexityRouter::default();
    for text in [
        "List three colors",
        "Tell me about Paris",
        "Prove that the series diverges",
    ] {
        let prompt = Prompt::new("p", text);
        let output = router.classify(&prompt);
        println!("{text:?} -> {:?} {:?}", output.predicted, output.probabilities);
        for profile in WeightProfile::defaults() {
            let d = select_service(
                &prompt,
                &snapshot,
                &profile,
                &output,
                &router.relevance,
                &SelectionOptions::default(),
            )?;
            let c = d.components;
            println!(
                "  {:<9} {:<13} score {:.3}  (R {:.2}, T {:.2}, C {:.2})",
                profile.name, d.service_id, d.score, c.relevance_hat, c.latency_hat, c.cost_hat
            );
        }
    }
    Ok(())
}
