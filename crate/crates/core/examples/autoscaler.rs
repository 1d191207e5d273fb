//! Drives the autoscaler through a demand ramp, a plateau and a long idle
//! period, printing every scaling command.
//!
//! cargo run --example autoscaler

use matrix_router::orchestrator::{plan_target, Autoscaler, ScalingPolicy};
use matrix_router::registry::{BackendSpec, ModelSpec, Registry, ServiceInstance};
use matrix_router::router::ModelTier;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let registry = Registry::new(60.0);
    let id = registry.register(
        ModelSpec {
            model_id: "qwen-3".into(),
            tier: ModelTier::Large,
            parameter_count: 0,
            warm_pool_floor: None,
        },
        BackendSpec {
            backend_id: "vllm".into(),
            throughput_class: 2,
            latency_class: 2,
            memory_class: 2,
        },
        ServiceInstance::new("qwen-3", "vllm", 0.01, 3.0)
            .with_replicas(1)
            .with_concurrency(4),
    )?;
    println!(
        "Little's Law: 6 req/s x 3 s / 4 slots = {} replicas",
        plan_target(6.0, 3.0, 4)
    );

    let policy = ScalingPolicy::default();
    let period = policy.evaluation_period;
    let mut scaler = Autoscaler::new(policy);
    let rate_at = |t: f64| match t {
        t if t < 300.0 => t / 50.0,
        t if t < 600.0 => 6.0,
        _ => 0.0,
    };
    let mut now = 0.0;
    while now < 1200.0 {
        let n = (rate_at(now) * period).round() as u32;
        for k in 0..n {
            let t = now + period * f64::from(k) / f64::from(n);
            registry.record_request(&id, t)?;
            registry.record_sample(&id, 3.0, 0.6, true, t)?;
        }
        now += period;
        registry.prune(now);
        for cmd in scaler.tick(&registry.snapshot(now), now) {
            println!(
                "t={now:>6.0}  rate {:>4.1}/s  {:?} -> {} replicas",
                rate_at(now - period),
                cmd.reason,
                cmd.new_replica_count
            );
            registry.set_replicas(&cmd.model_id, cmd.new_replica_count, 0)?;
        }
    }
    println!("active after idle: {:?}", scaler.active());
    Ok(())
}
