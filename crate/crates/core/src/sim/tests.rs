use super::*;
use crate::bench::metrics::{FailureKind, OutcomeStatus};
use crate::orchestrator::ScaleReason;
use crate::router::{ComplexityClass, Prompt};
use crate::workload::Arrival;

/// One small (floor 1) and one large (floor 0) model on one backend.
fn scenario(extra: &str) -> Scenario {
    let text = format!(
        r#"
        name = "unit"
        horizon = 1000.0
        record_trace = true
        {extra}

        [arrivals]
        kind = "fixed"
        rate = 0.0

        [matrix]
        [[matrix.models]]
        id = "small"
        tier = "small"
        unit_cost = 0.001
        latency_prior = 1.0

        [[matrix.models]]
        id = "large"
        tier = "large"
        unit_cost = 0.01
        latency_prior = 3.0

        [[matrix.backends]]
        id = "b"
        throughput_class = 2
        latency_class = 2
        memory_class = 2

        [[matrix.cells]]
        model = "small"
        backend = "b"
        replicas = 1
        concurrency_per_replica = 1

        [[matrix.cells]]
        model = "large"
        backend = "b"
        replicas = 0
        concurrency_per_replica = 1

        [[services]]
        service_id = "small:b"
        base_ttft = 0.5
        per_token_latency = 0.02
        output_tokens = {{ kind = "fixed", tokens = 100 }}

        [[services]]
        service_id = "large:b"
        base_ttft = 0.5
        per_token_latency = 0.02
        cold_start_duration = 12.0
        replica_cost_per_hour = 3.6
        output_tokens = {{ kind = "fixed", tokens = 100 }}
        "#
    );
    Scenario::from_toml_str(&text).unwrap()
}

fn at(id: &str, text: &str, t: f64, label: ComplexityClass) -> Arrival {
    Arrival {
        prompt: Prompt::new(id, text).at(t),
        label: Some(label),
    }
}

fn quality() -> StrategySpec {
    StrategySpec::multi_objective(crate::scoring::WeightProfile::quality())
}

#[test]
fn free_slot_latency_model() {
    let sim = Simulation::new(scenario("")).unwrap();
    let r = sim
        .run(
            &[at("a", "list colors", 0.0, ComplexityClass::Low)],
            &quality(),
            100.0,
            1,
        )
        .unwrap();
    let o = &r.outcomes[0];
    assert_eq!(o.service_id.as_deref(), Some("small:b"));
    assert_eq!(o.ttft(), Some(0.5));
    assert_eq!(o.latency(), Some(2.5));
    assert_eq!(o.status, OutcomeStatus::Success);
}

#[test]
fn fifo_queueing_delays_second_request() {
    let sim = Simulation::new(scenario("")).unwrap();
    let arrivals = [
        at("a", "list colors", 0.0, ComplexityClass::Low),
        at("b", "define word", 0.0, ComplexityClass::Low),
    ];
    let r = sim.run(&arrivals, &quality(), 100.0, 1).unwrap();
    assert_eq!(r.outcomes[1].first_token, Some(3.0));
    assert!(r.outcomes[1].ttft().unwrap() >= 2.5);
    assert_eq!(r.outcomes[1].end, Some(5.0));
}

#[test]
fn certain_failure() {
    let mut s = scenario("");
    s.services[0].failure_probability = 1.0;
    let sim = Simulation::new(s).unwrap();
    let arrivals: Vec<_> = (0..20)
        .map(|i| at(&format!("r{i}"), "sum numbers", i as f64 * 3.0, ComplexityClass::Low))
        .collect();
    let r = sim.run(&arrivals, &quality(), 100.0, 1).unwrap();
    assert!(r
        .outcomes
        .iter()
        .all(|o| o.status == OutcomeStatus::Failure && o.failure == Some(FailureKind::Backend)));
    assert_eq!(r.metrics.n_failure, 20);
    assert_eq!(r.metrics.success_rate, 0.0);
}

#[test]
fn cold_start_adds_to_first_token() {
    let sim = Simulation::new(scenario("")).unwrap();
    let r = sim
        .run(
            &[at("a", "prove the theorem", 100.0, ComplexityClass::High)],
            &quality(),
            200.0,
            1,
        )
        .unwrap();
    let o = &r.outcomes[0];
    assert_eq!(o.service_id.as_deref(), Some("large:b"));
    assert!(o.cold_start);
    assert_eq!(o.ttft(), Some(12.5));
    let trace = r.trace.as_ref().unwrap();
    let ready = trace
        .iter()
        .find(|e| e.kind == EventKind::ReplicaReady && e.service_id.as_deref() == Some("large:b"))
        .unwrap();
    assert_eq!(ready.time, 112.0);
}

#[test]
fn scale_down_drains_busy_replica() {
    let mut s = scenario("static_replicas = 2");
    s.limits.request_timeout = 10_000.0;
    s.matrix.cells[1].replicas = 2;
    s.services[1].output_tokens = TokenDistribution::Fixed { tokens: 25_000 };
    s.limits.max_output_tokens = 100_000;
    let sim = Simulation::new(s).unwrap();
    let r = sim
        .run(
            &[at("a", "prove the theorem", 0.0, ComplexityClass::High)],
            &quality(),
            1000.0,
            1,
        )
        .unwrap();
    // idle since t = 0, so the first tick after 300 s scales large to zero
    let cmd = r
        .scale_events
        .iter()
        .find(|e| e.service_id == "large:b" && e.reason == Some(ScaleReason::IdleScaleDown))
        .unwrap();
    assert_eq!((cmd.time, cmd.from, cmd.to), (310.0, 2, 0));
    let trace = r.trace.as_ref().unwrap();
    let after = trace
        .iter()
        .find(|e| e.kind == EventKind::ScaleApplied && e.service_id.as_deref() == Some("large:b"))
        .unwrap();
    assert_eq!((after.ready_replicas, after.in_service), (1, 1));
    let done = &r.outcomes[0];
    assert_eq!(done.end, Some(500.5));
    let svc = &r.services["large:b"];
    assert_eq!(svc.final_replicas, 0);
    // one replica for 310 s, one until the drain finished
    assert!((svc.replica_seconds - (310.0 + 500.5)).abs() < 1e-9);
    assert!((svc.infrastructure_cost - 810.5 / 1000.0).abs() < 1e-9);
}

#[test]
fn empty_trace_settles_on_warm_floors() {
    let mut s = scenario("");
    s.matrix.cells[0].replicas = 3;
    s.matrix.cells[1].replicas = 2;
    let sim = Simulation::new(s).unwrap();
    let r = sim.run(&[], &quality(), 1000.0, 1).unwrap();
    assert_eq!(r.metrics.n_total, 0);
    assert_eq!(r.services["small:b"].final_replicas, 1);
    assert_eq!(r.services["large:b"].final_replicas, 0);
}

#[test]
fn warm_floor_restored_from_zero() {
    let mut s = scenario("");
    s.matrix.cells[0].replicas = 0;
    let sim = Simulation::new(s).unwrap();
    let r = sim.run(&[], &quality(), 100.0, 1).unwrap();
    assert_eq!(r.scale_events[0].reason, Some(ScaleReason::WarmFloor));
    assert_eq!(r.services["small:b"].final_replicas, 1);
}

#[test]
fn fixed_seed_is_byte_identical() {
    let mut s = scenario("");
    s.arrivals = crate::workload::ArrivalProcess::Poisson { rate: 0.5 };
    s.services[0].output_tokens = TokenDistribution::LogNormal {
        median: 80.0,
        sigma: 0.6,
    };
    s.services[0].failure_probability = 0.1;
    let sim = Simulation::new(s).unwrap();
    let arrivals = sim.arrivals(7).unwrap();
    assert!(!arrivals.is_empty());
    let a = sim.run(&arrivals, &quality(), 1000.0, 7).unwrap().to_json();
    let b = sim.run(&arrivals, &quality(), 1000.0, 7).unwrap().to_json();
    assert_eq!(a, b);
    let c = sim
        .run(&arrivals, &StrategySpec::random(), 1000.0, 7)
        .unwrap()
        .to_json();
    assert_ne!(a, c);
}

#[test]
fn static_mode_never_cold_starts() {
    let sim = Simulation::new(scenario("")).unwrap();
    let r = sim
        .run(
            &[at("a", "prove the theorem", 10.0, ComplexityClass::High)],
            &quality().with_scaling(ScalingMode::Static),
            100.0,
            1,
        )
        .unwrap();
    assert_eq!(r.outcomes[0].service_id.as_deref(), Some("small:b"));
    assert!(r.scale_events.is_empty());
}

#[test]
fn strategy_names_round_trip() {
    for s in [
        "random",
        "latency-only",
        "multi-objective:balanced",
        "multi-objective:cost+static",
        "keyword:quality",
        "semantic:speed",
        "random+static",
    ] {
        let spec: StrategySpec = s.parse().unwrap();
        assert_eq!(spec.to_string(), s);
    }
    assert_eq!(
        "hybrid".parse::<StrategySpec>().unwrap().to_string(),
        "multi-objective:balanced"
    );
    assert!("random:quality".parse::<StrategySpec>().is_err());
    assert!("multi-objective:nope".parse::<StrategySpec>().is_err());
    assert!("random+sometimes".parse::<StrategySpec>().is_err());
}
