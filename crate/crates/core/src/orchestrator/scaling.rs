//! Periodic replica planning with warm pools, cooldown and scale-to-zero.
//!
//! The scaling unit is one service instance (a model deployed on one
//! backend). Each tick sizes every unit with Little's Law from its windowed
//! request rate and mean latency:
//!
//! ```text
//! target = ceil(rate * latency / concurrency)
//! if target > current and cooldown expired  -> ScaleUp to max(target, floor)
//! else if idle for longer than tau          -> scale to floor
//! ```

use crate::registry::Snapshot;
use crate::router::ModelTier;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalingPolicy {
    pub evaluation_period: f64,
    pub cooldown: f64,
    /// Idle time after which a unit drops to its warm floor.
    pub idle_threshold: f64,
    pub warm_pool_by_tier: BTreeMap<ModelTier, u32>,
    /// Overrides every service's own concurrency when set.
    pub concurrency_per_replica: Option<u32>,
    pub max_replicas_per_model: u32,
}

impl Default for ScalingPolicy {
    fn default() -> Self {
        Self {
            evaluation_period: 10.0,
            cooldown: 60.0,
            idle_threshold: 300.0,
            warm_pool_by_tier: BTreeMap::from([(ModelTier::Small, 1), (ModelTier::Medium, 1), (ModelTier::Large, 0)]),
            concurrency_per_replica: None,
            max_replicas_per_model: 8,
        }
    }
}

impl ScalingPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.evaluation_period > 0.0) {
            return Err("evaluation_period must be positive".into());
        }
        if !(self.cooldown >= 0.0) {
            return Err("cooldown must be non-negative".into());
        }
        if !(self.idle_threshold > 0.0) {
            return Err("idle_threshold must be positive".into());
        }
        if self.max_replicas_per_model == 0 || self.concurrency_per_replica == Some(0) {
            return Err("replica cap and concurrency must be positive".into());
        }
        Ok(())
    }

    pub fn warm_pool(&self, tier: ModelTier) -> u32 {
        self.warm_pool_by_tier.get(&tier).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaState {
    /// Scaling unit id (the service id).
    pub model_id: String,
    pub current_replicas: u32,
    pub target_replicas: u32,
    pub last_scale_up_time: Option<f64>,
    pub last_request_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleReason {
    ScaleUp,
    IdleScaleDown,
    WarmFloor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCommand {
    pub model_id: String,
    pub new_replica_count: u32,
    pub reason: ScaleReason,
    pub issued_at: f64,
}

/// `ceil(rate * latency / concurrency)` evaluated exactly on the binary
/// values of the inputs; saturates at `u32::MAX`.
pub fn plan_target(rate: f64, latency: f64, concurrency: u32) -> u32 {
    debug_assert!(concurrency >= 1, "concurrency must be positive");
    if concurrency == 0 || rate.is_nan() || latency.is_nan() || rate <= 0.0 || latency <= 0.0 {
        return 0;
    }
    if rate.is_infinite() || latency.is_infinite() {
        return u32::MAX;
    }
    let (m1, e1) = decompose(rate);
    let (m2, e2) = decompose(latency);
    let mantissa = u128::from(m1) * u128::from(m2);
    let exp = e1 + e2;
    let c = u128::from(concurrency);
    let numerator = if exp >= 0 {
        if exp >= 128 || mantissa.leading_zeros() <= exp as u32 {
            return u32::MAX;
        }
        mantissa << exp
    } else {
        let shift = (-exp) as u32;
        // ceil(ceil(m / 2^s) / c) == ceil(m / (2^s c)) for positive integers
        if shift >= 128 {
            1
        } else {
            let q = mantissa >> shift;
            if q << shift == mantissa {
                q
            } else {
                q + 1
            }
        }
    };
    let target = numerator.div_ceil(c);
    u32::try_from(target).unwrap_or(u32::MAX)
}

/// Finite positive `x` as `mantissa * 2^exponent`.
fn decompose(x: f64) -> (u64, i32) {
    let bits = x.to_bits();
    let raw_exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if raw_exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), raw_exp - 1075)
    }
}

/// Runs one evaluation over every service in `snapshot`, updating `states`
/// in place and returning the commands to apply.
pub fn scaling_tick(
    states: &mut BTreeMap<String, ReplicaState>,
    snapshot: &Snapshot,
    policy: &ScalingPolicy,
    now: f64,
) -> Vec<ScaleCommand> {
    let mut commands = Vec::new();
    for view in &snapshot.services {
        let id = view.id().to_string();
        let provisioned = view.instance.replicas + view.instance.starting_replicas;
        let state = states.entry(id.clone()).or_insert_with(|| ReplicaState {
            model_id: id.clone(),
            current_replicas: provisioned,
            target_replicas: provisioned,
            last_scale_up_time: None,
            last_request_time: view.last_request_time.unwrap_or(now),
        });
        state.current_replicas = provisioned;
        if let Some(t) = view.last_request_time {
            state.last_request_time = state.last_request_time.max(t);
        }
        let cap = policy.max_replicas_per_model;
        let concurrency = policy
            .concurrency_per_replica
            .unwrap_or(view.instance.concurrency_per_replica)
            .max(1);
        let target = plan_target(view.request_rate, view.avg_latency, concurrency).min(cap);
        state.target_replicas = target;
        let floor = snapshot
            .model(&view.instance.model_id)
            .and_then(|m| m.warm_pool_floor)
            .unwrap_or_else(|| policy.warm_pool(view.tier))
            .min(cap);
        let cooldown_expired = state.last_scale_up_time.map_or(true, |t| now - t >= policy.cooldown);
        let current = state.current_replicas;
        let next = if target > current && cooldown_expired {
            state.last_scale_up_time = Some(now);
            Some((target.max(floor).min(cap), ScaleReason::ScaleUp))
        } else if now - state.last_request_time > policy.idle_threshold {
            match floor.cmp(&current) {
                std::cmp::Ordering::Less => Some((floor, ScaleReason::IdleScaleDown)),
                std::cmp::Ordering::Greater => Some((floor, ScaleReason::WarmFloor)),
                std::cmp::Ordering::Equal => None,
            }
        } else if current < floor {
            Some((floor, ScaleReason::WarmFloor))
        } else {
            None
        };
        if let Some((count, reason)) = next {
            state.current_replicas = count;
            commands.push(ScaleCommand {
                model_id: id,
                new_replica_count: count,
                reason,
                issued_at: now,
            });
        }
    }
    commands
}

/// Units with at least one replica after the last tick.
pub fn active_set(states: &BTreeMap<String, ReplicaState>) -> Vec<String> {
    states
        .values()
        .filter(|s| s.current_replicas > 0)
        .map(|s| s.model_id.clone())
        .collect()
}

/// Owns the per-unit replica states across ticks.
#[derive(Debug, Clone, Default)]
pub struct Autoscaler {
    pub policy: ScalingPolicy,
    states: BTreeMap<String, ReplicaState>,
}

impl Autoscaler {
    pub fn new(policy: ScalingPolicy) -> Self {
        Self {
            policy,
            states: BTreeMap::new(),
        }
    }

    pub fn tick(&mut self, snapshot: &Snapshot, now: f64) -> Vec<ScaleCommand> {
        scaling_tick(&mut self.states, snapshot, &self.policy, now)
    }

    pub fn states(&self) -> &BTreeMap<String, ReplicaState> {
        &self.states
    }

    pub fn active(&self) -> Vec<String> {
        active_set(&self.states)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::{BackendSpec, ModelSpec, Registry, ServiceInstance};

    #[test]
    fn little_law_examples() {
        assert_eq!(plan_target(10.0, 2.0, 4), 5);
        assert_eq!(plan_target(0.0, 2.0, 4), 0);
        assert_eq!(plan_target(1.0, 0.1, 8), 1);
        assert_eq!(plan_target(3.0, 1.0, 1), 3);
        assert_eq!(plan_target(1e300, 1e300, 1), u32::MAX);
        assert_eq!(plan_target(f64::MIN_POSITIVE, 5e-324, 3), 1);
    }

    #[test]
    fn exact_on_binary_values() {
        // 0.1 is slightly above 1/10 in binary, so 0.1 * 10 is just above 1
        assert_eq!(plan_target(0.1, 10.0, 1), 2);
        assert_eq!(plan_target(0.5, 8.0, 4), 1);
        assert_eq!(plan_target(0.5, 8.0, 3), 2);
    }

    fn registry(tier: ModelTier, replicas: u32) -> Registry {
        let reg = Registry::default();
        let _ = reg
            .register(
                ModelSpec {
                    model_id: "m".into(),
                    tier,
                    parameter_count: 0,
                    warm_pool_floor: None,
                },
                BackendSpec {
                    backend_id: "b".into(),
                    throughput_class: 1,
                    latency_class: 1,
                    memory_class: 1,
                },
                ServiceInstance::new("m", "b", 0.01, 2.0)
                    .with_replicas(replicas)
                    .with_concurrency(4),
            )
            .unwrap();
        reg
    }

    #[test]
    fn idle_large_model_scales_to_zero() {
        let reg = registry(ModelTier::Large, 2);
        reg.record_request("m:b", 0.0).unwrap();
        let mut states = BTreeMap::new();
        let policy = ScalingPolicy::default();
        assert!(scaling_tick(&mut states, &reg.snapshot(100.0), &policy, 100.0).is_empty());
        let cmds = scaling_tick(&mut states, &reg.snapshot(301.0), &policy, 301.0);
        assert_eq!(cmds.len(), 1);
        assert_eq!(cmds[0].new_replica_count, 0);
        assert_eq!(cmds[0].reason, ScaleReason::IdleScaleDown);
        assert!(active_set(&states).is_empty());
    }

    #[test]
    fn idle_small_model_keeps_warm_floor() {
        let reg = registry(ModelTier::Small, 3);
        reg.record_request("m:b", 0.0).unwrap();
        let mut states = BTreeMap::new();
        let cmds = scaling_tick(&mut states, &reg.snapshot(400.0), &ScalingPolicy::default(), 400.0);
        assert_eq!(cmds[0].new_replica_count, 1);
        assert_eq!(active_set(&states), vec!["m:b".to_string()]);
    }

    #[test]
    fn warm_floor_restored_when_below() {
        let reg = registry(ModelTier::Small, 0);
        let mut states = BTreeMap::new();
        let cmds = scaling_tick(&mut states, &reg.snapshot(0.0), &ScalingPolicy::default(), 0.0);
        assert_eq!(cmds.len(), 1);
        assert_eq!(cmds[0].reason, ScaleReason::WarmFloor);
        assert_eq!(cmds[0].new_replica_count, 1);
    }

    #[test]
    fn cooldown_blocks_second_scale_up() {
        let reg = registry(ModelTier::Large, 1);
        // rate 600/300 = 2 req/s, latency prior 2 s, concurrency 4 -> target 1
        for i in 0..600 {
            reg.record_request("m:b", i as f64 * 0.5).unwrap();
        }
        let mut states = BTreeMap::new();
        let policy = ScalingPolicy::default();
        let snap = reg.snapshot(300.0);
        assert!(scaling_tick(&mut states, &snap, &policy, 300.0).is_empty());
        reg.set_replicas("m:b", 0, 0).unwrap();
        let cmds = scaling_tick(&mut states, &reg.snapshot(300.0), &policy, 300.0);
        assert_eq!(cmds[0].reason, ScaleReason::ScaleUp);
        assert_eq!(cmds[0].new_replica_count, 1);
        // demand jumps: target 5 > current 2, but cooldown has not expired
        for i in 0..2400 {
            reg.record_request("m:b", 300.0 + i as f64 * 0.0125).unwrap();
        }
        reg.set_replicas("m:b", 2, 0).unwrap();
        let snap = reg.snapshot(330.0);
        assert!(snap.services[0].request_rate * 2.0 / 4.0 > 4.0);
        assert!(scaling_tick(&mut states, &snap, &policy, 330.0).is_empty());
        assert_eq!(states["m:b"].target_replicas, 5);
        let cmds = scaling_tick(&mut states, &reg.snapshot(360.0), &policy, 360.0);
        assert_eq!(cmds[0].reason, ScaleReason::ScaleUp);
    }

    #[test]
    fn scale_up_is_capped() {
        let reg = registry(ModelTier::Medium, 1);
        for i in 0..30_000 {
            reg.record_request("m:b", i as f64 * 0.01).unwrap();
        }
        let mut states = BTreeMap::new();
        let cmds = scaling_tick(&mut states, &reg.snapshot(300.0), &ScalingPolicy::default(), 300.0);
        assert_eq!(cmds[0].new_replica_count, 8);
    }

    #[test]
    fn model_floor_overrides_tier_default() {
        let reg = Registry::default();
        let _ = reg
            .register(
                ModelSpec {
                    model_id: "big".into(),
                    tier: ModelTier::Large,
                    parameter_count: 0,
                    warm_pool_floor: Some(2),
                },
                BackendSpec {
                    backend_id: "b".into(),
                    throughput_class: 1,
                    latency_class: 1,
                    memory_class: 1,
                },
                ServiceInstance::new("big", "b", 0.01, 2.0),
            )
            .unwrap();
        let mut states = BTreeMap::new();
        let cmds = scaling_tick(&mut states, &reg.snapshot(0.0), &ScalingPolicy::default(), 0.0);
        assert_eq!(cmds[0].new_replica_count, 2);
    }
}
