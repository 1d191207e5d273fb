use crate::scoring::NormalizationStats;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

pub const DEFAULT_WINDOW_SECS: f64 = 300.0;

/// One completed (or failed) request as seen by telemetry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub timestamp: f64,
    pub latency: f64,
    pub ttft: f64,
    pub success: bool,
    pub cost: f64,
}

/// Rolling per-service observations bounded by `window_duration`.
///
/// Samples are kept sorted by timestamp. Latency statistics and means cover
/// successful samples only; cost statistics cover every sample.
#[derive(Debug, Clone)]
pub struct TelemetryWindow {
    window_duration: f64,
    samples: VecDeque<Sample>,
    requests: VecDeque<f64>,
    newest: f64,
    latency_stats: NormalizationStats,
    cost_stats: NormalizationStats,
    success_latency_sum: f64,
    success_ttft_sum: f64,
    successes: u64,
}

fn insert_sorted<T: Copy>(q: &mut VecDeque<T>, item: T, key: impl Fn(&T) -> f64) {
    let k = key(&item);
    if q.back().map_or(true, |last| key(last) <= k) {
        q.push_back(item);
    } else {
        let at = q.partition_point(|x| key(x) <= k);
        q.insert(at, item);
    }
}

impl TelemetryWindow {
    pub fn new(window_duration: f64) -> Self {
        assert!(window_duration > 0.0, "window duration must be positive");
        Self {
            window_duration,
            samples: VecDeque::new(),
            requests: VecDeque::new(),
            newest: f64::NEG_INFINITY,
            latency_stats: NormalizationStats::empty(window_duration),
            cost_stats: NormalizationStats::empty(window_duration),
            success_latency_sum: 0.0,
            success_ttft_sum: 0.0,
            successes: 0,
        }
    }

    pub fn window_duration(&self) -> f64 {
        self.window_duration
    }

    pub fn record_request(&mut self, timestamp: f64) {
        insert_sorted(&mut self.requests, timestamp, |t| *t);
        self.newest = self.newest.max(timestamp);
        self.prune(timestamp);
    }

    pub fn record(&mut self, sample: Sample) {
        insert_sorted(&mut self.samples, sample, |s| s.timestamp);
        self.newest = self.newest.max(sample.timestamp);
        self.cost_stats.observe(sample.cost);
        if sample.success {
            self.latency_stats.observe(sample.latency);
            self.success_latency_sum += sample.latency;
            self.success_ttft_sum += sample.ttft;
            self.successes += 1;
        }
        self.prune(sample.timestamp);
    }

    /// Drops everything older than `window_duration` before
    /// `max(now, newest sample)`.
    pub fn prune(&mut self, now: f64) {
        let cutoff = now.max(self.newest) - self.window_duration;
        while self.requests.front().is_some_and(|&t| t < cutoff) {
            self.requests.pop_front();
        }
        let mut stale_extreme = false;
        while let Some(s) = self.samples.front().copied() {
            if s.timestamp >= cutoff {
                break;
            }
            self.samples.pop_front();
            if s.success {
                self.success_latency_sum -= s.latency;
                self.success_ttft_sum -= s.ttft;
                self.successes -= 1;
                stale_extreme |=
                    s.latency <= self.latency_stats.metric_min || s.latency >= self.latency_stats.metric_max;
            }
            stale_extreme |= s.cost <= self.cost_stats.metric_min || s.cost >= self.cost_stats.metric_max;
            self.latency_stats.sample_count = self.successes;
            self.cost_stats.sample_count = self.samples.len() as u64;
        }
        if stale_extreme {
            self.recompute();
        }
    }

    fn recompute(&mut self) {
        let w = self.window_duration;
        let ok = || self.samples.iter().filter(|s| s.success);
        self.latency_stats = NormalizationStats::from_values(ok().map(|s| s.latency), w);
        self.cost_stats = NormalizationStats::from_values(self.samples.iter().map(|s| s.cost), w);
        self.success_latency_sum = ok().map(|s| s.latency).sum();
        self.success_ttft_sum = ok().map(|s| s.ttft).sum();
        self.successes = ok().count() as u64;
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter()
    }

    pub fn latency_stats(&self) -> NormalizationStats {
        self.latency_stats
    }

    pub fn cost_stats(&self) -> NormalizationStats {
        self.cost_stats
    }

    /// Requests per second over `(now - window, now]`.
    pub fn request_rate(&self, window: f64, now: f64) -> f64 {
        if window <= 0.0 {
            return 0.0;
        }
        let lo = self.requests.partition_point(|&t| t <= now - window);
        let hi = self.requests.partition_point(|&t| t <= now);
        (hi.saturating_sub(lo)) as f64 / window
    }

    /// Mean latency of successful samples.
    pub fn mean_success_latency(&self) -> Option<f64> {
        (self.successes > 0).then(|| self.success_latency_sum / self.successes as f64)
    }

    pub fn mean_success_ttft(&self) -> Option<f64> {
        (self.successes > 0).then(|| self.success_ttft_sum / self.successes as f64)
    }

    pub fn success_count(&self) -> u64 {
        self.successes
    }

    pub fn failure_count(&self) -> u64 {
        self.samples.len() as u64 - self.successes
    }

    pub fn newest(&self) -> Option<f64> {
        self.newest.is_finite().then_some(self.newest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp};

    fn ok(t: f64, latency: f64) -> Sample {
        Sample {
            timestamp: t,
            latency,
            ttft: latency / 4.0,
            success: true,
            cost: 0.01,
        }
    }

    #[test]
    fn single_sample_stats() {
        let mut w = TelemetryWindow::new(300.0);
        w.record(ok(0.0, 2.0));
        let s = w.latency_stats();
        assert_eq!((s.metric_min, s.metric_max, s.sample_count), (2.0, 2.0, 1));
    }

    #[test]
    fn min_max_over_samples() {
        let mut w = TelemetryWindow::new(300.0);
        for (t, l) in [(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)] {
            w.record(ok(t, l));
        }
        let s = w.latency_stats();
        assert_eq!((s.metric_min, s.metric_max), (1.0, 5.0));
        assert_eq!(w.mean_success_latency(), Some(3.0));
    }

    #[test]
    fn old_samples_are_pruned_and_stats_recomputed() {
        let mut w = TelemetryWindow::new(300.0);
        w.record(ok(0.0, 9.0));
        w.record(ok(100.0, 2.0));
        w.record(ok(350.0, 4.0));
        let s = w.latency_stats();
        assert_eq!((s.metric_min, s.metric_max, s.sample_count), (2.0, 4.0, 2));
        assert_eq!(w.mean_success_latency(), Some(3.0));
    }

    #[test]
    fn failures_excluded_from_latency_mean() {
        let mut w = TelemetryWindow::new(300.0);
        w.record(ok(0.0, 2.0));
        w.record(Sample {
            success: false,
            ..ok(1.0, 100.0)
        });
        assert_eq!(w.mean_success_latency(), Some(2.0));
        assert_eq!(w.failure_count(), 1);
        assert_eq!(w.latency_stats().metric_max, 2.0);
    }

    #[test]
    fn rate_from_counts() {
        let mut w = TelemetryWindow::new(300.0);
        for i in 0..150 {
            w.record_request(i as f64 * 2.0);
        }
        assert!((w.request_rate(300.0, 299.0) - 0.5).abs() < 1e-12);
        assert_eq!(TelemetryWindow::new(300.0).request_rate(300.0, 10.0), 0.0);
    }

    #[test]
    fn poisson_rate_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let exp = Exp::new(2.0).unwrap();
        let mut w = TelemetryWindow::new(300.0);
        let mut t = 0.0;
        loop {
            t += exp.sample(&mut rng);
            if t > 300.0 {
                break;
            }
            w.record_request(t);
        }
        let est = w.request_rate(300.0, 300.0);
        assert!((est - 2.0).abs() / 2.0 < 0.10, "estimate {est}");
    }

    #[test]
    fn prune_is_idempotent() {
        let mut w = TelemetryWindow::new(10.0);
        for i in 0..50 {
            w.record(ok(i as f64, (i % 7) as f64));
        }
        w.prune(60.0);
        let before: Vec<_> = w.samples().copied().collect();
        let stats = w.latency_stats();
        w.prune(60.0);
        assert_eq!(before, w.samples().copied().collect::<Vec<_>>());
        assert_eq!(stats, w.latency_stats());
    }

    proptest! {
        #[test]
        fn stats_match_recompute_oracle(ops in prop::collection::vec((0.0f64..5.0, 0.0f64..50.0, any::<bool>(), 0u8..4), 1..200)) {
            let mut w = TelemetryWindow::new(20.0);
            let mut t = 0.0;
            let mut rng = ChaCha8Rng::seed_from_u64(ops.len() as u64);
            for (dt, latency, success, kind) in ops {
                t += dt;
                if kind == 0 {
                    w.prune(t);
                } else {
                    // occasionally out of order
                    let ts = if rng.gen_bool(0.1) { t - rng.gen_range(0.0..3.0) } else { t };
                    w.record(Sample { timestamp: ts, latency, ttft: latency / 2.0, success, cost: latency / 100.0 });
                }
                let newest = w.newest().unwrap_or(t);
                let live: Vec<Sample> = w.samples().copied().collect();
                prop_assert!(live.iter().all(|s| s.timestamp >= newest - 20.0));
                let ok: Vec<f64> = live.iter().filter(|s| s.success).map(|s| s.latency).collect();
                let oracle = NormalizationStats::from_values(ok.iter().copied(), 20.0);
                let stats = w.latency_stats();
                prop_assert_eq!(stats.sample_count, oracle.sample_count);
                if !ok.is_empty() {
                    prop_assert_eq!(stats.metric_min, oracle.metric_min);
                    prop_assert_eq!(stats.metric_max, oracle.metric_max);
                    let mean = ok.iter().sum::<f64>() / ok.len() as f64;
                    prop_assert!((w.mean_success_latency().unwrap() - mean).abs() < 1e-9);
                }
                let costs = NormalizationStats::from_values(live.iter().map(|s| s.cost), 20.0);
                prop_assert_eq!(w.cost_stats().sample_count, costs.sample_count);
                if !live.is_empty() {
                    prop_assert_eq!(w.cost_stats().metric_min, costs.metric_min);
                    prop_assert_eq!(w.cost_stats().metric_max, costs.metric_max);
                }
            }
        }
    }
}
