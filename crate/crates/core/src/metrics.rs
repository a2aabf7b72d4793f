//! Post-processing of a [`SimLog`]: trigger counts, pairwise safety
//! distances, time headway and boundedness checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::SimLog;
use crate::trigger::Branch;

/// Sup-norm ceilings for the boundedness report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ceilings {
    /// `‖x − x̂‖`, m, after the transient.
    pub observer_position: f64,
    /// `‖v − v̂‖`, m/s, after the transient.
    pub observer_velocity: f64,
    /// `‖z1‖`, m, after the transient.
    pub z1: f64,
    /// `‖z2‖`, m/s, after the transient.
    pub z2: f64,
    /// `‖Ŵ‖_F` over the whole run.
    pub weights: f64,
    /// `‖σ̂‖` over the whole run.
    pub sigma: f64,
}

impl Default for Ceilings {
    fn default() -> Self {
        Ceilings {
            observer_position: 1.0,
            observer_velocity: 2.0,
            z1: 1.0,
            z2: 2.0,
            weights: 5.0,
            sigma: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    /// Window for headway statistics, s.
    pub headway_window: [f64; 2],
    /// Time after which the tracking and observer errors are expected to
    /// have settled, s.
    pub transient: f64,
    pub ceilings: Ceilings,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            headway_window: [35.0, 50.0],
            transient: 20.0,
            ceilings: Ceilings::default(),
        }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let [a, b] = self.headway_window;
        if !(a < b) {
            return Err((
                "headway_window",
                format!("requires t0 < t1, got [{a}, {b}]"),
            ));
        }
        if !(self.transient >= 0.0) {
            return Err(("transient", "must be >= 0".into()));
        }
        let c = &self.ceilings;
        for v in [
            c.observer_position,
            c.observer_velocity,
            c.z1,
            c.z2,
            c.weights,
            c.sigma,
        ] {
            if !(v > 0.0) {
                return Err(("ceilings", "every ceiling must be > 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VehicleCounts {
    pub vehicle: usize,
    pub total: usize,
    /// Events decided by the fixed rule.
    pub fixed: usize,
    /// Events decided by the relative rule.
    pub relative: usize,
}

/// Control updates per vehicle, split by the rule that fired.
pub fn trigger_counts(log: &SimLog) -> Vec<VehicleCounts> {
    let n = log.vehicles();
    let mut counts: Vec<VehicleCounts> = (0..n)
        .map(|vehicle| VehicleCounts {
            vehicle,
            total: 0,
            fixed: 0,
            relative: 0,
        })
        .collect();
    for (k, r) in log.records.iter().enumerate() {
        if !r.triggered {
            continue;
        }
        let c = &mut counts[k % n];
        c.total += 1;
        match r.branch {
            Branch::Fixed => c.fixed += 1,
            Branch::Relative => c.relative += 1,
            Branch::None => {}
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub a: usize,
    pub b: usize,
    /// Minimum center-to-center distance over the window, m.
    pub min_distance: f64,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub window: [f64; 2],
    pub pairs: Vec<PairDistance>,
}

impl SafetyReport {
    /// Closest approach of any pair.
    pub fn overall(&self) -> Option<&PairDistance> {
        self.pairs
            .iter()
            .min_by(|x, y| x.min_distance.total_cmp(&y.min_distance))
    }
}

/// Minimum Euclidean distance between the true positions of every pair.
pub fn min_pairwise_distance(log: &SimLog, window: [f64; 2]) -> Result<SafetyReport> {
    let range = checked_range(log, window)?;
    let n = log.vehicles();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            let mut best = PairDistance {
                a,
                b,
                min_distance: f64::INFINITY,
                time: f64::NAN,
            };
            for step in range.clone() {
                let d = (log.record(step, a).state.position - log.record(step, b).state.position)
                    .norm();
                if d < best.min_distance {
                    best.min_distance = d;
                    best.time = log.time(step);
                }
            }
            pairs.push(best);
        }
    }
    Ok(SafetyReport { window, pairs })
}

fn checked_range(log: &SimLog, [t0, t1]: [f64; 2]) -> Result<std::ops::Range<usize>> {
    if !(t0 < t1) {
        return Err(Error::Metric(format!("empty window [{t0}, {t1}]")));
    }
    let range = log.step_range(t0, t1);
    if range.is_empty() {
        return Err(Error::Metric(format!(
            "window [{t0}, {t1}] contains no logged steps"
        )));
    }
    Ok(range)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowerHeadway {
    pub vehicle: usize,
    pub mean: f64,
    pub max: f64,
    pub min: f64,
    /// `max − min`, s.
    pub range: f64,
    /// Instants skipped because the follower was not moving forward.
    pub excluded: usize,
    /// `(t, τ)` pairs; omitted from serialized summaries.
    #[serde(skip)]
    pub series: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadwayStats {
    pub window: [f64; 2],
    pub followers: Vec<FollowerHeadway>,
}

/// Time headway `τ = h / v` of each follower: longitudinal center gap to the
/// predecessor over the follower's longitudinal speed.
pub fn headway_sample(gap: f64, speed: f64) -> Option<f64> {
    (speed > 0.0).then(|| gap / speed)
}

pub fn time_headway(log: &SimLog, window: [f64; 2]) -> Result<HeadwayStats> {
    let range = checked_range(log, window)?;
    let mut followers = Vec::with_capacity(log.vehicles() - 1);
    for v in 1..log.vehicles() {
        let mut series = Vec::with_capacity(range.len());
        let mut excluded = 0;
        for step in range.clone() {
            let me = log.record(step, v).state;
            let ahead = log.record(step, v - 1).state;
            match headway_sample(ahead.position.x - me.position.x, me.velocity.x) {
                Some(tau) => series.push((log.time(step), tau)),
                None => excluded += 1,
            }
        }
        if series.is_empty() {
            return Err(Error::Metric(format!(
                "vehicle {v} has no forward speed in [{}, {}]",
                window[0], window[1]
            )));
        }
        let (mut max, mut min, mut sum) = (f64::NEG_INFINITY, f64::INFINITY, 0.0);
        for &(_, tau) in &series {
            max = max.max(tau);
            min = min.min(tau);
            sum += tau;
        }
        followers.push(FollowerHeadway {
            vehicle: v,
            mean: sum / series.len() as f64,
            max,
            min,
            range: max - min,
            excluded,
            series,
        });
    }
    Ok(HeadwayStats { window, followers })
}

/// Worst formation-keeping errors of one vehicle over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleTracking {
    pub vehicle: usize,
    /// `max |(x_{i-1} − x_i) − l_i.x|` over true positions; zero for the leader.
    pub gap_error: f64,
    /// Max lateral distance from the vehicle's slot, where the slot is the
    /// leader's reference lane shifted by the accumulated lateral offsets.
    pub lateral_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub window: [f64; 2],
    pub vehicles: Vec<VehicleTracking>,
}

impl TrackingReport {
    pub fn max_gap_error(&self) -> f64 {
        self.vehicles
            .iter()
            .map(|v| v.gap_error)
            .fold(0.0, f64::max)
    }

    pub fn max_lateral_error(&self) -> f64 {
        self.vehicles
            .iter()
            .map(|v| v.lateral_error)
            .fold(0.0, f64::max)
    }
}

pub fn tracking_report(log: &SimLog, window: [f64; 2]) -> Result<TrackingReport> {
    let range = checked_range(log, window)?;
    let offsets = log.config.formation_offsets();
    offsets
        .validate(log.vehicles())
        .map_err(|e| Error::Metric(e.to_string()))?;
    let n = log.vehicles();
    let mut lane_shift = vec![0.0; n];
    for v in 1..n {
        lane_shift[v] = lane_shift[v - 1] + offsets.get(v).y;
    }
    let mut vehicles: Vec<VehicleTracking> = (0..n)
        .map(|vehicle| VehicleTracking {
            vehicle,
            gap_error: 0.0,
            lateral_error: 0.0,
        })
        .collect();
    for step in range {
        let lane = log.record(step, 0).reference.position.y;
        for v in 0..n {
            let me = log.record(step, v).state.position;
            let t = &mut vehicles[v];
            t.lateral_error = t.lateral_error.max((me.y - (lane - lane_shift[v])).abs());
            if v > 0 {
                let ahead = log.record(step, v - 1).state.position;
                t.gap_error = t.gap_error.max(((ahead.x - me.x) - offsets.get(v).x).abs());
            }
        }
    }
    Ok(TrackingReport { window, vehicles })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleBounds {
    pub vehicle: usize,
    pub observer_position: f64,
    pub observer_velocity: f64,
    pub z1: f64,
    pub z2: f64,
    pub weights: f64,
    pub sigma: f64,
    /// Smallest gap between consecutive control updates, s.
    pub min_inter_event: Option<f64>,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub transient: f64,
    pub ceilings: Ceilings,
    pub vehicles: Vec<VehicleBounds>,
    pub non_finite: bool,
    /// Human-readable reasons for failure; empty on pass.
    pub violations: Vec<String>,
    pub pass: bool,
}

/// Sup norms of the estimation and tracking errors after `transient`, of the
/// adaptive estimates over the whole run, and inter-event spacing.
pub fn boundedness_report(log: &SimLog, transient: f64, ceilings: &Ceilings) -> BoundednessReport {
    let n = log.vehicles();
    let settle = log.step_range(transient, f64::INFINITY).start;
    let mut non_finite = false;
    let mut vehicles = Vec::with_capacity(n);
    let mut violations = Vec::new();
    for v in 0..n {
        let mut b = VehicleBounds {
            vehicle: v,
            observer_position: 0.0,
            observer_velocity: 0.0,
            z1: 0.0,
            z2: 0.0,
            weights: 0.0,
            sigma: 0.0,
            min_inter_event: None,
            events: 0,
        };
        let mut last_event: Option<f64> = None;
        for (step, (t, r)) in log.series(v).enumerate() {
            if !r.is_finite() {
                non_finite = true;
            }
            // NaN-propagating max so a single bad sample poisons the sup
            let sup = |acc: f64, x: f64| {
                if x.is_nan() || acc.is_nan() {
                    f64::NAN
                } else {
                    acc.max(x)
                }
            };
            b.weights = sup(b.weights, r.weight_norm);
            b.sigma = sup(b.sigma, r.sigma_hat.norm());
            if step >= settle {
                b.observer_position = sup(
                    b.observer_position,
                    (r.state.position - r.observer.position_estimate).norm(),
                );
                b.observer_velocity = sup(
                    b.observer_velocity,
                    (r.state.velocity - r.observer.velocity_estimate).norm(),
                );
                b.z1 = sup(b.z1, r.z1.norm());
                b.z2 = sup(b.z2, r.z2.norm());
            }
            if r.triggered {
                b.events += 1;
                if let Some(prev) = last_event {
                    let gap = t - prev;
                    b.min_inter_event = Some(b.min_inter_event.map_or(gap, |m: f64| m.min(gap)));
                }
                last_event = Some(t);
            }
        }
        for (name, value, ceiling) in [
            (
                "observer position error",
                b.observer_position,
                ceilings.observer_position,
            ),
            (
                "observer velocity error",
                b.observer_velocity,
                ceilings.observer_velocity,
            ),
            ("z1", b.z1, ceilings.z1),
            ("z2", b.z2, ceilings.z2),
            ("weight norm", b.weights, ceilings.weights),
            ("sigma norm", b.sigma, ceilings.sigma),
        ] {
            if !(value < ceiling) {
                violations.push(format!("vehicle {v}: sup {name} = {value} >= {ceiling}"));
            }
        }
        // one integrator step is the floor; allow for t = k·dt rounding
        if let Some(m) = b.min_inter_event {
            if m < log.dt() * (1.0 - 1e-9) {
                violations.push(format!("vehicle {v}: inter-event interval {m} < dt"));
            }
        }
        vehicles.push(b);
    }
    if non_finite {
        violations.push("non-finite values in log".into());
    }
    BoundednessReport {
        transient,
        ceilings: *ceilings,
        pass: violations.is_empty(),
        vehicles,
        non_finite,
        violations,
    }
}

/// All metrics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub scenario: String,
    pub strategy: String,
    pub seed: u64,
    pub trigger_counts: Vec<VehicleCounts>,
    pub safety: SafetyReport,
    pub headway: Option<HeadwayStats>,
    pub boundedness: BoundednessReport,
    pub tracking: Option<TrackingReport>,
}

/// Computes every metric with the windows and ceilings from the log's config.
///
/// Headway is `None` when the configured window has no forward-moving
/// samples (for instance after a short run).
pub fn summarize(log: &SimLog) -> Result<MetricsSummary> {
    let cfg = &log.config.metrics;
    let full = [0.0, log.time(log.steps() - 1)];
    let headway = match time_headway(log, cfg.headway_window) {
        Ok(h) => Some(h),
        Err(Error::Metric(_)) => None,
        Err(e) => return Err(e),
    };
    let tracking = match tracking_report(log, [cfg.transient, full[1]]) {
        Ok(t) => Some(t),
        Err(Error::Metric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricsSummary {
        scenario: log.config.scenario.name().into(),
        strategy: log.config.strategy.name().into(),
        seed: log.config.seed,
        trigger_counts: trigger_counts(log),
        safety: min_pairwise_distance(log, full)?,
        headway,
        boundedness: boundedness_report(log, cfg.transient, &cfg.ceilings),
        tracking,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::sim::VehicleRecord;
    use crate::vec2::Vec2;

    /// Synthetic log: vehicles in a line 10 m apart, all moving at `speed`.
    fn convoy(vehicles: usize, steps: usize, speed: f64) -> SimLog {
        let config = SimConfig {
            vehicles,
            duration: (steps - 1) as f64 * 0.1,
            dt: 0.1,
            ..SimConfig::default()
        };
        let mut records = Vec::with_capacity(steps * vehicles);
        for k in 0..steps {
            let t = k as f64 * 0.1;
            for v in 0..vehicles {
                let mut r = VehicleRecord::default();
                r.state.position = Vec2::new(speed * t - 10.0 * v as f64, 0.0);
                r.state.velocity = Vec2::new(speed, 0.0);
                r.observer.position_estimate = r.state.position;
                r.observer.velocity_estimate = r.state.velocity;
                records.push(r);
            }
        }
        SimLog {
            config,
            records,
            event_times: vec![Vec::new(); vehicles],
        }
    }

    #[test]
    fn counts_synthetic_flags() {
        let mut log = convoy(3, 10, 1.0);
        for step in [0, 4, 7] {
            log.records[step * 3 + 1].triggered = true;
            log.records[step * 3 + 1].branch = if step == 4 {
                Branch::Fixed
            } else {
                Branch::Relative
            };
        }
        let c = trigger_counts(&log);
        assert_eq!(c[1].total, 3);
        assert_eq!(c[1].fixed + c[1].relative, 3);
        assert_eq!(c[1].fixed, 1);
        assert_eq!(c[0].total, 0);
    }

    #[test]
    fn stationary_pair_distance() {
        let log = convoy(2, 20, 0.0);
        for w in [[0.0, 1.9], [0.5, 1.0]] {
            let r = min_pairwise_distance(&log, w).unwrap();
            assert_eq!(r.pairs.len(), 1);
            assert_eq!(r.pairs[0].min_distance, 10.0);
        }
    }

    #[test]
    fn empty_window_is_an_error() {
        let log = convoy(2, 20, 0.0);
        assert!(min_pairwise_distance(&log, [1.0, 1.0]).is_err());
        assert!(min_pairwise_distance(&log, [5.0, 9.0]).is_err());
    }

    #[test]
    fn headway_examples() {
        assert_eq!(headway_sample(10.0, 10.0), Some(1.0));
        assert_eq!(headway_sample(10.0, 4.0), Some(2.5));
        assert_eq!(headway_sample(10.0, 0.0), None);
    }

    #[test]
    fn constant_convoy_has_zero_headway_range() {
        let log = convoy(4, 50, 4.0);
        let h = time_headway(&log, [0.0, 4.9]).unwrap();
        assert_eq!(h.followers.len(), 3);
        for f in &h.followers {
            assert!((f.mean - 2.5).abs() < 1e-12);
            assert!(f.range < 1e-12);
            assert_eq!(f.excluded, 0);
        }
    }

    #[test]
    fn headway_at_standstill_is_an_error() {
        let log = convoy(2, 20, 0.0);
        assert!(matches!(
            time_headway(&log, [0.0, 1.9]),
            Err(Error::Metric(_))
        ));
    }

    #[test]
    fn convoy_on_its_slots_has_zero_tracking_error() {
        let mut log = convoy(4, 30, 5.0);
        let t = tracking_report(&log, [0.0, 2.9]).unwrap();
        assert!(t.max_gap_error() < 1e-12);
        assert!(t.max_lateral_error() < 1e-12);

        log.records[10 * 4 + 2].state.position.x -= 0.25;
        log.records[12 * 4 + 3].state.position.y += 0.4;
        let t = tracking_report(&log, [0.0, 2.9]).unwrap();
        assert!((t.vehicles[2].gap_error - 0.25).abs() < 1e-12);
        assert!((t.vehicles[3].gap_error - 0.25).abs() < 1e-12);
        assert!((t.vehicles[3].lateral_error - 0.4).abs() < 1e-12);
        assert!(t.vehicles[1].gap_error < 1e-12);
    }

    #[test]
    fn square_slots_accumulate_lateral_offsets() {
        let mut log = convoy(4, 10, 5.0);
        log.config.scenario = crate::reference::ScenarioKind::Square;
        let shifts = [0.0, 3.6, -3.6 + 3.6, 3.6 + -3.6 + 3.6];
        for k in 0..10 {
            for (v, shift) in shifts.iter().enumerate() {
                log.records[k * 4 + v].state.position.y = -shift;
            }
        }
        let t = tracking_report(&log, [0.0, 0.9]).unwrap();
        assert!(t.max_lateral_error() < 1e-12, "{t:?}");
    }

    #[test]
    fn perfect_log_is_bounded() {
        let log = convoy(3, 30, 5.0);
        let r = boundedness_report(&log, 0.0, &Ceilings::default());
        assert!(r.pass, "{:?}", r.violations);
        for v in &r.vehicles {
            assert_eq!(v.z1, 0.0);
            assert_eq!(v.observer_position, 0.0);
            assert_eq!(v.weights, 0.0);
        }
    }

    #[test]
    fn nan_fails_the_report() {
        let mut log = convoy(3, 30, 5.0);
        log.records[40].z2 = Vec2::new(f64::NAN, 0.0);
        let r = boundedness_report(&log, 0.0, &Ceilings::default());
        assert!(r.non_finite);
        assert!(!r.pass);
    }

    #[test]
    fn inter_event_interval() {
        let mut log = convoy(2, 30, 5.0);
        for step in [0, 3, 4, 10] {
            log.records[step * 2].triggered = true;
        }
        let r = boundedness_report(&log, 0.0, &Ceilings::default());
        let m = r.vehicles[0].min_inter_event.unwrap();
        assert!((m - 0.1).abs() < 1e-12);
        assert_eq!(r.vehicles[0].events, 4);
        assert!(r.pass);
    }
}
