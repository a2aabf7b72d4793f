//! Event-triggered control updates.
//!
//! Each strategy shapes the continuous control `μ` into a candidate `w` and
//! decides, from the measurement error `e = w − u`, when the held control
//! `u` is replaced by `w`. Between events `u` is held constant.

use serde::{Deserialize, Serialize};

use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    /// Update every step; `u = μ`.
    Continuous,
    #[serde(alias = "fixed")]
    FixedThreshold,
    #[serde(alias = "relative")]
    RelativeThreshold,
    #[serde(alias = "switched")]
    SwitchedThreshold,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Continuous,
        StrategyKind::FixedThreshold,
        StrategyKind::RelativeThreshold,
        StrategyKind::SwitchedThreshold,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Continuous => "continuous",
            StrategyKind::FixedThreshold => "fixed",
            StrategyKind::RelativeThreshold => "relative",
            StrategyKind::SwitchedThreshold => "switched",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "continuous" => Ok(StrategyKind::Continuous),
            "fixed" | "fixed-threshold" => Ok(StrategyKind::FixedThreshold),
            "relative" | "relative-threshold" => Ok(StrategyKind::RelativeThreshold),
            "switched" | "switched-threshold" => Ok(StrategyKind::SwitchedThreshold),
            other => Err(format!(
                "unknown strategy `{other}` (expected continuous, fixed, relative or switched)"
            )),
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which threshold rule produced a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// No threshold rule (continuous updates).
    #[default]
    None,
    Fixed,
    Relative,
}

impl Branch {
    /// Integer code used in the state log.
    pub fn code(self) -> u8 {
        match self {
            Branch::None => 0,
            Branch::Fixed => 1,
            Branch::Relative => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Branch> {
        match code {
            0 => Some(Branch::None),
            1 => Some(Branch::Fixed),
            2 => Some(Branch::Relative),
            _ => None,
        }
    }
}

/// How the switched strategy pairs control magnitude with threshold rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchedPairing {
    /// Relative rule while `‖u‖ < S`, fixed rule once `‖u‖ ≥ S`.
    #[default]
    SmallRelative,
    /// The opposite pairing: fixed rule while `‖u‖ < S`.
    SmallFixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EtcParams {
    /// Fixed threshold `ς`.
    pub varsigma: f64,
    /// Fixed-strategy shaping constant `ς̄`.
    pub varsigma_bar: f64,
    /// Per-axis tanh smoothing constants.
    pub epsilon: Vec2,
    /// Relative slope, `0 < ζ < 1`.
    pub zeta: f64,
    /// Relative floor `ξ`.
    pub xi: f64,
    /// Relative shaping constant, `ξ̄ > ξ / (1 − ζ)`.
    pub xi_bar: f64,
    /// Switching boundary `S` on the held control magnitude.
    pub switch_boundary: f64,
    pub switched_pairing: SwitchedPairing,
}

impl Default for EtcParams {
    fn default() -> Self {
        EtcParams {
            varsigma: 2.0,
            varsigma_bar: 2.5,
            epsilon: Vec2::splat(0.5),
            zeta: 0.9,
            xi: 0.1,
            xi_bar: 2.0,
            switch_boundary: 0.55,
            switched_pairing: SwitchedPairing::SmallRelative,
        }
    }
}

impl EtcParams {
    /// Returns the offending key and a message naming the violated constraint.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.varsigma > 0.0) {
            return Err(("varsigma", format!("requires ς > 0, got {}", self.varsigma)));
        }
        if !(self.varsigma_bar > self.varsigma) {
            return Err((
                "varsigma_bar",
                format!(
                    "requires ς̄ > ς, got ς̄ = {} and ς = {}",
                    self.varsigma_bar, self.varsigma
                ),
            ));
        }
        if !(self.epsilon.x > 0.0 && self.epsilon.y > 0.0) {
            return Err(("epsilon", "requires ε1, ε2 > 0".into()));
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(("zeta", format!("requires 0<ζ<1, got {}", self.zeta)));
        }
        if !(self.xi > 0.0) {
            return Err(("xi", format!("requires ξ > 0, got {}", self.xi)));
        }
        let floor = self.xi / (1.0 - self.zeta);
        if !(self.xi_bar > floor) {
            return Err((
                "xi_bar",
                format!(
                    "requires ξ̄ > ξ/(1−ζ) = {:?}, got {}",
                    // drop representation noise such as 1.0000000000000002
                    (floor * 1e9).round() / 1e9,
                    self.xi_bar
                ),
            ));
        }
        if !(self.switch_boundary > 0.0) {
            return Err((
                "switch_boundary",
                format!("requires S > 0, got {}", self.switch_boundary),
            ));
        }
        Ok(())
    }
}

/// Fixed-threshold candidate: `w_j = μ_j − ς̄ tanh(ς̄ z2_j / ε_j)`.
pub fn shaped_control_fixed(mu: Vec2, z2: Vec2, p: &EtcParams) -> Vec2 {
    let s = p.varsigma_bar;
    Vec2::new(
        mu.x - s * (s * z2.x / p.epsilon.x).tanh(),
        mu.y - s * (s * z2.y / p.epsilon.y).tanh(),
    )
}

/// Relative-threshold candidate:
/// `w_j = −(1+ζ)(μ_j tanh(μ_j z2_j / ε_j) + ξ̄ tanh(ξ̄ z2_j / ε_j))`.
pub fn shaped_control_relative(mu: Vec2, z2: Vec2, p: &EtcParams) -> Vec2 {
    let axis = |m: f64, z: f64, eps: f64| {
        -(1.0 + p.zeta) * (m * (m * z / eps).tanh() + p.xi_bar * (p.xi_bar * z / eps).tanh())
    };
    Vec2::new(axis(mu.x, z2.x, p.epsilon.x), axis(mu.y, z2.y, p.epsilon.y))
}

/// Threshold rule in force given the currently held control.
pub fn active_branch(strategy: StrategyKind, u_held: Vec2, p: &EtcParams) -> Branch {
    match strategy {
        StrategyKind::Continuous => Branch::None,
        StrategyKind::FixedThreshold => Branch::Fixed,
        StrategyKind::RelativeThreshold => Branch::Relative,
        StrategyKind::SwitchedThreshold => {
            let small = u_held.norm() < p.switch_boundary;
            match (p.switched_pairing, small) {
                (SwitchedPairing::SmallRelative, true) | (SwitchedPairing::SmallFixed, false) => {
                    Branch::Relative
                }
                _ => Branch::Fixed,
            }
        }
    }
}

/// Candidate control for the active branch.
pub fn shaped_control(branch: Branch, mu: Vec2, z2: Vec2, p: &EtcParams) -> Vec2 {
    match branch {
        Branch::None => mu,
        Branch::Fixed => shaped_control_fixed(mu, z2, p),
        Branch::Relative => shaped_control_relative(mu, z2, p),
    }
}

/// Whether the rule of `branch` fires for measurement error `e`.
pub fn branch_fires(branch: Branch, e: Vec2, u_held: Vec2, p: &EtcParams) -> bool {
    match branch {
        Branch::None => true,
        Branch::Fixed => e.norm() >= p.varsigma,
        Branch::Relative => e.norm() >= p.zeta * u_held.norm() + p.xi,
    }
}

/// Triggering condition of `strategy` for `e = w − u_held`.
pub fn trigger_condition(strategy: StrategyKind, e: Vec2, u_held: Vec2, p: &EtcParams) -> bool {
    branch_fires(active_branch(strategy, u_held, p), e, u_held, p)
}

/// Held control and event history of one vehicle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TriggerState {
    pub held_control: Vec2,
    pub last_event_time: Option<f64>,
    pub event_count: usize,
    pub event_times: Vec<f64>,
}

impl TriggerState {
    pub fn with_capacity(events: usize) -> Self {
        TriggerState {
            event_times: Vec::with_capacity(events),
            ..Default::default()
        }
    }

    /// Replaces the held control with `w` when `triggered`; otherwise a no-op.
    pub fn hold_update(&mut self, w: Vec2, triggered: bool, t: f64) {
        if !triggered {
            return;
        }
        debug_assert!(self.last_event_time.is_none_or(|last| t > last));
        self.held_control = w;
        self.last_event_time = Some(t);
        self.event_count += 1;
        self.event_times.push(t);
    }

    /// Smallest gap between consecutive events, if there are at least two.
    pub fn min_inter_event(&self) -> Option<f64> {
        self.event_times
            .windows(2)
            .map(|w| w[1] - w[0])
            .min_by(f64::total_cmp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn p() -> EtcParams {
        EtcParams::default()
    }

    #[test]
    fn fixed_shaping_passes_through_at_zero_error() {
        let mu = Vec2::new(1.3, -0.4);
        assert_eq!(shaped_control_fixed(mu, Vec2::ZERO, &p()), mu);
    }

    #[test]
    fn fixed_shaping_saturates() {
        let w = shaped_control_fixed(Vec2::new(1.0, 0.0), Vec2::new(1e6, 0.0), &p());
        assert_eq!(w.x, 1.0 - 2.5);
    }

    #[test]
    fn fixed_shaping_hand_value() {
        // 1 − 2.5·tanh(2.5·0.5/0.5)
        let w = shaped_control_fixed(Vec2::new(1.0, 0.0), Vec2::new(0.5, 0.0), &p());
        assert_relative_eq!(w.x, -1.4665357453785757, max_relative = 1e-12);
        assert_eq!(w.y, 0.0);
    }

    #[test]
    fn relative_shaping_zero() {
        assert_eq!(
            shaped_control_relative(Vec2::ZERO, Vec2::ZERO, &p()),
            Vec2::ZERO
        );
    }

    #[test]
    fn relative_shaping_saturates() {
        let w = shaped_control_relative(Vec2::new(3.0, 0.0), Vec2::new(1e6, 0.0), &p());
        assert_relative_eq!(w.x, -1.9 * (3.0 + 2.0), max_relative = 1e-15);
    }

    #[test]
    fn relative_shaping_hand_value() {
        // −1.9·(−10.2·tanh(−10.2·0.5/0.5) + 2·tanh(2·0.5/0.5)), scalar oracle
        let w = shaped_control_relative(Vec2::new(-10.2, 0.0), Vec2::new(0.5, 0.0), &p());
        assert_relative_eq!(w.x, -23.04330475073602, max_relative = 1e-12);
    }

    #[test]
    fn fixed_condition() {
        let e = Vec2::new(1.9, 0.0);
        assert!(!trigger_condition(
            StrategyKind::FixedThreshold,
            e,
            Vec2::ZERO,
            &p()
        ));
        assert!(trigger_condition(
            StrategyKind::FixedThreshold,
            Vec2::new(1.2, 1.6),
            Vec2::ZERO,
            &p()
        ));
    }

    #[test]
    fn relative_condition_floor() {
        let s = StrategyKind::RelativeThreshold;
        assert!(!trigger_condition(
            s,
            Vec2::new(0.09, 0.0),
            Vec2::ZERO,
            &p()
        ));
        assert!(trigger_condition(s, Vec2::new(0.11, 0.0), Vec2::ZERO, &p()));
        // threshold grows with the held control: 0.9·1 + 0.1
        assert!(!trigger_condition(
            s,
            Vec2::new(0.99, 0.0),
            Vec2::new(1.0, 0.0),
            &p()
        ));
        assert!(trigger_condition(
            s,
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 0.0),
            &p()
        ));
    }

    #[test]
    fn switched_branch_selection() {
        let s = StrategyKind::SwitchedThreshold;
        assert_eq!(
            active_branch(s, Vec2::new(0.54, 0.0), &p()),
            Branch::Relative
        );
        assert_eq!(active_branch(s, Vec2::new(0.56, 0.0), &p()), Branch::Fixed);
        assert_eq!(active_branch(s, Vec2::new(0.55, 0.0), &p()), Branch::Fixed);
        // relative threshold 0.9·0.54 + 0.1 = 0.586, fixed threshold 2
        let e = Vec2::new(0.6, 0.0);
        assert!(trigger_condition(s, e, Vec2::new(0.54, 0.0), &p()));
        assert!(!trigger_condition(s, e, Vec2::new(0.56, 0.0), &p()));
        let flipped = EtcParams {
            switched_pairing: SwitchedPairing::SmallFixed,
            ..p()
        };
        assert_eq!(
            active_branch(s, Vec2::new(0.54, 0.0), &flipped),
            Branch::Fixed
        );
        assert_eq!(
            active_branch(s, Vec2::new(0.56, 0.0), &flipped),
            Branch::Relative
        );
    }

    #[test]
    fn continuous_always_fires() {
        assert!(trigger_condition(
            StrategyKind::Continuous,
            Vec2::ZERO,
            Vec2::ZERO,
            &p()
        ));
    }

    #[test]
    fn hold_update_behaviour() {
        let mut ts = TriggerState::default();
        ts.hold_update(Vec2::new(3.0, 0.0), true, 0.0);
        assert_eq!(ts.held_control, Vec2::new(3.0, 0.0));
        assert_eq!(ts.event_count, 1);
        ts.hold_update(Vec2::new(9.0, 9.0), false, 0.001);
        assert_eq!(ts.held_control, Vec2::new(3.0, 0.0));
        assert_eq!(ts.event_count, 1);
        ts.hold_update(Vec2::new(1.0, 0.0), true, 0.002);
        assert_eq!(ts.event_times, vec![0.0, 0.002]);
        assert_eq!(ts.min_inter_event(), Some(0.002));
    }

    #[test]
    fn parameter_constraints() {
        assert!(p().validate().is_ok());
        let bad = EtcParams { zeta: 1.2, ..p() };
        let (key, msg) = bad.validate().unwrap_err();
        assert_eq!(key, "zeta");
        assert!(msg.contains("0<ζ<1"));
        let bad = EtcParams { xi_bar: 0.5, ..p() };
        let (key, msg) = bad.validate().unwrap_err();
        assert_eq!(key, "xi_bar");
        assert!(msg.contains("ξ̄ > ξ/(1−ζ) = 1.0,"), "{msg}");
        let bad = EtcParams {
            varsigma_bar: 1.0,
            ..p()
        };
        assert_eq!(bad.validate().unwrap_err().0, "varsigma_bar");
    }

    /// Replay a candidate sequence through the fixed rule and count events.
    fn replay_fixed(ws: &[Vec2], varsigma: f64) -> usize {
        let params = EtcParams {
            varsigma,
            varsigma_bar: varsigma + 1.0,
            ..p()
        };
        let mut ts = TriggerState::default();
        for (k, &w) in ws.iter().enumerate() {
            let fire = k == 0
                || trigger_condition(
                    StrategyKind::FixedThreshold,
                    w - ts.held_control,
                    ts.held_control,
                    &params,
                );
            ts.hold_update(w, fire, k as f64);
        }
        ts.event_count
    }

    #[test]
    fn larger_threshold_can_fire_more_on_oscillating_input() {
        // Monotonicity in ς is not a general property of hold-based
        // triggering: the larger threshold can latch onto a value from which
        // the next sample is farther away.
        let ws: Vec<Vec2> = [0.0, 1.0, 1.6, 0.2, 0.05]
            .iter()
            .map(|&x| Vec2::new(x, 0.0))
            .collect();
        assert_eq!(replay_fixed(&ws, 1.0), 2);
        assert_eq!(replay_fixed(&ws, 1.5), 3);
    }

    proptest! {
        #[test]
        fn larger_threshold_fires_less_on_monotone_ramps(
            steps in proptest::collection::vec(0.0f64..0.5, 1..400),
            a in 0.1f64..2.0,
            extra in 0.0f64..2.0,
        ) {
            let mut acc = 0.0;
            let ws: Vec<Vec2> = steps.iter().map(|s| { acc += s; Vec2::new(acc, 0.5 * acc) }).collect();
            prop_assert!(replay_fixed(&ws, a + extra) <= replay_fixed(&ws, a));
        }

        #[test]
        fn event_times_strictly_increase(flags in proptest::collection::vec(any::<bool>(), 1..200)) {
            let mut ts = TriggerState::default();
            for (k, f) in flags.iter().enumerate() {
                ts.hold_update(Vec2::new(k as f64, 0.0), *f, k as f64 * 1e-3);
            }
            prop_assert_eq!(ts.event_count, ts.event_times.len());
            prop_assert!(ts.event_times.windows(2).all(|w| w[1] > w[0]));
        }

        #[test]
        fn relative_term_is_nonnegative(m in -50.0f64..50.0, z in -5.0f64..5.0) {
            // μ·tanh(μ z / ε) has the sign of z, so the relative candidate opposes z2
            let w = shaped_control_relative(Vec2::new(m, 0.0), Vec2::new(z, 0.0), &p());
            prop_assert!(w.x * z <= 0.0);
        }
    }
}
