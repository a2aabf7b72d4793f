//! Leader speed profile and predecessor-following references.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::vec2::Vec2;

/// Formation geometry of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Single lane, narrow passage.
    Linear,
    /// Two-lane staggered formation, obstacle avoidance.
    Square,
    /// Single lane with a widened gap for a cut-in.
    LinearQueue,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [
        ScenarioKind::Linear,
        ScenarioKind::Square,
        ScenarioKind::LinearQueue,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Linear => "linear",
            ScenarioKind::Square => "square",
            ScenarioKind::LinearQueue => "linear-queue",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "linear" => Ok(ScenarioKind::Linear),
            "square" => Ok(ScenarioKind::Square),
            "linear-queue" | "linear_queue" => Ok(ScenarioKind::LinearQueue),
            other => Err(format!(
                "unknown scenario `{other}` (expected linear, square or linear-queue)"
            )),
        }
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Desired displacement `l_i` of each vehicle behind its predecessor.
/// Index 0 is the leader and is always zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FormationOffsets(pub Vec<Vec2>);

impl FormationOffsets {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> Vec2 {
        self.0[index]
    }

    pub fn validate(&self, vehicles: usize) -> Result<(), String> {
        if self.0.len() != vehicles {
            return Err(format!("expected {vehicles} offsets, got {}", self.0.len()));
        }
        if self.0[0] != Vec2::ZERO {
            return Err("the leader's offset must be (0, 0)".into());
        }
        if self.0.iter().any(|l| !l.is_finite()) {
            return Err("offsets must be finite".into());
        }
        Ok(())
    }
}

/// Reference position, velocity and acceleration for one vehicle at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceSignal {
    pub position: Vec2,
    pub velocity: Vec2,
    pub acceleration: Vec2,
}

/// Start and end of the deceleration segment of the leader profile, s.
const DECEL_START: f64 = 25.0;
const DECEL_END: f64 = 31.0;
const CRUISE_SPEED: f64 = 10.0;
const FINAL_SPEED: f64 = 4.0;
/// Last instant for which the profile is defined, s.
pub const PROFILE_END: f64 = 50.0;

/// Leader reference: 10 m/s cruise, 1 m/s² deceleration over 25–31 s, then
/// 4 m/s. The lateral component stays at `origin.y`.
pub fn leader_reference(t: f64, origin: Vec2) -> Result<ReferenceSignal, Error> {
    if !(0.0..=PROFILE_END).contains(&t) {
        return Err(Error::OutOfRange {
            what: "leader reference time",
            value: t,
            range: (0.0, PROFILE_END),
        });
    }
    let (speed, accel, distance) = if t < DECEL_START {
        (CRUISE_SPEED, 0.0, CRUISE_SPEED * t)
    } else if t < DECEL_END {
        let s = t - DECEL_START;
        (
            CRUISE_SPEED - s,
            -1.0,
            CRUISE_SPEED * DECEL_START + CRUISE_SPEED * s - 0.5 * s * s,
        )
    } else {
        let span = DECEL_END - DECEL_START;
        let decel_distance = CRUISE_SPEED * span - 0.5 * span * span;
        (
            FINAL_SPEED,
            0.0,
            CRUISE_SPEED * DECEL_START + decel_distance + FINAL_SPEED * (t - DECEL_END),
        )
    };
    Ok(ReferenceSignal {
        position: origin + Vec2::new(distance, 0.0),
        velocity: Vec2::new(speed, 0.0),
        acceleration: Vec2::new(accel, 0.0),
    })
}

/// Follower reference: sit `l_i` behind the predecessor's observed position,
/// moving with the leader's reference velocity and acceleration.
///
/// `index` is zero-based; index 0 is the leader and is rejected.
pub fn follower_reference(
    index: usize,
    predecessor_observed_position: Vec2,
    offsets: &FormationOffsets,
    leader_ref: &ReferenceSignal,
) -> Result<ReferenceSignal, Error> {
    if index == 0 {
        return Err(Error::Contract(
            "the leader has no predecessor; use leader_reference".into(),
        ));
    }
    Ok(ReferenceSignal {
        position: predecessor_observed_position - offsets.get(index),
        velocity: leader_ref.velocity,
        acceleration: leader_ref.acceleration,
    })
}

/// Desired inter-vehicle displacements for the four-vehicle formations.
pub fn scenario_offsets(kind: ScenarioKind) -> FormationOffsets {
    let v = |x, y| Vec2::new(x, y);
    FormationOffsets(match kind {
        ScenarioKind::Linear => vec![v(0.0, 0.0), v(10.0, 0.0), v(10.0, 0.0), v(10.0, 0.0)],
        ScenarioKind::Square => vec![v(0.0, 0.0), v(0.0, 3.6), v(10.0, -3.6), v(0.0, 3.6)],
        ScenarioKind::LinearQueue => {
            vec![v(0.0, 0.0), v(10.0, 0.0), v(20.0, 0.0), v(10.0, 0.0)]
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cruise_segment() {
        let r = leader_reference(10.0, Vec2::ZERO).unwrap();
        assert_eq!(r.velocity, Vec2::new(10.0, 0.0));
        assert_eq!(r.acceleration, Vec2::ZERO);
    }

    #[test]
    fn deceleration_segment() {
        let r = leader_reference(27.0, Vec2::ZERO).unwrap();
        assert_eq!(r.velocity, Vec2::new(8.0, 0.0));
        assert_eq!(r.acceleration, Vec2::new(-1.0, 0.0));
    }

    /// Composite Simpson quadrature of the speed profile, split at the kinks.
    fn quadrature_distance(t: f64) -> f64 {
        let speed = |s: f64| leader_reference(s, Vec2::ZERO).unwrap().velocity.x;
        let mut knots = vec![0.0];
        for k in [DECEL_START, DECEL_END] {
            if k < t {
                knots.push(k);
            }
        }
        knots.push(t);
        knots
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let n = 200;
                let h = (b - a) / n as f64;
                let mut acc = speed(a) + speed(b);
                for i in 1..n {
                    let c = if i % 2 == 1 { 4.0 } else { 2.0 };
                    acc += c * speed(a + i as f64 * h);
                }
                acc * h / 3.0
            })
            .sum()
    }

    #[test]
    fn closed_form_position_matches_quadrature() {
        let r = leader_reference(40.0, Vec2::ZERO).unwrap();
        assert_eq!(r.position.x, 328.0);
        assert_relative_eq!(quadrature_distance(40.0), 328.0, max_relative = 1e-9);
        for t in [3.3, 25.0, 26.5, 30.99, 31.0, 44.4, 50.0] {
            let x = leader_reference(t, Vec2::ZERO).unwrap().position.x;
            assert_relative_eq!(x, quadrature_distance(t), max_relative = 1e-9);
        }
    }

    #[test]
    fn origin_shifts_position() {
        let o = Vec2::new(26.0, 5.0);
        let r = leader_reference(1.0, o).unwrap();
        assert_eq!(r.position, Vec2::new(36.0, 5.0));
    }

    #[test]
    fn velocity_continuous_at_breakpoints() {
        for k in [DECEL_START, DECEL_END] {
            let before = leader_reference(k - 1e-9, Vec2::ZERO).unwrap().velocity.x;
            let at = leader_reference(k, Vec2::ZERO).unwrap().velocity.x;
            assert!((before - at).abs() < 1e-6);
        }
    }

    #[test]
    fn position_monotone_and_acceleration_integrates() {
        let dt = 0.001;
        let mut prev = leader_reference(0.0, Vec2::ZERO).unwrap();
        let mut v_int = prev.velocity.x;
        for k in 1..=50_000 {
            let t = k as f64 * dt;
            let r = leader_reference(t, Vec2::ZERO).unwrap();
            assert!(r.position.x >= prev.position.x);
            v_int += prev.acceleration.x * dt;
            assert!((v_int - r.velocity.x).abs() < 2.0 * dt);
            prev = r;
        }
    }

    #[test]
    fn outside_profile_is_rejected() {
        assert!(leader_reference(-0.1, Vec2::ZERO).is_err());
        assert!(leader_reference(50.01, Vec2::ZERO).is_err());
    }

    #[test]
    fn follower_subtracts_offset() {
        let offsets = FormationOffsets(vec![Vec2::ZERO, Vec2::new(10.0, 0.0)]);
        let lead = leader_reference(5.0, Vec2::ZERO).unwrap();
        let r = follower_reference(1, Vec2::new(100.0, 2.0), &offsets, &lead).unwrap();
        assert_eq!(r.position, Vec2::new(90.0, 2.0));
        assert_eq!(r.velocity, lead.velocity);
        assert_eq!(r.acceleration, lead.acceleration);
        assert_eq!(r.position + offsets.get(1), Vec2::new(100.0, 2.0));
    }

    #[test]
    fn leader_cannot_follow() {
        let offsets = scenario_offsets(ScenarioKind::Linear);
        let lead = leader_reference(5.0, Vec2::ZERO).unwrap();
        assert!(matches!(
            follower_reference(0, Vec2::ZERO, &offsets, &lead),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn offset_table() {
        let v = Vec2::new;
        assert_eq!(
            scenario_offsets(ScenarioKind::Linear).0,
            vec![v(0.0, 0.0), v(10.0, 0.0), v(10.0, 0.0), v(10.0, 0.0)]
        );
        assert_eq!(
            scenario_offsets(ScenarioKind::Square).0,
            vec![v(0.0, 0.0), v(0.0, 3.6), v(10.0, -3.6), v(0.0, 3.6)]
        );
        assert_eq!(
            scenario_offsets(ScenarioKind::LinearQueue).0,
            vec![v(0.0, 0.0), v(10.0, 0.0), v(20.0, 0.0), v(10.0, 0.0)]
        );
        for k in ScenarioKind::ALL {
            let o = scenario_offsets(k);
            assert_eq!(o.get(0), Vec2::ZERO);
            o.validate(4).unwrap();
        }
    }
}
