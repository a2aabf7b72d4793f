//! Noisy position sampling and the sampled-data state observer.
//!
//! Each vehicle only sees its own position, and only at sample instants,
//! corrupted by bounded noise. The observer reconstructs position and
//! velocity from the latest sample held constant between instants, the
//! applied control, and the network's drag estimate.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::vec2::{Diag2, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// Time between samples, s. Must be a whole number of integrator steps.
    pub period: f64,
    /// Per-axis bound on the measurement error, m. Zero by default: at the
    /// default 10 Hz rate even 0.02 m of noise dominates the velocity
    /// estimate and reorders the trigger strategies.
    pub noise_bound: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            period: 0.1,
            noise_bound: 0.0,
        }
    }
}

/// Measurement source for one vehicle.
///
/// The stream is keyed by `(seed, vehicle)` so draws do not depend on the
/// order vehicles are processed in.
#[derive(Debug, Clone)]
pub struct Sampler {
    noise_bound: f64,
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(noise_bound: f64, seed: u64, vehicle: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(vehicle as u64);
        Sampler { noise_bound, rng }
    }

    /// True position plus independent uniform noise on `[-ϱ, ϱ]` per axis.
    pub fn sample_position(&mut self, true_position: Vec2) -> Vec2 {
        if self.noise_bound == 0.0 {
            return true_position;
        }
        let b = self.noise_bound;
        let nx = self.rng.gen_range(-b..=b);
        let ny = self.rng.gen_range(-b..=b);
        true_position + Vec2::new(nx, ny)
    }
}

/// Output injection gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObserverGains {
    /// Position injection, 1/s.
    pub c1: Diag2,
    /// Velocity injection, 1/s².
    pub c2: Diag2,
}

impl Default for ObserverGains {
    fn default() -> Self {
        ObserverGains {
            c1: Diag2::splat(5.0),
            c2: Diag2::splat(50.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObserverState {
    pub position_estimate: Vec2,
    pub velocity_estimate: Vec2,
    /// Most recent sample, held until the next one.
    pub latest_sample: Vec2,
}

impl ObserverState {
    /// Observer initialized with its own estimate as the held sample, so the
    /// injection terms vanish until the first real measurement arrives.
    pub fn new(position_estimate: Vec2, velocity_estimate: Vec2) -> Self {
        ObserverState {
            position_estimate,
            velocity_estimate,
            latest_sample: position_estimate,
        }
    }

    /// `x̂̇ = v̂ + C1 (x̄ − x̂)`.
    pub fn position_rate(&self, gains: &ObserverGains) -> Vec2 {
        self.velocity_estimate + gains.c1 * self.innovation()
    }

    /// `x̄ − x̂`.
    pub fn innovation(&self) -> Vec2 {
        self.latest_sample - self.position_estimate
    }
}

/// One Euler step of the observer. `nn_output` is the network's current
/// estimate of the drag acceleration.
pub fn observer_step(
    obs: ObserverState,
    u: Vec2,
    nn_output: Vec2,
    gains: &ObserverGains,
    dt: f64,
) -> ObserverState {
    debug_assert!(dt > 0.0);
    let innovation = obs.innovation();
    let position_rate = obs.velocity_estimate + gains.c1 * innovation;
    let velocity_rate = u + gains.c2 * innovation + nn_output;
    ObserverState {
        position_estimate: obs.position_estimate + position_rate * dt,
        velocity_estimate: obs.velocity_estimate + velocity_rate * dt,
        latest_sample: obs.latest_sample,
    }
}
