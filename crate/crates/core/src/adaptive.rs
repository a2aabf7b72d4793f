//! Backstepping tracking errors, the continuous-time control law, and the
//! online adaptation of the RBF drag estimate and disturbance bound.
//!
//! The drag model is a Gaussian RBF network on a two-dimensional input with
//! one weight vector per axis. Both axes share the same basis vector; the
//! weight matrix is block diagonal, so the longitudinal output never sees
//! lateral weights and vice versa.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::observer::ObserverGains;
use crate::reference::ReferenceSignal;
use crate::vec2::{Diag2, Vec2};

/// What the network is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NnInput {
    /// The observer's velocity estimate.
    #[default]
    ObservedVelocity,
    /// The vehicle's reference velocity.
    ReferenceVelocity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RbfConfig {
    pub centers: Vec<Vec2>,
    /// Gaussian width.
    pub width: f64,
    pub input: NnInput,
}

impl Default for RbfConfig {
    /// Five centers along the longitudinal speed axis, covering 0–16 m/s.
    fn default() -> Self {
        RbfConfig {
            centers: (0..5).map(|k| Vec2::new(4.0 * k as f64, 0.0)).collect(),
            width: 4.0,
            input: NnInput::ObservedVelocity,
        }
    }
}

impl RbfConfig {
    pub fn hidden_units(&self) -> usize {
        self.centers.len()
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.centers.is_empty() {
            return Err("at least one center is required".into());
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(format!("width must be > 0, got {}", self.width));
        }
        for (i, a) in self.centers.iter().enumerate() {
            if !a.is_finite() {
                return Err(format!("center {i} is not finite"));
            }
            if self.centers[..i].contains(a) {
                return Err(format!("center {i} duplicates an earlier center"));
            }
        }
        Ok(())
    }

    /// Writes `exp(−‖γ − cₖ‖² / φ²)` for every center into `out`.
    pub fn basis_into(&self, input: Vec2, out: &mut [f64]) {
        assert_eq!(out.len(), self.centers.len(), "basis buffer length");
        let inv_w2 = 1.0 / (self.width * self.width);
        for (o, c) in out.iter_mut().zip(&self.centers) {
            let d = input - *c;
            *o = (-d.dot(d) * inv_w2).exp();
        }
    }
}

/// Gaussian activations of every hidden unit for `input`.
pub fn rbf_basis(input: Vec2, config: &RbfConfig) -> Vec<f64> {
    let mut out = vec![0.0; config.hidden_units()];
    config.basis_into(input, &mut out);
    out
}

/// Network weights and disturbance-bound estimate of one vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveState {
    /// `[longitudinal, lateral]` weight vectors, each of length `l`.
    pub weights: [Vec<f64>; 2],
    pub sigma_hat: Vec2,
}

impl AdaptiveState {
    pub fn zeros(hidden_units: usize, sigma_hat: Vec2) -> Self {
        AdaptiveState {
            weights: [vec![0.0; hidden_units], vec![0.0; hidden_units]],
            sigma_hat,
        }
    }

    pub fn hidden_units(&self) -> usize {
        self.weights[0].len()
    }

    /// Frobenius norm of the weight matrix.
    pub fn weight_norm(&self) -> f64 {
        self.weights
            .iter()
            .flatten()
            .map(|w| w * w)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.sigma_hat.is_finite() && self.weights.iter().flatten().all(|w| w.is_finite())
    }
}

/// Network drag estimate: per axis, the weight vector dotted with the basis.
pub fn nn_output(state: &AdaptiveState, basis: &[f64]) -> Result<Vec2, Error> {
    if basis.len() != state.hidden_units() {
        return Err(Error::Contract(format!(
            "basis has {} entries but the network has {} hidden units",
            basis.len(),
            state.hidden_units()
        )));
    }
    let dot = |w: &[f64]| w.iter().zip(basis).map(|(a, b)| a * b).sum::<f64>();
    Ok(Vec2::new(dot(&state.weights[0]), dot(&state.weights[1])))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerGains {
    /// Virtual-controller gain.
    pub k1: Diag2,
    /// Velocity-error gain.
    pub k2: Diag2,
    /// Per-axis weight adaptation rate; each axis uses `rate · I`.
    pub adaptation_rate: Vec2,
    /// Per-axis weight leakage.
    pub leakage: Vec2,
    /// Disturbance-bound adaptation rate.
    pub delta: Diag2,
    /// Disturbance-bound leakage toward the prior.
    pub upsilon: Diag2,
    pub sigma_prior: Vec2,
}

impl Default for ControllerGains {
    fn default() -> Self {
        ControllerGains {
            k1: Diag2::splat(0.5),
            k2: Diag2::splat(20.0),
            adaptation_rate: Vec2::splat(1.0),
            leakage: Vec2::splat(0.01),
            delta: Diag2::splat(0.2),
            upsilon: Diag2::splat(2.0),
            sigma_prior: Vec2::ZERO,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        for (name, d) in [
            ("k1", self.k1),
            ("k2", self.k2),
            ("delta", self.delta),
            ("upsilon", self.upsilon),
            ("adaptation_rate", Diag2(self.adaptation_rate)),
            ("leakage", Diag2(self.leakage)),
        ] {
            if !d.is_positive() {
                return Err((name, "entries must be strictly positive".into()));
            }
        }
        if !self.sigma_prior.is_finite() {
            return Err(("sigma_prior", "must be finite".into()));
        }
        Ok(())
    }
}

/// Backstepping errors and the virtual controller with its time derivative.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackingErrors {
    pub z1: Vec2,
    pub z2: Vec2,
    pub alpha: Vec2,
    pub alpha_dot: Vec2,
}

/// `z1 = x̂ − xʳ`, `α = −K1 z1`, `z2 = v̂ − ẋʳ − α`.
///
/// `α̇` is differentiated analytically through the observer: `ż1` uses the
/// observer's position rate `v̂ + C1 (x̄ − x̂)` rather than a finite difference.
pub fn tracking_errors(
    position_estimate: Vec2,
    velocity_estimate: Vec2,
    reference: &ReferenceSignal,
    c1: Diag2,
    latest_sample: Vec2,
    k1: Diag2,
) -> TrackingErrors {
    let z1 = position_estimate - reference.position;
    let alpha = -(k1 * z1);
    let z2 = velocity_estimate - reference.velocity - alpha;
    let z1_dot = velocity_estimate + c1 * (latest_sample - position_estimate) - reference.velocity;
    TrackingErrors {
        z1,
        z2,
        alpha,
        alpha_dot: -(k1 * z1_dot),
    }
}

/// Convenience wrapper over [`tracking_errors`] taking observer state directly.
pub fn tracking_errors_for(
    obs: &crate::observer::ObserverState,
    reference: &ReferenceSignal,
    observer: &ObserverGains,
    k1: Diag2,
) -> TrackingErrors {
    tracking_errors(
        obs.position_estimate,
        obs.velocity_estimate,
        reference,
        observer.c1,
        obs.latest_sample,
        k1,
    )
}

/// `μ = −K2 z2 − z1 − Ŵᵀ Λ − κ(z2) σ̂ + α̇ + ẍʳ`, with `κ(z2) = diag(sgn z2)`.
pub fn continuous_control(
    errors: &TrackingErrors,
    nn: Vec2,
    sigma_hat: Vec2,
    reference_accel: Vec2,
    gains: &ControllerGains,
) -> Vec2 {
    -(gains.k2 * errors.z2) - errors.z1 - nn - errors.z2.signum0().hadamard(sigma_hat)
        + errors.alpha_dot
        + reference_accel
}

/// One Euler step of the weight and disturbance-bound adaptation laws.
pub fn adapt_step(
    state: &mut AdaptiveState,
    basis: &[f64],
    z2: Vec2,
    gains: &ControllerGains,
    dt: f64,
) {
    debug_assert!(dt > 0.0);
    debug_assert_eq!(basis.len(), state.hidden_units());
    for axis in 0..2 {
        let rate = gains.adaptation_rate.get(axis);
        let leak = gains.leakage.get(axis);
        let z = z2.get(axis);
        for (w, b) in state.weights[axis].iter_mut().zip(basis) {
            *w += rate * (b * z - leak * *w) * dt;
        }
    }
    // κ(z2)·z2 = |z2| componentwise
    let drive = z2.signum0().hadamard(z2) - gains.upsilon * (state.sigma_hat - gains.sigma_prior);
    state.sigma_hat += (gains.delta * drive) * dt;
}
