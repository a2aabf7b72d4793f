//! Point-mass vehicle plant with quadratic aerodynamic drag and a decaying
//! sinusoidal disturbance, advanced by explicit Euler.

use serde::{Deserialize, Serialize};

use crate::vec2::Vec2;

/// Physical coefficients of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// kg/m³
    pub air_density: f64,
    /// m²
    pub cross_section: f64,
    pub drag_coeff: f64,
    /// m/s²
    pub disturbance_amp: f64,
    /// rad/s
    pub disturbance_freq: f64,
    /// 1/s
    pub disturbance_decay: f64,
}

/// Masses of the four vehicles in the reference experiment, kg.
pub const DEFAULT_MASSES: [f64; 4] = [1760.0, 1920.0, 1660.0, 1890.0];

impl VehicleParams {
    pub fn with_mass(mass: f64) -> Self {
        VehicleParams {
            mass,
            air_density: 1.206,
            cross_section: 5.58,
            drag_coeff: 0.3,
            disturbance_amp: 0.3,
            disturbance_freq: 2.0 * std::f64::consts::PI,
            disturbance_decay: 1.0 / 5.0,
        }
    }

    /// Same vehicle with drag and disturbance switched off.
    pub fn frictionless(self) -> Self {
        VehicleParams {
            air_density: 0.0,
            disturbance_amp: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.mass > 0.0) {
            return Err(format!("mass must be > 0, got {}", self.mass));
        }
        for (name, v) in [
            ("air_density", self.air_density),
            ("cross_section", self.cross_section),
            ("drag_coeff", self.drag_coeff),
        ] {
            if !(v >= 0.0) {
                return Err(format!("{name} must be >= 0, got {v}"));
            }
        }
        if !self.disturbance_amp.is_finite()
            || !self.disturbance_freq.is_finite()
            || !self.disturbance_decay.is_finite()
        {
            return Err("disturbance parameters must be finite".into());
        }
        Ok(())
    }

    /// `0.5·ρ·A·Cd / m`, the coefficient of `v²` in the drag acceleration.
    pub fn drag_factor(&self) -> f64 {
        0.5 * self.air_density * self.cross_section * self.drag_coeff / self.mass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec2,
    pub velocity: Vec2,
}

/// Drag acceleration, opposing motion on each axis independently.
pub fn drag_accel(velocity: Vec2, params: &VehicleParams) -> Vec2 {
    let k = params.drag_factor();
    velocity.map(|v| -k * v * v.abs())
}

/// External disturbance, identical on both axes.
pub fn disturbance_accel(t: f64, params: &VehicleParams) -> Vec2 {
    let a = params.disturbance_amp
        * (params.disturbance_freq * t).sin()
        * (-params.disturbance_decay * t).exp();
    Vec2::splat(a)
}

/// One explicit-Euler step of `ẋ = v`, `v̇ = u + drag + disturbance`.
pub fn plant_step(
    state: VehicleState,
    u: Vec2,
    t: f64,
    dt: f64,
    params: &VehicleParams,
) -> VehicleState {
    debug_assert!(dt > 0.0);
    let accel = u + drag_accel(state.velocity, params) + disturbance_accel(t, params);
    VehicleState {
        position: state.position + state.velocity * dt,
        velocity: state.velocity + accel * dt,
    }
}
