//! Run configuration and its TOML representation.
//!
//! Every key is optional; omitted keys take the defaults of the reference
//! four-vehicle experiment. Unknown keys are rejected with their path.

use serde::{Deserialize, Serialize};

use crate::adaptive::{ControllerGains, RbfConfig};
use crate::error::{Error, Result};
use crate::metrics::MetricsConfig;
use crate::observer::{ObserverGains, SamplerConfig};
use crate::reference::{scenario_offsets, FormationOffsets, ScenarioKind, PROFILE_END};
use crate::trigger::{EtcParams, StrategyKind};
use crate::vec2::Vec2;
use crate::vehicle::{VehicleParams, VehicleState, DEFAULT_MASSES};

/// Aerodynamic and disturbance coefficients shared by the fleet, plus
/// per-vehicle masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub masses: Vec<f64>,
    pub air_density: f64,
    pub cross_section: f64,
    pub drag_coeff: f64,
    pub disturbance_amp: f64,
    pub disturbance_freq: f64,
    pub disturbance_decay: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        let p = VehicleParams::with_mass(1.0);
        PhysicsConfig {
            masses: DEFAULT_MASSES.to_vec(),
            air_density: p.air_density,
            cross_section: p.cross_section,
            drag_coeff: p.drag_coeff,
            disturbance_amp: p.disturbance_amp,
            disturbance_freq: p.disturbance_freq,
            disturbance_decay: p.disturbance_decay,
        }
    }
}

impl PhysicsConfig {
    pub fn params(&self, vehicle: usize) -> VehicleParams {
        VehicleParams {
            mass: self.masses[vehicle],
            air_density: self.air_density,
            cross_section: self.cross_section,
            drag_coeff: self.drag_coeff,
            disturbance_amp: self.disturbance_amp,
            disturbance_freq: self.disturbance_freq,
            disturbance_decay: self.disturbance_decay,
        }
    }
}

/// True and estimated state of one vehicle at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    pub position: Vec2,
    pub velocity: Vec2,
    pub position_estimate: Vec2,
    pub velocity_estimate: Vec2,
}

impl InitialCondition {
    pub fn state(&self) -> VehicleState {
        VehicleState {
            position: self.position,
            velocity: self.velocity,
        }
    }
}

/// Initial conditions of the reference experiment.
pub fn default_initial_conditions() -> Vec<InitialCondition> {
    let v = Vec2::new;
    let ic = |p, pe, s, se| InitialCondition {
        position: p,
        position_estimate: pe,
        velocity: s,
        velocity_estimate: se,
    };
    vec![
        ic(v(28.0, 5.4), v(26.0, 5.0), v(14.0, 0.0), v(12.0, 0.0)),
        ic(v(24.0, 2.0), v(22.0, 1.6), v(16.0, 0.0), v(18.0, 0.0)),
        ic(v(18.0, 9.0), v(16.0, 8.6), v(16.0, 0.0), v(16.0, 0.0)),
        ic(v(12.0, 1.8), v(14.0, 1.4), v(17.0, 0.0), v(14.0, 0.0)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Number of vehicles `N`; vehicle 0 leads.
    pub vehicles: usize,
    /// Simulated horizon `T`, s.
    pub duration: f64,
    /// Integrator step, s.
    pub dt: f64,
    pub scenario: ScenarioKind,
    pub strategy: StrategyKind,
    pub seed: u64,
    /// Advance vehicles concurrently within a step. Results are identical
    /// either way.
    pub parallel: bool,
    /// Leader reference at `t = 0`; defaults to the leader's initial estimate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_origin: Option<Vec2>,
    /// Overrides the scenario's formation offsets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offsets: Option<FormationOffsets>,
    pub physics: PhysicsConfig,
    pub sampler: SamplerConfig,
    pub observer: ObserverGains,
    pub controller: ControllerGains,
    pub rbf: RbfConfig,
    pub etc: EtcParams,
    pub metrics: MetricsConfig,
    pub initial: Vec<InitialCondition>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            vehicles: 4,
            duration: 50.0,
            dt: 0.001,
            scenario: ScenarioKind::Linear,
            strategy: StrategyKind::FixedThreshold,
            seed: 0,
            parallel: false,
            reference_origin: None,
            offsets: None,
            physics: PhysicsConfig::default(),
            sampler: SamplerConfig::default(),
            observer: ObserverGains::default(),
            controller: ControllerGains::default(),
            rbf: RbfConfig::default(),
            etc: EtcParams::default(),
            metrics: MetricsConfig::default(),
            initial: default_initial_conditions(),
        }
    }
}

impl SimConfig {
    pub fn with_scenario(mut self, scenario: ScenarioKind) -> Self {
        self.scenario = scenario;
        self
    }

    pub fn with_strategy(mut self, strategy: StrategyKind) -> Self {
        self.strategy = strategy;
        self
    }

    /// Number of integrator steps; the log holds one more record than this.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Integrator steps between samples.
    pub fn sample_every(&self) -> usize {
        (self.sampler.period / self.dt).round() as usize
    }

    pub fn formation_offsets(&self) -> FormationOffsets {
        self.offsets
            .clone()
            .unwrap_or_else(|| scenario_offsets(self.scenario))
    }

    pub fn origin(&self) -> Vec2 {
        self.reference_origin
            .unwrap_or_else(|| self.initial[0].position_estimate)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vehicles < 2 {
            return Err(Error::config(
                "vehicles",
                "at least 2 vehicles are required",
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.duration > 0.0 && self.duration <= PROFILE_END) {
            return Err(Error::config(
                "duration",
                format!(
                    "must lie in (0, {PROFILE_END}] (leader profile horizon), got {}",
                    self.duration
                ),
            ));
        }
        let steps = self.duration / self.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return Err(Error::config("dt", "must divide the duration"));
        }
        if !(self.sampler.period > 0.0) {
            return Err(Error::config("sampler.period", "must be > 0"));
        }
        let ratio = self.sampler.period / self.dt;
        if ratio.round() < 1.0 || (ratio - ratio.round()).abs() > 1e-6 {
            return Err(Error::config(
                "sampler.period",
                format!(
                    "must be a whole multiple of dt = {}, got {}",
                    self.dt, self.sampler.period
                ),
            ));
        }
        if !(self.sampler.noise_bound >= 0.0 && self.sampler.noise_bound.is_finite()) {
            return Err(Error::config(
                "sampler.noise_bound",
                "must be finite and >= 0",
            ));
        }
        if self.physics.masses.len() != self.vehicles {
            return Err(Error::config(
                "physics.masses",
                format!(
                    "expected {} masses, got {}",
                    self.vehicles,
                    self.physics.masses.len()
                ),
            ));
        }
        for i in 0..self.vehicles {
            self.physics
                .params(i)
                .validate()
                .map_err(|m| Error::config(format!("physics[{i}]"), m))?;
        }
        if self.initial.len() != self.vehicles {
            return Err(Error::config(
                "initial",
                format!(
                    "expected {} initial conditions, got {}",
                    self.vehicles,
                    self.initial.len()
                ),
            ));
        }
        for (i, ic) in self.initial.iter().enumerate() {
            let all = [
                ic.position,
                ic.velocity,
                ic.position_estimate,
                ic.velocity_estimate,
            ];
            if !all.iter().all(|v| v.is_finite()) {
                return Err(Error::config(format!("initial[{i}]"), "must be finite"));
            }
        }
        if self.offsets.is_none() && self.vehicles != 4 {
            return Err(Error::config(
                "offsets",
                "built-in scenario offsets cover 4 vehicles; provide offsets explicitly",
            ));
        }
        self.formation_offsets()
            .validate(self.vehicles)
            .map_err(|m| Error::config("offsets", m))?;
        if !self.observer.c1.is_positive() {
            return Err(Error::config("observer.c1", "diagonal entries must be > 0"));
        }
        if !self.observer.c2.is_positive() {
            return Err(Error::config("observer.c2", "diagonal entries must be > 0"));
        }
        self.controller
            .validate()
            .map_err(|(k, m)| Error::config(format!("controller.{k}"), m))?;
        self.rbf.validate().map_err(|m| Error::config("rbf", m))?;
        self.etc
            .validate()
            .map_err(|(k, m)| Error::config(format!("etc.{k}"), m))?;
        self.metrics
            .validate()
            .map_err(|(k, m)| Error::config(format!("metrics.{k}"), m))?;
        if let Some(o) = self.reference_origin {
            if !o.is_finite() {
                return Err(Error::config("reference_origin", "must be finite"));
            }
        }
        Ok(())
    }

    /// TOML document that reproduces this configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }
}

/// Parses and validates a TOML configuration document.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let de = toml::Deserializer::parse(text)
        .map_err(|e| Error::config("<document>", e.to_string().trim_end().to_string()))?;
    let config: SimConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().message().to_string())
    })?;
    config.validate()?;
    Ok(config)
}
