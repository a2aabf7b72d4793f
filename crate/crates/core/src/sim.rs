//! Closed-loop simulation of the whole formation.
//!
//! Each step, in order: sample positions (at sample instants), build
//! references, compute tracking errors and the continuous control, shape the
//! candidate and run the trigger, then advance adaptation, observer and plant
//! with the held control. Followers read their predecessor's observer state
//! from the start of the step, so vehicles never see each other's updates
//! within a step and may be advanced in any order or concurrently.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{
    adapt_step, continuous_control, nn_output, tracking_errors_for, AdaptiveState, NnInput,
};
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::observer::{observer_step, ObserverState, Sampler};
use crate::reference::{follower_reference, leader_reference, FormationOffsets, ReferenceSignal};
use crate::trigger::{active_branch, branch_fires, shaped_control, Branch, TriggerState};
use crate::vec2::Vec2;
use crate::vehicle::{plant_step, VehicleParams, VehicleState};

/// Everything logged for one vehicle at one step.
///
/// States are those at the start of the step; `u` is the control applied
/// over the step, after the trigger decision.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub state: VehicleState,
    pub observer: ObserverState,
    pub reference: ReferenceSignal,
    pub z1: Vec2,
    pub z2: Vec2,
    pub mu: Vec2,
    pub w: Vec2,
    pub u: Vec2,
    pub triggered: bool,
    pub branch: Branch,
    pub weight_norm: f64,
    pub sigma_hat: Vec2,
}

impl VehicleRecord {
    pub fn is_finite(&self) -> bool {
        [
            self.state.position,
            self.state.velocity,
            self.observer.position_estimate,
            self.observer.velocity_estimate,
            self.observer.latest_sample,
            self.reference.position,
            self.reference.velocity,
            self.reference.acceleration,
            self.z1,
            self.z2,
            self.mu,
            self.w,
            self.u,
            self.sigma_hat,
        ]
        .iter()
        .all(|v| v.is_finite())
            && self.weight_norm.is_finite()
    }
}

/// Complete record of a run. Records are stored step-major: all vehicles
/// of step 0, then step 1, and so on. The final record of each vehicle is
/// the terminal state; no control decision is taken there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimLog {
    pub config: SimConfig,
    pub records: Vec<VehicleRecord>,
    /// Per vehicle, the times at which the held control was replaced.
    pub event_times: Vec<Vec<f64>>,
}

impl SimLog {
    pub fn vehicles(&self) -> usize {
        self.config.vehicles
    }

    /// Number of logged instants, `T/dt + 1`.
    pub fn steps(&self) -> usize {
        self.records.len() / self.vehicles()
    }

    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.config.dt
    }

    pub fn record(&self, step: usize, vehicle: usize) -> &VehicleRecord {
        &self.records[step * self.vehicles() + vehicle]
    }

    pub fn step_records(&self, step: usize) -> &[VehicleRecord] {
        let n = self.vehicles();
        &self.records[step * n..(step + 1) * n]
    }

    /// `(t, record)` for one vehicle over the whole run.
    pub fn series(&self, vehicle: usize) -> impl Iterator<Item = (f64, &VehicleRecord)> + '_ {
        let n = self.vehicles();
        self.records
            .iter()
            .skip(vehicle)
            .step_by(n)
            .enumerate()
            .map(|(k, r)| (self.time(k), r))
    }

    /// Steps within `[t0, t1]`, inclusive.
    pub fn step_range(&self, t0: f64, t1: f64) -> std::ops::Range<usize> {
        let dt = self.dt();
        let first = (t0 / dt - 1e-9).ceil().max(0.0) as usize;
        let last = ((t1 / dt + 1e-9).floor() as usize).min(self.steps().saturating_sub(1));
        first..(last + 1).max(first)
    }
}

struct VehicleSim {
    index: usize,
    params: VehicleParams,
    plant: VehicleState,
    observer: ObserverState,
    sampler: Sampler,
    adaptive: AdaptiveState,
    trigger: TriggerState,
    basis: Vec<f64>,
}

struct StepContext<'a> {
    config: &'a SimConfig,
    offsets: &'a FormationOffsets,
    leader_ref: ReferenceSignal,
    step: usize,
    t: f64,
    sample_now: bool,
    decide: bool,
}

impl VehicleSim {
    fn new(config: &SimConfig, index: usize) -> Self {
        let ic = config.initial[index];
        let hidden = config.rbf.hidden_units();
        VehicleSim {
            index,
            params: config.physics.params(index),
            plant: ic.state(),
            observer: ObserverState::new(ic.position_estimate, ic.velocity_estimate),
            sampler: Sampler::new(config.sampler.noise_bound, config.seed, index),
            adaptive: AdaptiveState::zeros(hidden, config.controller.sigma_prior),
            trigger: TriggerState::with_capacity(1024),
            basis: vec![0.0; hidden],
        }
    }

    fn step(&mut self, ctx: &StepContext<'_>, predecessor: Option<Vec2>) -> Result<VehicleRecord> {
        let cfg = ctx.config;
        if ctx.sample_now {
            self.observer.latest_sample = self.sampler.sample_position(self.plant.position);
        }
        let reference = match predecessor {
            None => ctx.leader_ref,
            Some(pred) => follower_reference(self.index, pred, ctx.offsets, &ctx.leader_ref)?,
        };
        let errors =
            tracking_errors_for(&self.observer, &reference, &cfg.observer, cfg.controller.k1);
        let gamma = match cfg.rbf.input {
            NnInput::ObservedVelocity => self.observer.velocity_estimate,
            NnInput::ReferenceVelocity => reference.velocity,
        };
        cfg.rbf.basis_into(gamma, &mut self.basis);
        let nn = nn_output(&self.adaptive, &self.basis)?;
        let mu = continuous_control(
            &errors,
            nn,
            self.adaptive.sigma_hat,
            reference.acceleration,
            &cfg.controller,
        );

        let held = self.trigger.held_control;
        let branch = active_branch(cfg.strategy, held, &cfg.etc);
        let w = shaped_control(branch, mu, errors.z2, &cfg.etc);
        // the first decision always fires so the hold is defined from t = 0
        let triggered =
            ctx.decide && (ctx.step == 0 || branch_fires(branch, w - held, held, &cfg.etc));
        self.trigger.hold_update(w, triggered, ctx.t);
        let u = self.trigger.held_control;

        let record = VehicleRecord {
            state: self.plant,
            observer: self.observer,
            reference,
            z1: errors.z1,
            z2: errors.z2,
            mu,
            w,
            u,
            triggered,
            branch,
            weight_norm: self.adaptive.weight_norm(),
            sigma_hat: self.adaptive.sigma_hat,
        };
        if !record.is_finite() {
            return Err(self.non_finite(ctx, "logged signals"));
        }

        if ctx.decide {
            adapt_step(
                &mut self.adaptive,
                &self.basis,
                errors.z2,
                &cfg.controller,
                cfg.dt,
            );
            self.observer = observer_step(self.observer, u, nn, &cfg.observer, cfg.dt);
            self.plant = plant_step(self.plant, u, ctx.t, cfg.dt, &self.params);
            if !self.adaptive.is_finite() {
                return Err(self.non_finite(ctx, "adaptive state"));
            }
            if !(self.plant.position.is_finite() && self.plant.velocity.is_finite()) {
                return Err(self.non_finite(ctx, "plant state"));
            }
            if !(self.observer.position_estimate.is_finite()
                && self.observer.velocity_estimate.is_finite())
            {
                return Err(self.non_finite(ctx, "observer state"));
            }
        }
        Ok(record)
    }

    fn non_finite(&self, ctx: &StepContext<'_>, quantity: &'static str) -> Error {
        Error::NonFinite {
            step: ctx.step,
            time: ctx.t,
            vehicle: self.index,
            quantity,
        }
    }
}

/// Runs the closed loop for `config.duration` seconds.
pub fn run_closed_loop(config: &SimConfig) -> Result<SimLog> {
    config.validate()?;
    let n = config.vehicles;
    let steps = config.steps();
    let sample_every = config.sample_every();
    let offsets = config.formation_offsets();
    let origin = config.origin();

    let mut fleet: Vec<VehicleSim> = (0..n).map(|i| VehicleSim::new(config, i)).collect();
    let mut records = vec![VehicleRecord::default(); (steps + 1) * n];
    let mut predecessors = vec![Vec2::ZERO; n];

    for (step, chunk) in records.chunks_exact_mut(n).enumerate() {
        let t = step as f64 * config.dt;
        for (slot, v) in predecessors.iter_mut().zip(&fleet) {
            *slot = v.observer.position_estimate;
        }
        let ctx = StepContext {
            config,
            offsets: &offsets,
            leader_ref: leader_reference(t.min(crate::reference::PROFILE_END), origin)?,
            step,
            t,
            sample_now: step % sample_every == 0,
            decide: step < steps,
        };
        let pred = |i: usize| {
            if i == 0 {
                None
            } else {
                Some(predecessors[i - 1])
            }
        };

        if config.parallel {
            let results: Vec<Result<()>> = fleet
                .par_iter_mut()
                .zip(chunk.par_iter_mut())
                .map(|(v, slot)| {
                    *slot = v.step(&ctx, pred(v.index))?;
                    Ok(())
                })
                .collect();
            // lowest vehicle index wins regardless of scheduling
            results.into_iter().collect::<Result<()>>()?;
        } else {
            for (v, slot) in fleet.iter_mut().zip(chunk.iter_mut()) {
                *slot = v.step(&ctx, pred(v.index))?;
            }
        }
    }

    Ok(SimLog {
        config: config.clone(),
        records,
        event_times: fleet.into_iter().map(|v| v.trigger.event_times).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trigger::StrategyKind;

    fn short(strategy: StrategyKind) -> SimConfig {
        SimConfig {
            duration: 2.0,
            ..SimConfig::default().with_strategy(strategy)
        }
    }

    #[test]
    fn record_count_and_time_grid() {
        let log = run_closed_loop(&short(StrategyKind::Continuous)).unwrap();
        assert_eq!(log.steps(), 2001);
        assert_eq!(log.records.len(), 2001 * 4);
        assert_eq!(log.time(1000), 1.0);
        for v in 0..4 {
            assert_eq!(log.event_times[v].len(), 2000);
            assert!(!log.record(2000, v).triggered);
        }
    }

    #[test]
    fn first_step_always_triggers() {
        let log = run_closed_loop(&short(StrategyKind::FixedThreshold)).unwrap();
        for v in 0..4 {
            assert!(log.record(0, v).triggered);
            assert_eq!(log.event_times[v][0], 0.0);
            assert_eq!(log.record(0, v).u, log.record(0, v).w);
        }
    }

    #[test]
    fn follower_reference_tracks_predecessor_estimate() {
        let log = run_closed_loop(&short(StrategyKind::RelativeThreshold)).unwrap();
        let offsets = log.config.formation_offsets();
        for step in (0..log.steps()).step_by(97) {
            for v in 1..4 {
                let r = log.record(step, v);
                let pred = log.record(step, v - 1);
                assert_eq!(
                    r.reference.position + offsets.get(v),
                    pred.observer.position_estimate
                );
            }
        }
    }

    #[test]
    fn invalid_config_fails_before_stepping() {
        let cfg = SimConfig {
            dt: -1.0,
            ..SimConfig::default()
        };
        assert!(matches!(run_closed_loop(&cfg), Err(Error::Config { .. })));
    }

    #[test]
    fn divergence_names_step_and_vehicle() {
        let mut cfg = short(StrategyKind::Continuous);
        cfg.initial[2].velocity_estimate = Vec2::new(f64::MAX, 0.0);
        cfg.initial[2].velocity = Vec2::new(1e300, 0.0);
        match run_closed_loop(&cfg) {
            Err(Error::NonFinite { vehicle, step, .. }) => {
                assert_eq!(vehicle, 2);
                assert_eq!(step, 0);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn step_range_is_inclusive() {
        let log = run_closed_loop(&short(StrategyKind::Continuous)).unwrap();
        assert_eq!(log.step_range(0.5, 1.0), 500..1001);
        assert_eq!(log.step_range(0.0, 99.0), 0..2001);
    }
}
