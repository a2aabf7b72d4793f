//! Formation control of autonomous vehicles with event-triggered updates.
//!
//! A fleet of point-mass vehicles follows a leader in a prescribed formation.
//! No vehicle communicates: each one observes its own sampled, noisy position
//! through a state observer, and follows the observed position of its
//! predecessor. An adaptive backstepping law, with an RBF network learning
//! the drag, provides the continuous control; an event trigger decides when
//! that control is actually pushed to the actuator.
//!
//! ```
//! use formation_core::{run_closed_loop, SimConfig, StrategyKind};
//!
//! let config = SimConfig {
//!     duration: 1.0,
//!     ..SimConfig::default().with_strategy(StrategyKind::FixedThreshold)
//! };
//! let log = run_closed_loop(&config).unwrap();
//! assert_eq!(log.steps(), 1001);
//! ```

// `!(x > 0.0)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod config;
pub mod error;
pub mod metrics;
pub mod observer;
pub mod reference;
pub mod sim;
pub mod trigger;
pub mod vec2;
pub mod vehicle;

pub use config::{parse_config, SimConfig};
pub use error::{Error, Result};
pub use reference::ScenarioKind;
pub use sim::{run_closed_loop, SimLog, VehicleRecord};
pub use trigger::{Branch, StrategyKind};
pub use vec2::{Diag2, Vec2};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    pub mod dynamics {}
    #[doc = include_str!("../../../book/src/reference.md")]
    pub mod reference {}
    #[doc = include_str!("../../../book/src/observer.md")]
    pub mod observer {}
    #[doc = include_str!("../../../book/src/adaptive.md")]
    pub mod adaptive {}
    #[doc = include_str!("../../../book/src/triggers.md")]
    pub mod triggers {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    pub mod simulation {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    pub mod metrics {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
