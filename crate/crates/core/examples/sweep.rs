//! Runs every scenario under every strategy and prints the headline metrics.
//!
//! `cargo run --release --example sweep -- [seed]`. `PERIOD` and `NOISE`
//! override the sampling period and noise bound; `ONLY_LINEAR` restricts the
//! sweep to the linear formation.

use formation_core::metrics::{
    boundedness_report, min_pairwise_distance, time_headway, tracking_report, trigger_counts,
};
use formation_core::{run_closed_loop, ScenarioKind, SimConfig, StrategyKind};

fn main() {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    for scenario in ScenarioKind::ALL {
        for strategy in StrategyKind::ALL {
            let mut cfg = SimConfig::default()
                .with_scenario(scenario)
                .with_strategy(strategy);
            cfg.seed = seed;
            if let Ok(p) = std::env::var("PERIOD") {
                cfg.sampler.period = p.parse().unwrap();
            }
            if let Ok(p) = std::env::var("NOISE") {
                cfg.sampler.noise_bound = p.parse().unwrap();
            }
            if std::env::var("ONLY_LINEAR").is_ok() && scenario != ScenarioKind::Linear {
                continue;
            }
            let started = std::time::Instant::now();
            let log = match run_closed_loop(&cfg) {
                Ok(l) => l,
                Err(e) => {
                    println!("{scenario:>12} {strategy:>10}: {e}");
                    continue;
                }
            };
            let elapsed = started.elapsed();
            let counts: Vec<String> = trigger_counts(&log)
                .iter()
                .map(|c| format!("{}({}+{})", c.total, c.relative, c.fixed))
                .collect();
            let safety = min_pairwise_distance(&log, [0.0, 50.0]).unwrap();
            let overall = safety.overall().unwrap();
            let b = boundedness_report(&log, 20.0, &log.config.metrics.ceilings);
            println!(
                "{scenario:>12} {strategy:>10} [{:.2?}] counts {} | min dist {:.3} ({}-{} @ {:.2}) | bounded {}",
                elapsed,
                counts.join(" "),
                overall.min_distance,
                overall.a,
                overall.b,
                overall.time,
                b.pass
            );
            for v in &b.vehicles {
                println!(
                    "      v{} obs {:.3}/{:.3} z1 {:.3} z2 {:.3} W {:.3} sigma {:.3}",
                    v.vehicle,
                    v.observer_position,
                    v.observer_velocity,
                    v.z1,
                    v.z2,
                    v.weights,
                    v.sigma
                );
            }
            let t = tracking_report(&log, [20.0, 50.0]).unwrap();
            let gap: Vec<f64> = t.vehicles.iter().map(|v| v.gap_error).collect();
            let lateral: Vec<f64> = t.vehicles.iter().map(|v| v.lateral_error).collect();
            println!(
                "      after 20 s: gap err {:.3?} lateral err {:.3?}",
                &gap[1..],
                lateral
            );
            if scenario == ScenarioKind::Linear {
                let early = time_headway(&log, [20.0, 24.0]).unwrap();
                let late = time_headway(&log, [35.0, 50.0]).unwrap();
                for (e, l) in early.followers.iter().zip(&late.followers) {
                    println!(
                        "      headway v{} early mean {:.4} late mean {:.4} late range {:.4}",
                        e.vehicle, e.mean, l.mean, l.range
                    );
                }
            }
        }
    }
}
