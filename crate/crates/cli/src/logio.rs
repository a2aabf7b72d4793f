//! State-log CSV: writing during a run and reading back for `metrics`.
//!
//! Floats are written with `Display`, which is the shortest representation
//! that parses back to the same bits, so a log read back from disk yields
//! exactly the metrics computed in memory.

use std::io::{Read, Write};
use std::path::Path;

use formation_core::{Branch, SimConfig, SimLog, Vec2, VehicleRecord};

use crate::error::CliError;

/// Column order of the state log. The first 22 columns are the documented
/// schema; the trailing five carry what `metrics` needs to recompute the
/// boundedness section.
pub const HEADER: [&str; 27] = [
    "t",
    "vehicle_id",
    "x",
    "y",
    "vx",
    "vy",
    "xhat",
    "yhat",
    "vxhat",
    "vyhat",
    "ref_x",
    "ref_y",
    "z1x",
    "z1y",
    "z2x",
    "z2y",
    "mu_x",
    "mu_y",
    "u_x",
    "u_y",
    "triggered",
    "strategy_branch",
    "w_x",
    "w_y",
    "weight_norm",
    "sigmahat_x",
    "sigmahat_y",
];

/// Writes every `decimate`-th step of `log`. `decimate = 1` keeps every row.
pub fn write_log<W: Write>(log: &SimLog, decimate: usize, out: W) -> csv::Result<()> {
    assert!(decimate >= 1, "decimation factor must be at least 1");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    let mut row: Vec<String> = Vec::with_capacity(HEADER.len());
    for step in (0..log.steps()).step_by(decimate) {
        let t = log.time(step);
        for (v, r) in log.step_records(step).iter().enumerate() {
            row.clear();
            row.push(t.to_string());
            row.push(v.to_string());
            for p in [
                r.state.position,
                r.state.velocity,
                r.observer.position_estimate,
                r.observer.velocity_estimate,
                r.reference.position,
                r.z1,
                r.z2,
                r.mu,
                r.u,
            ] {
                row.push(p.x.to_string());
                row.push(p.y.to_string());
            }
            row.push(u8::from(r.triggered).to_string());
            row.push(r.branch.code().to_string());
            row.push(r.w.x.to_string());
            row.push(r.w.y.to_string());
            row.push(r.weight_norm.to_string());
            row.push(r.sigma_hat.x.to_string());
            row.push(r.sigma_hat.y.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rebuilds a [`SimLog`] from a full-resolution CSV log produced by
/// [`write_log`] under `config`. Signals the file does not carry (reference
/// velocity and acceleration, the held sample) are left at zero.
pub fn read_log<R: Read>(config: &SimConfig, input: R, path: &Path) -> Result<SimLog, CliError> {
    let bad = |message: String| CliError::Log {
        path: path.to_path_buf(),
        message,
    };
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(HEADER) {
        return Err(bad(format!(
            "unexpected header; expected {}",
            HEADER.join(",")
        )));
    }

    let n = config.vehicles;
    let steps = config.steps() + 1;
    let mut records = Vec::with_capacity(steps * n);
    let mut event_times = vec![Vec::new(); n];
    let mut row = csv::StringRecord::new();
    while rd.read_record(&mut row).map_err(|e| bad(e.to_string()))? {
        let line = row.position().map_or(0, |p| p.line());
        let k = records.len();
        let (step, expect_vehicle) = (k / n, k % n);
        let f = |i: usize| -> Result<f64, CliError> {
            row[i]
                .parse::<f64>()
                .map_err(|e| bad(format!("line {line}, column {}: {e}", HEADER[i])))
        };
        let vec = |i: usize| -> Result<Vec2, CliError> { Ok(Vec2::new(f(i)?, f(i + 1)?)) };

        let vehicle: usize = row[1]
            .parse()
            .map_err(|e| bad(format!("line {line}, column vehicle_id: {e}")))?;
        let t = step as f64 * config.dt;
        if vehicle != expect_vehicle || f(0)? != t {
            return Err(bad(format!(
                "line {line}: expected step {step} (t = {t}) vehicle {expect_vehicle}; \
                 the log must hold every step of every vehicle (decimated logs cannot be re-analysed)"
            )));
        }
        let triggered = match &row[20] {
            "0" => false,
            "1" => true,
            other => {
                return Err(bad(format!(
                    "line {line}: triggered must be 0 or 1, got {other}"
                )))
            }
        };
        let branch = row[21]
            .parse::<u8>()
            .ok()
            .and_then(Branch::from_code)
            .ok_or_else(|| bad(format!("line {line}: unknown strategy_branch {}", &row[21])))?;

        let mut r = VehicleRecord::default();
        r.state.position = vec(2)?;
        r.state.velocity = vec(4)?;
        r.observer.position_estimate = vec(6)?;
        r.observer.velocity_estimate = vec(8)?;
        r.reference.position = vec(10)?;
        r.z1 = vec(12)?;
        r.z2 = vec(14)?;
        r.mu = vec(16)?;
        r.u = vec(18)?;
        r.triggered = triggered;
        r.branch = branch;
        r.w = vec(22)?;
        r.weight_norm = f(24)?;
        r.sigma_hat = vec(25)?;
        if triggered {
            event_times[vehicle].push(t);
        }
        records.push(r);
    }
    if records.len() != steps * n {
        return Err(bad(format!(
            "expected {} rows ({steps} steps × {n} vehicles), found {}",
            steps * n,
            records.len()
        )));
    }
    Ok(SimLog {
        config: config.clone(),
        records,
        event_times,
    })
}
