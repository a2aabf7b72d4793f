//! `formation` command-line runner: single runs, strategy comparisons and
//! metric recomputation from saved logs.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use formation_core::metrics::{summarize, MetricsSummary};
use formation_core::{
    parse_config, run_closed_loop, ScenarioKind, SimConfig, SimLog, StrategyKind,
};

pub mod error;
pub mod logio;

pub use error::CliError;

pub const OUT_ROOT_ENV: &str = "FORMATION_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "formation",
    version,
    about = "Event-triggered formation control simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its log, metrics and config echo.
    Run(RunArgs),
    /// Run all four strategies on one scenario and tabulate them side by side.
    Compare(CompareArgs),
    /// Recompute the metrics summary from a saved state log.
    Metrics(MetricsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScenarioArg {
    Linear,
    Square,
    LinearQueue,
}

impl From<ScenarioArg> for ScenarioKind {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Linear => ScenarioKind::Linear,
            ScenarioArg::Square => ScenarioKind::Square,
            ScenarioArg::LinearQueue => ScenarioKind::LinearQueue,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Continuous,
    Fixed,
    Relative,
    Switched,
}

impl From<StrategyArg> for StrategyKind {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Continuous => StrategyKind::Continuous,
            StrategyArg::Fixed => StrategyKind::FixedThreshold,
            StrategyArg::Relative => StrategyKind::RelativeThreshold,
            StrategyArg::Switched => StrategyKind::SwitchedThreshold,
        }
    }
}

/// Configuration source and per-run overrides.
#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    /// TOML configuration; omitted keys take their defaults.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scenario: Option<ScenarioArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Integrator step, s.
    #[arg(long, value_name = "S")]
    pub dt: Option<f64>,
    /// Simulated horizon, s.
    #[arg(long, value_name = "S")]
    pub duration: Option<f64>,
    /// Advance vehicles concurrently within each step.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output directory. Defaults to a name derived from the run under the
    /// output root.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Root for default output directories.
    #[arg(long, value_name = "DIR", env = OUT_ROOT_ENV, default_value = "runs")]
    pub out_root: PathBuf,
    /// Keep every K-th step in the CSV log. Metrics always use every step.
    #[arg(long, value_name = "K", default_value_t = 1,
          value_parser = clap::value_parser!(u64).range(1..))]
    pub decimate: u64,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args)]
pub struct MetricsArgs {
    /// A run's `log.csv`, or the run directory containing it.
    pub log: PathBuf,
    /// Configuration of the run. Defaults to `config.toml` next to the log.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Write `metrics.json` into DIR instead of printing it.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

pub const CONFIG_FILE: &str = "config.toml";
pub const LOG_FILE: &str = "log.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const COMPARISON_FILE: &str = "comparison.txt";

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => run(&args),
        Command::Compare(args) => compare(&args),
        Command::Metrics(args) => metrics(&args),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(CliError::io(path))
}

fn load_config(path: &Path) -> Result<SimConfig, CliError> {
    let text = read_text(path)?;
    parse_config(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Loads the base configuration and applies command-line overrides.
pub fn resolve_config(sim: &SimArgs, strategy: Option<StrategyArg>) -> Result<SimConfig, CliError> {
    let mut cfg = match &sim.config {
        Some(path) => load_config(path)?,
        None => SimConfig::default(),
    };
    if let Some(s) = sim.scenario {
        cfg.scenario = s.into();
    }
    if let Some(s) = strategy {
        cfg.strategy = s.into();
    }
    if let Some(seed) = sim.seed {
        cfg.seed = seed;
    }
    if let Some(dt) = sim.dt {
        cfg.dt = dt;
    }
    if let Some(t) = sim.duration {
        cfg.duration = t;
    }
    cfg.parallel |= sim.parallel;
    cfg.validate()?;
    Ok(cfg)
}

pub fn render_metrics(summary: &MetricsSummary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("metrics serialize to JSON");
    s.push('\n');
    s
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(CliError::io(path))
}

/// Writes the config echo, state log, metrics summary and per-metric tables
/// of one run into `dir`.
pub fn write_run(dir: &Path, log: &SimLog, decimate: usize) -> Result<MetricsSummary, CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    write_file(&dir.join(CONFIG_FILE), &log.config.to_toml())?;

    let log_path = dir.join(LOG_FILE);
    let file = fs::File::create(&log_path).map_err(CliError::io(&log_path))?;
    logio::write_log(log, decimate, BufWriter::new(file))
        .map_err(|e| CliError::io(&log_path)(e.into()))?;

    let summary = summarize(log)?;
    write_file(&dir.join(METRICS_FILE), &render_metrics(&summary))?;
    write_tables(dir, &summary)?;
    Ok(summary)
}

fn write_tables(dir: &Path, m: &MetricsSummary) -> Result<(), CliError> {
    let mut counts = String::from("vehicle_id,total,fixed,relative\n");
    for c in &m.trigger_counts {
        writeln!(
            counts,
            "{},{},{},{}",
            c.vehicle, c.total, c.fixed, c.relative
        )
        .unwrap();
    }
    write_file(&dir.join("trigger_counts.csv"), &counts)?;

    let mut safety = String::from("a,b,min_distance,time\n");
    for p in &m.safety.pairs {
        writeln!(safety, "{},{},{},{}", p.a, p.b, p.min_distance, p.time).unwrap();
    }
    write_file(&dir.join("safety.csv"), &safety)?;

    if let Some(h) = &m.headway {
        let mut out = String::from("vehicle_id,mean,min,max,range,excluded\n");
        for f in &h.followers {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                f.vehicle, f.mean, f.min, f.max, f.range, f.excluded
            )
            .unwrap();
        }
        write_file(&dir.join("headway.csv"), &out)?;
    }
    Ok(())
}

fn default_dir(out: &OutArgs, name: String) -> PathBuf {
    out.out.clone().unwrap_or_else(|| out.out_root.join(name))
}

fn run(args: &RunArgs) -> Result<(), CliError> {
    let cfg = resolve_config(&args.sim, args.strategy)?;
    let dir = default_dir(
        &args.out,
        format!("{}-{}-seed{}", cfg.scenario, cfg.strategy, cfg.seed),
    );
    let log = run_closed_loop(&cfg)?;
    let summary = write_run(&dir, &log, args.out.decimate as usize)?;

    let counts: Vec<String> = summary
        .trigger_counts
        .iter()
        .map(|c| c.total.to_string())
        .collect();
    println!("{} / {} / seed {}", cfg.scenario, cfg.strategy, cfg.seed);
    println!("  control updates per vehicle: {}", counts.join(" "));
    if let Some(p) = summary.safety.overall() {
        println!(
            "  min distance: {:.3} m (AV{}–AV{} at {:.3} s)",
            p.min_distance,
            p.a + 1,
            p.b + 1,
            p.time
        );
    }
    println!(
        "  bounded: {}",
        if summary.boundedness.pass {
            "yes"
        } else {
            "no"
        }
    );
    for v in &summary.boundedness.violations {
        println!("    {v}");
    }
    println!("  wrote {}", dir.display());
    Ok(())
}

fn compare(args: &CompareArgs) -> Result<(), CliError> {
    let base = resolve_config(&args.sim, None)?;
    let dir = default_dir(
        &args.out,
        format!("compare-{}-seed{}", base.scenario, base.seed),
    );
    let decimate = args.out.decimate as usize;

    let results: Vec<Result<MetricsSummary, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = StrategyKind::ALL
            .into_iter()
            .map(|k| {
                let cfg = base.clone().with_strategy(k);
                let sub = dir.join(k.name());
                scope.spawn(move || {
                    let log = run_closed_loop(&cfg)?;
                    write_run(&sub, &log, decimate)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("strategy worker panicked"))
            .collect()
    });
    let summaries = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let table = comparison_table(&base, &summaries);
    write_file(&dir.join(COMPARISON_FILE), &table)?;
    print!("{table}");
    println!("wrote {}", dir.display());
    Ok(())
}

/// Side-by-side table of trigger counts, headway ranges, minimum distances
/// and boundedness, one column per strategy.
pub fn comparison_table(base: &SimConfig, summaries: &[MetricsSummary]) -> String {
    let mut t = String::new();
    let cell = 18;
    writeln!(t, "scenario {}, seed {}", base.scenario, base.seed).unwrap();
    let header = |t: &mut String, title: &str| {
        write!(t, "\n{title:<22}").unwrap();
        for s in summaries {
            write!(t, "{:>cell$}", s.strategy).unwrap();
        }
        t.push('\n');
    };

    header(&mut t, "control updates");
    for v in 0..base.vehicles {
        write!(t, "{:<22}", format!("AV{}", v + 1)).unwrap();
        for s in summaries {
            let c = &s.trigger_counts[v];
            let text = if s.strategy == StrategyKind::SwitchedThreshold.name() {
                format!("{} ({}+{})", c.total, c.relative, c.fixed)
            } else {
                c.total.to_string()
            };
            write!(t, "{text:>cell$}").unwrap();
        }
        t.push('\n');
    }

    if summaries.iter().all(|s| s.headway.is_some()) {
        let w = summaries[0].headway.as_ref().unwrap().window;
        header(&mut t, &format!("headway range {}-{} s", w[0], w[1]));
        for (i, f) in summaries[0]
            .headway
            .as_ref()
            .unwrap()
            .followers
            .iter()
            .enumerate()
        {
            write!(t, "{:<22}", format!("AV{}", f.vehicle + 1)).unwrap();
            for s in summaries {
                let r = s.headway.as_ref().unwrap().followers[i].range;
                write!(t, "{:>cell$}", format!("{r:.4}")).unwrap();
            }
            t.push('\n');
        }
    }

    header(&mut t, "safety");
    write!(t, "{:<22}", "min distance (m)").unwrap();
    for s in summaries {
        let d = s.safety.overall().map_or(f64::NAN, |p| p.min_distance);
        write!(t, "{:>cell$}", format!("{d:.3}")).unwrap();
    }
    t.push('\n');
    write!(t, "{:<22}", "bounded").unwrap();
    for s in summaries {
        write!(
            t,
            "{:>cell$}",
            if s.boundedness.pass { "yes" } else { "no" }
        )
        .unwrap();
    }
    t.push('\n');
    t
}

fn metrics(args: &MetricsArgs) -> Result<(), CliError> {
    let log_path = if args.log.is_dir() {
        args.log.join(LOG_FILE)
    } else {
        args.log.clone()
    };
    let config_path = args.config.clone().unwrap_or_else(|| {
        log_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(CONFIG_FILE)
    });
    let file = fs::File::open(&log_path).map_err(CliError::io(&log_path))?;
    let cfg = load_config(&config_path)?;
    let log = logio::read_log(&cfg, std::io::BufReader::new(file), &log_path)?;
    let summary = summarize(&log).map_err(|e| CliError::Log {
        path: log_path.clone(),
        message: e.to_string(),
    })?;
    let json = render_metrics(&summary);
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(CliError::io(dir))?;
            write_file(&dir.join(METRICS_FILE), &json)
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(json.as_bytes())
                .map_err(CliError::io("<stdout>"))
        }
    }
}
