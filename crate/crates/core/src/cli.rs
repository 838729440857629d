//! Command-line front end: `run`, `sweep` and `validate`.
//!
//! Per-slot CSV columns, in order (`n` runs over relays, 1-based):
//!
//! | column | meaning |
//! |---|---|
//! | `slot` | slot index, from 0 |
//! | `start_s`, `length_s` | slot start and length |
//! | `phi_n` | applied sleep ratio |
//! | `bs_energy_j` | base station grid energy `E0` |
//! | `bs_power_w` | `E0 / L` |
//! | `rs_energy_n_j` | relay consumption `En` |
//! | `battery_start_n_j`, `battery_end_n_j` | battery level on the grid |
//! | `system_blocking` | arrival-weighted blocking `Pblk` |
//! | `bs_blocking`, `rs_blocking_n` | per-station blocking |
//! | `effective_bs_arrivals` | `λ0'` |
//! | `bs_utilization_ratio` | `W0 / W0th` |
//! | `bs_saturated` | mean demand hit the BS limit (0/1) |
//! | `clamped_n`, `forced_n` | feasibility clamp / forced shutdown (0/1) |
//! | `stage_cost` | `E0 + ψ ω Pblk` |
//!
//! The sweep table `tradeoff.csv` has columns
//! `axis_value, algorithm, mean_grid_power_w, mean_blocking`.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mcoracle::{simulate_slot_blocking, OracleConfig, SlotCheck, StartState, StationCheck};
use crate::model::Problem;
use crate::policy::{solve, Algorithm, SleepPolicy};
use crate::scenario::{Scenario, DEFAULT_SCENARIO_JSON};

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "RELAYSLEEP_THREADS";

/// Exit status when a Monte Carlo check disagrees with the closed form.
pub const EXIT_VALIDATION_FAILED: u8 = 5;

/// `|z|` above which `validate` fails.
pub const Z_LIMIT: f64 = 4.0;

#[derive(Debug, Parser)]
#[command(name = "relaysleep", version, about = "Relay sleep scheduling planner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one scenario and write per-slot results.
    Run(RunArgs),
    /// Solve a scenario over a range of traffic scales or blocking weights.
    Sweep(SweepArgs),
    /// Compare closed-form blocking with a queue simulation.
    Validate(ValidateArgs),
    /// Print the bundled default scenario.
    DefaultScenario,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON; the bundled default when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// CSV replacing the scenario's per-slot profiles.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// Battery grid unit in joules.
    #[arg(long)]
    pub grid_unit: Option<f64>,
    /// Overrides the scenario seed used by the queue simulation.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ScenarioArgs {
    pub fn load(&self) -> Result<Scenario> {
        let mut s = match &self.scenario {
            Some(path) => Scenario::load(path)?,
            None => Scenario::bundled_default(),
        };
        if let Some(path) = &self.profiles {
            s = s.with_profiles_csv(path)?;
        }
        if let Some(unit) = self.grid_unit {
            s.battery.grid_unit_j = unit;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value_t = Algorithm::ReducedDp)]
    pub algorithm: Algorithm,
    /// Sleep ratios for `fixed-policy`: a CSV with `phi_1..phi_N` columns.
    /// All-awake when omitted.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Output directory for `slots.csv` and `summary.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    TrafficScale,
    Psi,
}

impl Axis {
    fn name(&self) -> &'static str {
        match self {
            Axis::TrafficScale => "traffic-scale",
            Axis::Psi => "psi",
        }
    }

    pub fn apply(&self, scenario: &Scenario, value: f64) -> Scenario {
        match self {
            Axis::TrafficScale => scenario.with_traffic_scale(value),
            Axis::Psi => scenario.with_psi(value),
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Scenario parameter to vary.
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Algorithm::ReducedDp, Algorithm::Greedy])]
    pub algorithm: Vec<Algorithm>,
    /// Directory for one run subdirectory per cell plus `tradeoff.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Slot to check; every slot when omitted.
    #[arg(long)]
    pub slot: Option<usize>,
    /// Policy whose sleep ratios are simulated.
    #[arg(long, value_enum, default_value_t = Algorithm::ReducedDp)]
    pub algorithm: Algorithm,
    /// Independent simulation runs per station.
    #[arg(long, default_value_t = 8)]
    pub replications: u64,
    /// Measured arrivals per replication.
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    /// Start each replication from an empty queue plus warmup instead of
    /// the stationary occupancy.
    #[arg(long)]
    pub cold_start: bool,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Applies [`THREADS_ENV`] to the global rayon pool.
pub fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV}={value:?} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("{THREADS_ENV}: {e}")))
}

/// Parses arguments from the environment, runs, and maps errors to exit codes.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Run(args) => run(args).map(|_| ExitCode::SUCCESS),
        Command::Sweep(args) => sweep(args).map(|_| ExitCode::SUCCESS),
        Command::Validate(args) => validate(args),
        Command::DefaultScenario => {
            print!("{DEFAULT_SCENARIO_JSON}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub algorithm: Algorithm,
    pub slots: usize,
    pub relays: usize,
    pub seed: u64,
    pub total_grid_energy_j: f64,
    pub mean_grid_power_w: f64,
    pub mean_blocking: f64,
    pub weighted_cost: f64,
    pub clamped_actions: usize,
    pub wall_time_s: f64,
}

impl Summary {
    pub fn new(policy: &SleepPolicy, scenario: &Scenario, wall_time_s: f64) -> Self {
        Self {
            algorithm: policy.algorithm,
            slots: policy.slots.len(),
            relays: scenario.relays(),
            seed: scenario.seed,
            total_grid_energy_j: policy.total_bs_energy,
            mean_grid_power_w: policy.mean_grid_power(),
            mean_blocking: policy.mean_blocking,
            weighted_cost: policy.total_cost,
            clamped_actions: policy.slots.iter().flat_map(|s| &s.clamped).filter(|c| **c).count(),
            wall_time_s,
        }
    }
}

/// Solves `scenario` with `algorithm`; `fixed` feeds `fixed-policy`.
pub fn solve_scenario(
    scenario: &Scenario,
    algorithm: Algorithm,
    fixed: Option<&[Vec<f64>]>,
) -> Result<(SleepPolicy, Summary)> {
    let started = Instant::now();
    let problem = Problem::new(scenario)?;
    let policy = solve(&problem, algorithm, fixed)?;
    let summary = Summary::new(&policy, scenario, started.elapsed().as_secs_f64());
    Ok((policy, summary))
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Per-slot CSV bytes; see the module docs for the schema.
pub fn slots_csv(policy: &SleepPolicy, relays: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = vec!["slot".into(), "start_s".into(), "length_s".into()];
    let per_relay =
        |prefix: &str, suffix: &str| -> Vec<String> { (1..=relays).map(|n| format!("{prefix}{n}{suffix}")).collect() };
    header.extend(per_relay("phi_", ""));
    header.extend(["bs_energy_j".into(), "bs_power_w".into()]);
    header.extend(per_relay("rs_energy_", "_j"));
    header.extend(per_relay("battery_start_", "_j"));
    header.extend(per_relay("battery_end_", "_j"));
    header.extend(["system_blocking".into(), "bs_blocking".into()]);
    header.extend(per_relay("rs_blocking_", ""));
    header.extend([
        "effective_bs_arrivals".into(),
        "bs_utilization_ratio".into(),
        "bs_saturated".into(),
    ]);
    header.extend(per_relay("clamped_", ""));
    header.extend(per_relay("forced_", ""));
    header.push("stage_cost".into());
    w.write_record(&header)?;

    let mut start = 0.0;
    let bs_limit_ratio = |s: &crate::policy::SlotRecord| s.outcome.bs_utilization / s.outcome.bs_limit;
    for s in &policy.slots {
        let o = &s.outcome;
        let mut row: Vec<String> = vec![s.slot.to_string(), start.to_string(), s.length.to_string()];
        row.extend(s.sleep.iter().map(f64::to_string));
        row.push(o.bs_energy.to_string());
        row.push((o.bs_energy / s.length).to_string());
        row.extend(s.rs_energy.iter().map(f64::to_string));
        row.extend(s.battery_start.iter().map(f64::to_string));
        row.extend(s.battery_end.iter().map(f64::to_string));
        row.push(o.system_blocking.to_string());
        row.push(o.bs_blocking.to_string());
        row.extend(o.rs_blocking.iter().map(f64::to_string));
        row.push(o.effective_bs_arrivals.to_string());
        row.push(bs_limit_ratio(s).to_string());
        row.push(flag(o.bs_saturated).into());
        row.extend(s.clamped.iter().map(|c| flag(*c).to_string()));
        row.extend(s.forced.iter().map(|c| flag(*c).to_string()));
        row.push(o.cost.to_string());
        w.write_record(&row)?;
        start += s.length;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv buffer: {e}")))
}

/// Reads `phi_1..phi_N` columns into a `[slot][relay]` matrix.
pub fn read_policy_csv(path: &Path, relays: usize) -> Result<Vec<Vec<f64>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers()?.clone();
    let columns: Vec<usize> = (1..=relays)
        .map(|n| {
            let name = format!("phi_{n}");
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::InvalidScenario(format!("{}: line 1: missing column {name}", path.display())))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let phis = columns
            .iter()
            .map(|&c| {
                let v = record.get(c).unwrap_or("");
                v.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidScenario(format!(
                        "{}: line {}, column {}: not a number: {v:?}",
                        path.display(),
                        row + 2,
                        headers.get(c).unwrap_or("?")
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(phis);
    }
    Ok(out)
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn summary_json(summary: &Summary) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(summary).map_err(|source| Error::Json {
        context: "summary".into(),
        source,
    })?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn write_run(dir: &Path, policy: &SleepPolicy, summary: &Summary, relays: usize) -> Result<()> {
    let csv = slots_csv(policy, relays)?;
    let json = summary_json(summary)?;
    write_atomic(&dir.join("slots.csv"), &csv)?;
    write_atomic(&dir.join("summary.json"), &json)
}

pub fn run(args: &RunArgs) -> Result<Summary> {
    let scenario = args.scenario.load()?;
    let fixed = match (&args.policy, args.algorithm) {
        (Some(path), Algorithm::FixedPolicy) => Some(read_policy_csv(path, scenario.relays())?),
        (Some(_), other) => {
            return Err(Error::InvalidArgument(format!(
                "--policy only applies to fixed-policy, not {other}"
            )))
        }
        (None, _) => None,
    };
    info!("solving {} slots with {}", scenario.slots(), args.algorithm);
    let (policy, summary) = solve_scenario(&scenario, args.algorithm, fixed.as_deref())?;
    write_run(&args.out, &policy, &summary, scenario.relays())?;
    info!("wrote {}", args.out.display());
    Ok(summary)
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub axis_value: f64,
    pub algorithm: Algorithm,
    pub policy: SleepPolicy,
    pub summary: Summary,
}

/// Solves every `(value, algorithm)` pair concurrently; order follows the
/// inputs, values outermost.
pub fn sweep_cells(
    scenario: &Scenario,
    axis: Axis,
    values: &[f64],
    algorithms: &[Algorithm],
) -> Result<Vec<SweepCell>> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument("a sweep needs at least two values".into()));
    }
    if algorithms.is_empty() {
        return Err(Error::InvalidArgument("a sweep needs at least one algorithm".into()));
    }
    let jobs: Vec<(f64, Algorithm)> = values
        .iter()
        .flat_map(|&v| algorithms.iter().map(move |&a| (v, a)))
        .collect();
    jobs.par_iter()
        .map(|&(v, a)| {
            let s = axis.apply(scenario, v);
            let (policy, summary) = solve_scenario(&s, a, None)?;
            Ok(SweepCell {
                axis_value: v,
                algorithm: a,
                policy,
                summary,
            })
        })
        .collect()
}

pub fn tradeoff_csv(cells: &[SweepCell]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["axis_value", "algorithm", "mean_grid_power_w", "mean_blocking"])?;
    for c in cells {
        w.write_record([
            c.axis_value.to_string(),
            c.algorithm.to_string(),
            c.summary.mean_grid_power_w.to_string(),
            c.summary.mean_blocking.to_string(),
        ])?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv buffer: {e}")))
}

pub fn sweep(args: &SweepArgs) -> Result<Vec<SweepCell>> {
    let scenario = args.scenario.load()?;
    info!(
        "sweeping {} over {} values x {} algorithms",
        args.axis.name(),
        args.values.len(),
        args.algorithm.len()
    );
    let cells = sweep_cells(&scenario, args.axis, &args.values, &args.algorithm)?;
    for (k, c) in cells.iter().enumerate() {
        let dir = args.out.join(format!("{:02}-{}-{}", k, args.axis.name(), c.algorithm));
        write_run(&dir, &c.policy, &c.summary, scenario.relays())?;
    }
    write_atomic(&args.out.join("tradeoff.csv"), &tradeoff_csv(&cells)?)?;
    Ok(cells)
}

/// Simulation checks for the chosen slots under a solved policy.
pub fn validation_checks(
    scenario: &Scenario,
    algorithm: Algorithm,
    slot: Option<usize>,
    cfg: &OracleConfig,
) -> Result<Vec<SlotCheck>> {
    let problem = Problem::new(scenario)?;
    let policy = solve(&problem, algorithm, None)?;
    let slots: Vec<usize> = match slot {
        Some(i) if i < problem.horizon() => vec![i],
        Some(i) => {
            return Err(Error::InvalidArgument(format!(
                "slot {i} out of range (scenario has {} slots)",
                problem.horizon()
            )))
        }
        None => (0..problem.horizon()).collect(),
    };
    slots
        .into_iter()
        .map(|i| {
            let cfg = OracleConfig {
                seed: cfg.seed.wrapping_add(i as u64),
                ..*cfg
            };
            simulate_slot_blocking(&problem, i, &policy.slots[i].sleep, &cfg)
        })
        .collect()
}

pub fn validation_report(checks: &[SlotCheck]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["slot", "station", "analytic", "simulated", "se", "z"])?;
    let mut row = |slot: usize, station: String, c: &StationCheck| {
        w.write_record([
            slot.to_string(),
            station,
            c.analytic.to_string(),
            c.simulated.to_string(),
            c.se.to_string(),
            c.z().to_string(),
        ])
    };
    for check in checks {
        row(check.slot, "bs".into(), &check.bs)?;
        for (n, c) in check.relays.iter().enumerate() {
            row(check.slot, format!("rs_{}", n + 1), c)?;
        }
        row(check.slot, "system".into(), &check.system)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv buffer: {e}")))
}

pub fn validate(args: &ValidateArgs) -> Result<ExitCode> {
    let scenario = args.scenario.load()?;
    let cfg = OracleConfig {
        samples: args.samples,
        warmup: if args.cold_start { args.samples / 10 } else { 0 },
        replications: args.replications,
        seed: scenario.seed,
        start: if args.cold_start {
            StartState::Empty
        } else {
            StartState::Stationary
        },
    };
    let checks = validation_checks(&scenario, args.algorithm, args.slot, &cfg)?;
    let report = validation_report(&checks)?;
    if let Some(path) = &args.out {
        write_atomic(path, &report)?;
    }
    std::io::stdout()
        .write_all(&report)
        .map_err(|e| Error::io("<stdout>", e))?;
    let worst = checks.iter().map(SlotCheck::max_abs_z).fold(0.0, f64::max);
    if worst > Z_LIMIT {
        eprintln!("validation failed: max |z| = {worst:.2} exceeds {Z_LIMIT}");
        return Ok(ExitCode::from(EXIT_VALIDATION_FAILED));
    }
    Ok(ExitCode::SUCCESS)
}
