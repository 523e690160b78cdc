//! Command-line driver.
//!
//! ```text
//! flexq <command> [--config FILE] [--out DIR] [--set key=value]... [--seed N] [--tol X] [--xmax N]
//! ```
//!
//! Exit codes: 0 success, 1 i/o failure, 2 configuration error,
//! 3 numerical failure, 4 mismatch against the published table.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::average::{average_reward, AverageOptions};
use crate::config::{Config, ConfigError};
use crate::dp::{near_ties, solve, HorizonSpec, SolveOptions, Variant};
use crate::error::{Error, Result};
use crate::flexibility::{critical_reward, flexibility, sweep, FlexibilityOptions, SweepAxis, Verdict};
use crate::model::{ModelParams, TruncationSpec};
use crate::report::{self, fmt_real, write_table};
use crate::sim::{simulate_average, simulate_discounted, trace_discounted, write_trace, SimConfig};
use crate::threshold::{Threshold, ThresholdPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Optimal discounted policy and value function.
    Solve,
    /// Value of service-rate flexibility.
    Flexibility,
    /// Flexibility along one parameter axis.
    Sweep,
    /// Reward at which the fast server starts to change admission.
    CriticalR,
    /// Average-profit optimal policy by vanishing discount.
    Average,
    /// Monte Carlo estimate for a threshold policy.
    Simulate,
    /// Canned studies: reward sweep, critical-reward curve, capacity table.
    ReproducePaper,
}

#[derive(Debug, Parser)]
#[command(name = "flexq", version, about = "Admission and two-speed service control for the M/M/1 queue")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (`key = value` per line).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Simulation seed (same as `--set sim.seed=N`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Value-iteration tolerance (same as `--set solver.tol=X`).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Initial truncation (same as `--set truncation.x_max=N`).
    #[arg(long, global = true)]
    xmax: Option<usize>,
}

/// Everything a run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: Command,
    pub config_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// `key=value` pairs applied after the file, in order.
    pub overrides: Vec<String>,
}

impl RunManifest {
    pub fn new(command: Command, output_dir: impl Into<PathBuf>) -> Self {
        Self { command, config_path: None, output_dir: output_dir.into(), overrides: Vec::new() }
    }

    pub fn with_config(mut self, path: impl Into<PathBuf>) -> Self {
        self.config_path = Some(path.into());
        self
    }

    pub fn with_override(mut self, spec: impl Into<String>) -> Self {
        self.overrides.push(spec.into());
        self
    }

    /// Parses command-line arguments (including the program name).
    pub fn from_args<I, T>(args: I) -> std::result::Result<Self, clap::Error>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let cli = Cli::try_parse_from(args)?;
        let mut overrides = cli.overrides;
        if let Some(seed) = cli.seed {
            overrides.push(format!("sim.seed={seed}"));
        }
        if let Some(tol) = cli.tol {
            overrides.push(format!("solver.tol={tol}"));
        }
        if let Some(x) = cli.xmax {
            overrides.push(format!("truncation.x_max={x}"));
        }
        Ok(Self { command: cli.command, config_path: cli.config, output_dir: cli.out, overrides })
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } | Error::InvalidHoldingCost(_) => EXIT_CONFIG,
        Error::NonConvexCost { .. } | Error::InvalidTruncation(_) | Error::InvalidSimConfig(_) => EXIT_CONFIG,
        Error::InvalidScan(_) | Error::PolicyOutOfRange(_) => EXIT_CONFIG,
        Error::Io(_) | Error::Csv(_) => EXIT_IO,
        _ => EXIT_NUMERIC,
    }
}

/// Runs one command, printing results to `stdout` and diagnostics to
/// `stderr`. Returns the process exit code.
pub fn run(manifest: &RunManifest, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match execute(manifest, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Parses `args` and runs; what the `flexq` binary does.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match RunManifest::from_args(args) {
        Ok(m) => run(&m, &mut std::io::stdout().lock(), &mut std::io::stderr().lock()),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_OK
            }
        }
    }
}

fn load_config(manifest: &RunManifest) -> Result<Config> {
    let mut cfg = match &manifest.config_path {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
            Config::parse(&text)?
        }
        None => Config::default(),
    };
    for spec in &manifest.overrides {
        cfg.apply_override(spec)?;
    }
    Ok(cfg)
}

fn solve_options(cfg: &Config) -> Result<SolveOptions, ConfigError> {
    let d = SolveOptions::default();
    Ok(SolveOptions {
        tol: cfg.get_or("solver.tol", d.tol)?,
        max_iters: cfg.get_or("solver.max_iters", d.max_iters)?,
        max_x_max: cfg.get_or("solver.max_x_max", d.max_x_max)?,
    })
}

fn horizon(cfg: &Config) -> Result<HorizonSpec, ConfigError> {
    let raw: String = cfg.get_or("solver.horizon", "inf".to_string())?;
    if raw == "inf" || raw == "infinite" {
        return Ok(HorizonSpec::Infinite);
    }
    raw.parse::<usize>().map(HorizonSpec::Steps).map_err(|_| ConfigError::InvalidValue {
        key: "solver.horizon".into(),
        location: crate::config::Location::Override,
        message: format!("expected `inf` or a number of transitions, got `{raw}`"),
    })
}

fn flex_options(cfg: &Config) -> Result<FlexibilityOptions, ConfigError> {
    Ok(FlexibilityOptions { horizon: horizon(cfg)?, solve: solve_options(cfg)? })
}

fn metadata(cfg: &Config, command: &str) -> Vec<String> {
    let mut m = vec![format!("command = {command}")];
    m.extend(cfg.resolved_lines());
    // Defaults that were not spelled out in the configuration.
    if let (Ok(t), Ok(o)) = (cfg.truncation(), flex_options(cfg)) {
        for line in report::solver_metadata(&t, &o) {
            let key = line.split(" = ").next().unwrap_or_default();
            if !cfg.contains(key) {
                m.push(line);
            }
        }
    }
    m
}

fn write_file(dir: &Path, name: &str, bytes: Vec<u8>) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), bytes)?;
    Ok(())
}

fn verdict_line(policy: &ThresholdPolicy) -> &'static str {
    match Verdict::of(policy) {
        Verdict::FlexValueless => "flex=valueless Bs>=Bd+1",
        Verdict::FlexActive => "flex=active Bs<=Bd",
    }
}

struct Setup {
    cfg: Config,
    model: ModelParams,
    trunc: TruncationSpec,
}

fn setup(manifest: &RunManifest) -> Result<Setup> {
    let cfg = load_config(manifest)?;
    let model = cfg.model_params()?;
    let trunc = cfg.truncation()?;
    Ok(Setup { cfg, model, trunc })
}

fn execute(manifest: &RunManifest, out: &mut dyn Write) -> Result<i32> {
    let dir = &manifest.output_dir;
    match manifest.command {
        Command::ReproducePaper => {
            let cfg = load_config(manifest)?;
            let trunc = cfg.truncation()?;
            let rep = report::reproduce_published(dir, &trunc, &solve_options(&cfg)?)?;
            out.write_all(rep.summary.as_bytes())?;
            return Ok(if rep.mismatches.is_empty() { EXIT_OK } else { EXIT_MISMATCH });
        }
        Command::Solve => {
            let s = setup(manifest)?;
            let opts = flex_options(&s.cfg)?;
            let sol = solve(&s.model, &s.trunc, Variant::Combined, opts.horizon, &opts.solve)?;
            writeln!(out, "{}", sol.policy)?;
            writeln!(out, "x_max={}", sol.truncation.x_max)?;
            writeln!(out, "v(0,0)={}", fmt_real(sol.values.value(0, 0)))?;
            writeln!(out, "{}", verdict_line(&sol.policy))?;
            let ties = near_ties(&sol.values, &s.model, sol.truncation.interior_limit(), opts.solve.tol);
            if !ties.is_empty() {
                writeln!(out, "warning: burden within 10*tol of a decision level at x = {ties:?}")?;
            }
            let mut meta = metadata(&s.cfg, "solve");
            meta.push(format!("thresholds = {}", sol.policy));
            meta.push(format!("x_max = {}", sol.truncation.x_max));
            if sol.values.extrapolated_cost {
                meta.push("holding cost extrapolated past the end of the table".into());
            }
            let mut buf = Vec::new();
            for line in &meta {
                writeln!(buf, "# {line}")?;
            }
            sol.values.write_csv(&mut buf)?;
            write_file(dir, "values.csv", buf)?;
        }
        Command::Flexibility => {
            let s = setup(manifest)?;
            let rep = flexibility(&s.model, &s.trunc, &flex_options(&s.cfg)?)?;
            writeln!(out, "{}", rep.thresholds_combined)?;
            writeln!(out, "Bd_hat={}", rep.threshold_admission_only)?;
            let label = if rep.relative_is_absolute { "abs_flex" } else { "rel_flex" };
            writeln!(out, "{label}={}", fmt_real(rep.relative_at_origin))?;
            writeln!(out, "{}", verdict_line(&rep.thresholds_combined))?;
            let violations = rep.violations(&s.model);
            if !violations.is_empty() {
                writeln!(out, "warning: {} structural violations, first {}", violations.len(), violations[0])?;
            }
            let mut meta = metadata(&s.cfg, "flexibility");
            meta.push(format!("thresholds = {} Bd_hat={}", rep.thresholds_combined, rep.threshold_admission_only));
            let rows: Vec<Vec<String>> = (0..rep.epsilon_departure.len())
                .flat_map(|x| {
                    (0..2u8).map(move |i| (x, i))
                })
                .map(|(x, i)| vec![x.to_string(), i.to_string(), format!("{:.12}", rep.epsilon(x, i))])
                .collect();
            let mut buf = Vec::new();
            write_table(&mut buf, &meta, &["x", "i", "epsilon"], &rows)?;
            write_file(dir, "epsilon.csv", buf)?;
        }
        Command::Sweep => {
            let s = setup(manifest)?;
            let axis_name: String = s.cfg.get("sweep.axis")?;
            let axis: SweepAxis = axis_name.parse().map_err(|message| ConfigError::InvalidValue {
                key: "sweep.axis".into(),
                location: crate::config::Location::Override,
                message,
            })?;
            let values = s.cfg.get_list("sweep.values")?;
            let rows = sweep(&s.model, axis, &values, &s.trunc, &flex_options(&s.cfg)?);
            let failed = rows.iter().filter(|r| r.1.is_err()).count();
            let mut buf = Vec::new();
            report::write_sweep(&mut buf, &metadata(&s.cfg, "sweep"), axis, &rows)?;
            write_file(dir, "sweep.csv", buf)?;
            writeln!(out, "rows={} failed={failed}", rows.len())?;
            if failed > 0 {
                return Ok(EXIT_NUMERIC);
            }
        }
        Command::CriticalR => {
            let mut cfg = load_config(manifest)?;
            // The reward is scanned, so it need not be configured.
            if !cfg.contains("reward") {
                cfg.set("reward", 0);
            }
            let model = cfg.model_params()?;
            let trunc = cfg.truncation()?;
            let ratio = model.cost_per_extra_rate();
            let r_min = cfg.get_or("critical.r_min", 0.0)?;
            let r_max = cfg.get_or("critical.r_max", 2.0 * ratio + 4.0)?;
            let resolution = cfg.get_or("critical.resolution", 1e-3)?;
            let cr = critical_reward(&model, r_min, r_max, resolution, &trunc, &flex_options(&cfg)?)?;
            writeln!(out, "c_over_delta={}", fmt_real(ratio))?;
            writeln!(out, "R_tilde in [{}, {}]", fmt_real(cr.r_tilde_low), fmt_real(cr.r_tilde_high))?;
            if !cr.single_crossing {
                writeln!(out, "warning: verdict changed more than once over the scan")?;
            }
            let meta = metadata(&cfg, "critical-r");
            let mut buf = Vec::new();
            write_table(
                &mut buf,
                &meta,
                &["c_over_delta", "R_tilde_low", "R_tilde_high"],
                &[vec![ratio.to_string(), fmt_real(cr.r_tilde_low), fmt_real(cr.r_tilde_high)]],
            )?;
            write_file(dir, "critical_r.csv", buf)?;
            let scan: Vec<Vec<String>> =
                cr.scan.iter().map(|(r, v)| vec![fmt_real(*r), v.to_string()]).collect();
            let mut buf = Vec::new();
            write_table(&mut buf, &meta, &["R", "verdict"], &scan)?;
            write_file(dir, "critical_scan.csv", buf)?;
        }
        Command::Average => {
            let s = setup(manifest)?;
            let res = average_reward(&s.model, &s.trunc, &average_options(&s.cfg)?)?;
            writeln!(out, "g*={}", fmt_real(res.g_star))?;
            writeln!(out, "{}", res.policy)?;
            writeln!(out, "stages={} final_beta={:e}", res.beta_sequence.len(), res.beta_sequence.last().unwrap())?;
            writeln!(
                out,
                "certificate violation={:e} gap={:e}",
                res.certificate.inequality_violation, res.certificate.greedy_gap
            )?;
            let meta = metadata(&s.cfg, "average");
            let trace: Vec<Vec<String>> = (0..res.beta_sequence.len())
                .map(|n| {
                    vec![
                        format!("{:e}", res.beta_sequence[n]),
                        format!("{:.9}", res.g_trace[n]),
                        format!("{:e}", res.spread_trace[n]),
                        res.threshold_trace[n].service.to_string(),
                        res.threshold_trace[n].admission.to_string(),
                    ]
                })
                .collect();
            let mut buf = Vec::new();
            write_table(&mut buf, &meta, &["beta", "g", "spread", "Bs", "Bd"], &trace)?;
            write_file(dir, "average_trace.csv", buf)?;
            let rows: Vec<Vec<String>> = (0..res.relative_departure.len())
                .flat_map(|x| (0..2u8).map(move |i| (x, i)))
                .map(|(x, i)| vec![x.to_string(), i.to_string(), format!("{:.9}", res.relative_value(x, i))])
                .collect();
            let mut buf = Vec::new();
            write_table(&mut buf, &meta, &["x", "i", "w"], &rows)?;
            write_file(dir, "relative_values.csv", buf)?;
        }
        Command::Simulate => return simulate_command(manifest, out),
    }
    Ok(EXIT_OK)
}

fn average_options(cfg: &Config) -> Result<AverageOptions, ConfigError> {
    let d = AverageOptions::default();
    Ok(AverageOptions {
        beta0: cfg.get_or("average.beta0", d.beta0)?,
        shrink: cfg.get_or("average.shrink", d.shrink)?,
        stop_tol: cfg.get_or("average.stop_tol", d.stop_tol)?,
        spread_tol: cfg.get_or("average.spread_tol", d.spread_tol)?,
        max_stages: cfg.get_or("average.max_stages", d.max_stages)?,
        solve: solve_options(cfg)?,
    })
}

fn simulate_command(manifest: &RunManifest, out: &mut dyn Write) -> Result<i32> {
    let s = setup(manifest)?;
    let cfg = &s.cfg;
    let mode: String = cfg.get_or("sim.mode", "discounted".to_string())?;
    let seed: u64 = cfg.get_or("sim.seed", 1)?;
    let reps: usize = cfg.get_or("sim.replications", 10_000)?;
    let x0: usize = cfg.get_or("sim.x0", 0)?;
    let i0: u8 = cfg.get_or("sim.i0", 0)?;
    let explicit = cfg.contains("sim.policy.bs") || cfg.contains("sim.policy.bd");
    let policy = if explicit {
        let bs: Threshold = cfg.get_or("sim.policy.bs", Threshold::Unbounded)?;
        let bd: Threshold = cfg.get("sim.policy.bd")?;
        ThresholdPolicy::new(bs, bd)
    } else if mode == "average" {
        average_reward(&s.model, &s.trunc, &average_options(cfg)?)?.policy
    } else {
        let opts = flex_options(cfg)?;
        solve(&s.model, &s.trunc, Variant::Combined, opts.horizon, &opts.solve)?.policy
    };
    let sim_cfg = match mode.as_str() {
        "discounted" => SimConfig::discounted(seed, reps, cfg.get_or("sim.epsilon_tail", 1e-6)?),
        "average" => SimConfig::time_average(seed, reps, cfg.get_or("sim.T", 1000.0)?),
        other => {
            return Err(ConfigError::InvalidValue {
                key: "sim.mode".into(),
                location: crate::config::Location::Override,
                message: format!("expected discounted or average, got `{other}`"),
            }
            .into())
        }
    }
    .with_initial_state(x0, i0);
    let est = if mode == "average" {
        simulate_average(&policy, &s.model, &sim_cfg)?
    } else {
        simulate_discounted(&policy, &s.model, &sim_cfg)?
    };
    writeln!(out, "# policy {policy}")?;
    writeln!(out, "mean,half_width,reps")?;
    writeln!(out, "{:.9},{:.9},{}", est.mean, est.half_width_95, est.replications_used)?;
    if cfg.get_or("sim.trace", false)? {
        if mode == "average" {
            return Err(Error::InvalidSimConfig("traces are only written for discounted runs".into()));
        }
        let events = trace_discounted(&policy, &s.model, &sim_cfg)?;
        let mut buf = Vec::new();
        for line in metadata(cfg, "simulate") {
            writeln!(buf, "# {line}")?;
        }
        write_trace(&events, &mut buf)?;
        write_file(&manifest.output_dir, "trace.csv", buf)?;
    }
    Ok(EXIT_OK)
}
