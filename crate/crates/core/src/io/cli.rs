//! `evac validate | run | sweep`.
//!
//! Exit codes: 0 success, 1 validation or parse failure, 2 runtime failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::engine::{run_with, RunError, RunOptions, SimRun};
use crate::io::output::write_run;
use crate::io::scenario::parse_scenario;
use crate::model::{validate_scenario, ParamKey, ScenarioSpec};
use crate::spatial::compute_nav_field;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const SWEEP_SUMMARY_HEADER: &str =
    "param,value,seed,evacuation_time,exited,mean_panic,max_panic,mean_strength_frac,mean_speed";

#[derive(Debug, Parser)]
#[command(name = "evac", version, about = "Crowd evacuation with panic contagion and strength consumption")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scenario file and print the validation report.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Simulate one scenario and write its outputs.
    Run(RunArgs),
    /// Run a grid of (parameter value, seed) combinations.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "max-time")]
    max_time: Option<f64>,
    #[arg(long = "output-every")]
    output_every: Option<u64>,
    /// Worker threads for the per-agent stages.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Also write the navigation distance matrix to nav-dist.txt.
    #[arg(long = "dump-nav")]
    dump_nav: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    param: String,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
}

/// Parses `args` (including the program name) and executes the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Validate { scenario } => cmd_validate(&scenario, out),
        Command::Run(a) => cmd_run(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure { code, message }) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::ValidationFailed(_) | RunError::Navigation(_) => Failure::invalid(e.to_string()),
            RunError::Placement(_) | RunError::Step(_) => Failure::runtime(e.to_string()),
        }
    }
}

fn read_spec(path: &Path) -> Result<ScenarioSpec, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn check(spec: &ScenarioSpec) -> Result<(), Failure> {
    let report = validate_scenario(spec);
    if report.is_ok() {
        Ok(())
    } else {
        Err(Failure::invalid(format!("scenario failed validation:\n{report}")))
    }
}

fn cmd_validate(path: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let spec = read_spec(path)?;
    let report = validate_scenario(&spec);
    let _ = write!(out, "{report}");
    if report.is_ok() {
        let _ = writeln!(
            out,
            "ok: {} agents, {} exits, {} warnings",
            spec.population(),
            spec.exits.len(),
            report.warnings.len()
        );
        Ok(())
    } else {
        Err(Failure::invalid(format!("{} validation error(s)", report.errors.len())))
    }
}

fn save(run: &SimRun, dir: &Path) -> Result<(), Failure> {
    write_run(run, dir).map_err(|e| Failure::runtime(e.to_string()))
}

fn cmd_run(a: RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut spec = read_spec(&a.scenario)?;
    if let Some(seed) = a.seed {
        spec.sim.seed = seed;
    }
    if let Some(dt) = a.dt {
        spec.sim.dt = dt;
    }
    if let Some(t) = a.max_time {
        spec.sim.max_time = t;
    }
    if let Some(k) = a.output_every {
        spec.sim.output_every = k;
    }
    check(&spec)?;
    let run = run_with(&spec, RunOptions { workers: a.workers.max(1) })?;
    save(&run, &a.out)?;
    if a.dump_nav {
        let nav = compute_nav_field(&spec).map_err(|e| Failure::invalid(e.to_string()))?;
        let path = a.out.join("nav-dist.txt");
        fs::write(&path, nav.dump_dist()).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
    }
    let last = run.metrics.final_tick().expect("series holds the initial tick");
    let _ = writeln!(
        out,
        "ticks={} exited={}/{} evacuation_time={}",
        run.final_frame().tick,
        last.exited,
        run.final_frame().agents.len(),
        run.metrics.evacuation_time
    );
    Ok(())
}

fn cmd_sweep(a: SweepArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let base = read_spec(&a.scenario)?;
    let key = ParamKey::from_name(&a.param).ok_or_else(|| Failure::invalid(format!("unknown parameter `{}`", a.param)))?;
    let seeds = if a.seeds.is_empty() { vec![base.sim.seed] } else { a.seeds.clone() };

    let mut cells = Vec::new();
    for token in &a.values {
        let token = token.trim();
        let value: f64 = token
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Failure::invalid(format!("bad value `{token}` for --values")))?;
        for &seed in &seeds {
            let mut spec = base.clone();
            spec.params.insert(key, value);
            spec.sim.seed = seed;
            check(&spec).map_err(|f| Failure::invalid(format!("{}={token} seed={seed}: {}", a.param, f.message)))?;
            cells.push((token.to_string(), seed, spec));
        }
    }

    let results: Vec<Result<SimRun, Failure>> = cells
        .par_iter()
        .map(|(token, seed, spec)| {
            let run = run_with(spec, RunOptions::default())?;
            let dir = a.out.join(format!("{}={token}", a.param)).join(format!("seed={seed}"));
            save(&run, &dir)?;
            Ok(run)
        })
        .collect();

    let mut summary = String::from(SWEEP_SUMMARY_HEADER);
    summary.push('\n');
    for ((token, seed, _), res) in cells.iter().zip(results) {
        let run = res?;
        let m = run.metrics.final_tick().expect("series holds the initial tick");
        let evac = if run.metrics.evacuation_time.is_finite() {
            format!("{:.6}", run.metrics.evacuation_time)
        } else {
            "inf".to_string()
        };
        let _ = writeln!(
            summary,
            "{},{token},{seed},{evac},{},{:.6},{:.6},{:.6},{:.6}",
            a.param, m.exited, m.mean_panic, m.max_panic, m.mean_strength_frac, m.mean_speed
        );
    }
    fs::create_dir_all(&a.out).map_err(|e| Failure::runtime(format!("{}: {e}", a.out.display())))?;
    let path = a.out.join("sweep-summary.csv");
    fs::write(&path, summary).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
    let _ = writeln!(out, "{} runs written to {}", cells.len(), a.out.display());
    Ok(())
}
