//! Command-line front end: `run`, `describe` and `list-experiments`.
//!
//! `run` writes one directory per run:
//!
//! ```text
//! <out>/report.json     schema-tagged rows and verdicts (deterministic)
//! <out>/metadata.json   timestamp, wall-clock time, worker count
//! <out>/summary.txt     the text summary also printed to stdout
//! <out>/tables/*.csv    plot-ready tables
//! ```
//!
//! Exit status: 0 when every binding verdict passes, 1 when one fails, 2 for
//! configuration errors, ineligible specs and any other failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use crate::config::{read_spec_file, RunConfig};
use crate::error::{Error, Result};
use crate::model::{SlowlyVarying, SubordinatorSpec};
use crate::potential::{potential_band, potential_best};
use crate::verify::{ExperimentReport, EXPERIMENTS};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "subcover", version, about = "Covering numbers of subordinator ranges")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for replica-parallel sections; never changes results.
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (default: the configuration's `out`, else `runs/<experiment>-seed<seed>`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print Φ, eligibility, regular variation and the potential band for a spec file.
    Describe {
        /// Spec file (or a run configuration containing a `[spec]` table).
        #[arg(long)]
        config: PathBuf,
    },
    /// List the experiments `run` accepts.
    ListExperiments,
}

/// Parses `args` and runs the command; returns the exit status.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<i32> {
    match command {
        Command::ListExperiments => {
            for (name, about) in EXPERIMENTS {
                writeln!(stdout, "{name:<16} {about}")?;
            }
            Ok(EXIT_PASS)
        }
        Command::Describe { config } => {
            let spec = describe_spec_source(&config)?;
            stdout.write_all(describe(&spec)?.as_bytes())?;
            Ok(EXIT_PASS)
        }
        Command::Run {
            config,
            seed,
            workers,
            out,
        } => {
            let mut cfg = RunConfig::from_file(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = out
                .or_else(|| cfg.out.clone())
                .unwrap_or_else(|| PathBuf::from(format!("runs/{}-seed{}", cfg.experiment, cfg.seed)));
            let outcome = run(&cfg, workers, &out)?;
            stdout.write_all(outcome.report.summary_text().as_bytes())?;
            writeln!(stdout, "artifacts: {}", out.display())?;
            Ok(outcome.exit_code())
        }
    }
}

/// A finished run.
#[derive(Debug)]
pub struct Outcome {
    pub report: ExperimentReport,
    pub wall_clock_seconds: f64,
}

impl Outcome {
    /// Exit status as a function of the verdicts alone.
    pub fn exit_code(&self) -> i32 {
        if self.report.passed() {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }
}

/// Runs `config` on `workers` threads and writes all artifacts under `out`.
pub fn run(config: &RunConfig, workers: Option<usize>, out: &Path) -> Result<Outcome> {
    let started = Instant::now();
    let report = match workers {
        Some(0) => return Err(Error::config("workers", "must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Io(format!("cannot start worker pool: {e}")))?
            .install(|| config.execute())?,
        None => config.execute()?,
    };
    let wall = started.elapsed().as_secs_f64();
    report.write_to(out)?;
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let metadata = serde_json::json!({
        "timestamp_unix": timestamp,
        "wall_clock_seconds": wall,
        "workers": workers.unwrap_or_else(rayon::current_num_threads),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": config.experiment,
        "seed": config.seed,
    });
    std::fs::write(
        out.join("metadata.json"),
        serde_json::to_string_pretty(&metadata).expect("metadata serialises"),
    )?;
    Ok(Outcome {
        report,
        wall_clock_seconds: wall,
    })
}

fn describe_spec_source(path: &Path) -> Result<SubordinatorSpec> {
    match read_spec_file(path) {
        Ok(spec) => Ok(spec),
        // a full run configuration also names a spec
        Err(first) => RunConfig::from_file(path).map(|c| c.spec).map_err(|_| first),
    }
}

/// Text description of a spec: Φ on a reference grid, eligibility, regular
/// variation and the band `[0.418, e]/Φ(1/δ)` for `U(δ)`.
pub fn describe(spec: &SubordinatorSpec) -> Result<String> {
    let mut out = String::new();
    out.push_str(&format!("spec: {}\n\n", spec.summary()));
    let report = spec.validate();
    if !report.parameter_errors.is_empty() {
        return Err(Error::InvalidParameter(report.parameter_errors.join("; ")));
    }
    out.push_str(&format!(
        "eligibility: {} ({})\n",
        if report.eligible { "eligible" } else { "not eligible" },
        report.reason
    ));
    match spec.regular_variation() {
        Some(rv) => match rv.slowly_varying {
            SlowlyVarying::Logarithmic { coefficient } if rv.index == 0.0 => out.push_str(&format!(
                "regular variation: index 0, slowly varying L(λ)=a ln λ with a = {coefficient}\n"
            )),
            sv => out.push_str(&format!("regular variation: index α = {}, {}\n", rv.index, sv.describe())),
        },
        None => out.push_str("regular variation: not declared\n"),
    }
    out.push_str("\nLaplace exponent:\n");
    out.push_str(&format!("  {:>10}  {:>14}\n", "λ", "Φ(λ)"));
    for k in -2..=6 {
        let lambda = 10f64.powi(k);
        out.push_str(&format!("  {:>10e}  {:>14.6e}\n", lambda, spec.phi(lambda)?));
    }
    out.push_str("\npotential band 0.418/Φ(1/δ) ≤ U(δ) ≤ e/Φ(1/δ):\n");
    out.push_str(&format!("  {:>8}  {:>12}  {:>12}  {:>12}  method\n", "δ", "lower", "upper", "U"));
    for k in 1..=6 {
        let delta = 10f64.powi(-k);
        let (lo, hi) = potential_band(spec, delta)?;
        let (u, method) = if report.eligible {
            match potential_best(spec, delta) {
                Ok(u) => (format!("{:.6e}", u.value), u.method.label().to_string()),
                Err(_) => ("-".into(), "monte-carlo only".into()),
            }
        } else {
            ("-".into(), "-".into())
        };
        out.push_str(&format!("  {delta:>8e}  {lo:>12.6e}  {hi:>12.6e}  {u:>12}  {method}\n"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = main_with_args(args.iter().copied(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn list_experiments() {
        let (code, out, _) = run_args(&["subcover", "list-experiments"]);
        assert_eq!(code, 0);
        for (name, _) in EXPERIMENTS {
            assert!(out.contains(name));
        }
    }

    #[test]
    fn describe_stable_and_gamma() {
        let s = describe(&SubordinatorSpec::stable(0.5)).unwrap();
        assert!(s.contains("index α = 0.5"), "{s}");
        let g = describe(&SubordinatorSpec::gamma(1.0, 1.0)).unwrap();
        assert!(g.contains("index 0, slowly varying L(λ)=a ln λ"), "{g}");
    }

    #[test]
    fn missing_file_is_exit_2() {
        let (code, _, err) = run_args(&["subcover", "describe", "--config", "/nonexistent/spec.toml"]);
        assert_eq!(code, 2);
        assert!(err.contains("error"));
        let (code, _, _) = run_args(&["subcover", "frobnicate"]);
        assert_eq!(code, 2);
    }
}
