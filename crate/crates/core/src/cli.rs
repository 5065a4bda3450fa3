//! Command-line front end.
//!
//! Exit codes: 0 success, 1 config/IO/flag errors, 2 numerical abort of a
//! flow run, 3 rejected heat-trace fit, 4 failed invariant suite.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::analysis::{maximality_sweep, SweepDirection, DEFAULT_SWEEP_EPS};
use crate::error::Error;
use crate::flow::{evolve, evolve_with, Termination};
use crate::geometry::TorusModulus;
use crate::io::{self, RunConfig};
use crate::spectral::{det_report, eigenvalues};
use crate::verify::{run_suite, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_FIT_REJECTED: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "torus-ricci", version, about = "Normalized Ricci flow and log det of the Laplacian on tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Polyakov,
    Zeta,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the flow from a config and write the diagnostic CSV.
    Flow {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write a metric snapshot at every recorded sample.
        #[arg(long)]
        snapshots: Option<PathBuf>,
        /// Overrides init.seed of a random start.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a determinant report for a metric snapshot as JSON.
    Det {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long, value_enum, default_value = "polyakov")]
        method: Method,
        #[arg(long = "K", default_value_t = 400)]
        k: usize,
    },
    /// Print the low spectrum of a metric snapshot as JSON.
    Spectrum {
        #[arg(long)]
        metric: PathBuf,
        #[arg(long = "K", default_value_t = 50)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Maximality sweep along a Fourier mode or a seeded field.
    Sweep {
        #[arg(long, value_parser = parse_mode, conflicts_with = "seed")]
        mode: Option<(i64, i64)>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 4)]
        bandlimit: usize,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, value_delimiter = ',', num_args = 1, default_value = "0,1")]
        tau: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        volume: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant suite and print a pass/fail table.
    Verify {
        /// Directory of run configs used for the seeded flow checks.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, hide = true, default_value_t = 1.0)]
        rate_coefficient_scale: f64,
    },
}

fn parse_mode(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected m,n, got {s:?}"))?;
    let m = a.trim().parse::<i64>().map_err(|e| e.to_string())?;
    let n = b.trim().parse::<i64>().map_err(|e| e.to_string())?;
    if m == 0 && n == 0 {
        return Err("mode must not be 0,0".into());
    }
    Ok((m, n))
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::FitRejected { .. } => EXIT_FIT_REJECTED,
        Error::StepUnderflow { .. } | Error::NonFiniteStep { .. } | Error::IterationFailure { .. } => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_INPUT;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Error> {
    match cmd {
        Command::Flow { config, out: csv, snapshots, seed } => cmd_flow(config, csv, snapshots, seed, out, err),
        Command::Det { metric, method, k } => {
            let m = io::read_snapshot(&metric)?;
            let zeta = matches!(method, Method::Zeta).then_some(k);
            let report = det_report(&m, zeta)?;
            let mut value = serde_json::to_value(&report).expect("report serializes");
            value["method"] = serde_json::json!(match method {
                Method::Polyakov => "polyakov",
                Method::Zeta => "zeta",
            });
            value["logdet"] = serde_json::json!(report.logdet_zeta.unwrap_or(report.logdet_polyakov));
            let _ = writeln!(out, "{value}");
            Ok(EXIT_OK)
        }
        Command::Spectrum { metric, k, out: path } => {
            let m = io::read_snapshot(&metric)?;
            let s = eigenvalues(&m, k)?;
            let text = serde_json::to_string(&s).expect("spectrum serializes");
            match path {
                Some(p) => io::write_text(&p, &(text + "\n"))?,
                None => {
                    let _ = writeln!(out, "{text}");
                }
            }
            Ok(EXIT_OK)
        }
        Command::Sweep { mode, seed, bandlimit, eps, n, tau, volume, out: path } => {
            let direction = match (mode, seed) {
                (Some((m, k)), _) => SweepDirection::Mode { m, k },
                (None, Some(seed)) => SweepDirection::Seeded { seed, bandlimit },
                (None, None) => return Err(Error::config("--mode", "one of --mode or --seed is required")),
            };
            if tau.len() != 2 {
                return Err(Error::config("--tau", "expected re,im"));
            }
            let tau = TorusModulus::new(tau[0], tau[1]).map_err(|e| Error::config("--tau", e.to_string()))?;
            if n < 8 || !n.is_power_of_two() {
                return Err(Error::config("--n", "must be a power of two >= 8"));
            }
            let mut eps_list = vec![0.0];
            eps_list.extend(eps.unwrap_or_else(|| DEFAULT_SWEEP_EPS.to_vec()));
            eps_list.dedup();
            let r = maximality_sweep(&direction, &eps_list, tau, n, volume)?;
            io::write_text(&path, &io::sweep_to_csv(&r))?;
            if !r.flat_is_maximum {
                let _ = writeln!(err, "warning: a perturbed row is not below the flat value");
            }
            Ok(EXIT_OK)
        }
        Command::Verify { corpus, rate_coefficient_scale } => {
            let opts = VerifyOptions { corpus, rate_coefficient_scale };
            let rows = run_suite(&opts)?;
            let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
            for r in &rows {
                let tag = if r.passed { "PASS" } else { "FAIL" };
                let _ = writeln!(out, "{tag}  {:<width$}  {}", r.name, r.detail);
            }
            Ok(if rows.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_INVARIANT })
        }
    }
}

fn cmd_flow(
    config: PathBuf,
    csv: PathBuf,
    snapshots: Option<PathBuf>,
    seed: Option<u64>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Error> {
    let mut cfg = RunConfig::load(&config)?;
    if let Some(seed) = seed {
        cfg.init.seed = Some(seed);
        cfg.validate()?;
    }
    let metric = cfg.initial_metric()?;
    let traj = match &snapshots {
        None => evolve(&metric, &cfg.flow)?,
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let mut index = 0usize;
            evolve_with(&metric, &cfg.flow, |state| {
                io::write_snapshot(&dir.join(format!("snapshot_{index:06}.json")), &state.metric)?;
                index += 1;
                Ok(())
            })?
        }
    };
    io::write_text(&csv, &io::diagnostics_to_csv(&traj.samples))?;
    if let Termination::StepUnderflow = traj.termination {
        let _ = writeln!(err, "flow aborted: {}", traj.abort.as_deref().unwrap_or("step underflow"));
        return Ok(EXIT_NUMERICAL);
    }
    if cfg.det.zeta_route {
        let report = det_report(&traj.final_state.metric, Some(cfg.det.k))?;
        let _ = writeln!(out, "{}", serde_json::to_string(&report).expect("report serializes"));
    }
    Ok(EXIT_OK)
}
