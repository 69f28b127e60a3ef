//! The `lab` command line: scenario runs and one-off pipelines.

pub mod config;
pub mod output;
pub mod run;

pub use config::{Check, ConfigError, Scenario};
pub use run::{run, run_checks, RunError, RunManifest, Verdict};

use crate::asymptotics::{diag_series, trace_series, DiagSetup};
use crate::kernels::{eigenvalue_cluster, Tolerance};
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "lab", version, about = "Directional trace formula laboratory for toric models")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "LAB_THREADS")]
    pub threads: Option<usize>,
    /// Truncation tolerance; overrides the config's `tol`.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct OutFile {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every check in a scenario and write CSV, verdicts and manifest.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Eigenvalue cluster near `lambda * beta` as CSV.
    Spectrum {
        config: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        radius: f64,
        #[command(flatten)]
        out: OutFile,
    },
    /// Smoothed projector diagonal over the lambda grid at every configured point.
    Project {
        config: PathBuf,
        #[command(flatten)]
        out: OutFile,
    },
    /// Trace transform over the lambda grid at the configured `s0`.
    Trace {
        config: PathBuf,
        #[command(flatten)]
        out: OutFile,
    },
    /// Run the checks and emit only the verdict JSON.
    Verify {
        config: PathBuf,
        #[command(flatten)]
        out: OutFile,
    },
    /// Power-law fit of a CSV with a `lambda` column.
    Fit {
        csv: PathBuf,
        /// Value column; defaults to ln_abs, then abs, then value.
        #[arg(long)]
        column: Option<String>,
        #[command(flatten)]
        out: OutFile,
    },
}

fn emit(out: &OutFile, bytes: &[u8]) -> Result<(), RunError> {
    match &out.out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| RunError::Io(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(bytes).map_err(|e| RunError::Io(e.to_string())),
    }
}

fn load(config: &Path, tol: Option<f64>) -> Result<config::Prepared, RunError> {
    Ok(Scenario::from_path(config)?.prepare(tol)?)
}

fn execute(cli: &Cli) -> Result<i32, RunError> {
    match &cli.command {
        Command::Run { config, out } => {
            let manifest = run(config, out, cli.tol)?;
            for v in &manifest.verdicts {
                eprintln!("{} {} measured={} predicted={}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.measured, v.predicted);
            }
            Ok(if manifest.all_pass() { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Spectrum { config, lambda, radius, out } => {
            let p = load(config, cli.tol)?;
            let entries = eigenvalue_cluster(&p.model, &p.cutoff, &p.scenario.beta, *lambda, *radius)?;
            emit(out, &output::spectrum_csv(&entries, p.model.n_factors(), p.model.r))?;
            Ok(EXIT_OK)
        }
        Command::Project { config, out } => {
            let p = load(config, cli.tol)?;
            let grid = p.scenario.lambda_grid.values();
            let mut series = Vec::new();
            for (j, x) in p.points.iter().enumerate() {
                let setup = DiagSetup {
                    model: &p.model,
                    cutoff: &p.cutoff,
                    beta: &p.scenario.beta,
                    s0: &p.scenario.s0,
                    point: x,
                    tol: Tolerance::Relative(p.scenario.tol),
                };
                series.push((j, diag_series(&setup, &grid)?));
            }
            let points = &p.points;
            let rows: Vec<_> = series
                .iter()
                .flat_map(|(j, s)| s.iter().map(move |sp| (*j, points[*j].s.as_slice(), sp)))
                .collect();
            emit(out, &output::project_csv(&rows, p.model.d))?;
            Ok(EXIT_OK)
        }
        Command::Trace { config, out } => {
            let p = load(config, cli.tol)?;
            let sc = &p.scenario;
            let series = trace_series(
                &p.model,
                &p.cutoff,
                &sc.beta,
                &sc.s0,
                &sc.lambda_grid.values(),
                Tolerance::Absolute(sc.tol),
            )?;
            emit(out, &output::series_csv(&series, None))?;
            Ok(EXIT_OK)
        }
        Command::Verify { config, out } => {
            let p = load(config, cli.tol)?;
            let (verdicts, _) = run_checks(&p);
            emit(out, &run::verdicts_json(&p.scenario.digest(), &verdicts))?;
            Ok(if verdicts.iter().all(|v| v.pass) { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
        Command::Fit { csv, column, out } => {
            let report = output::fit_csv(csv, column.as_deref())?;
            let mut bytes = serde_json::to_vec_pretty(&report).expect("fit report serializes");
            bytes.push(b'\n');
            emit(out, &bytes)?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses arguments, runs the command on a pool of the requested size and
/// returns the process exit code.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
