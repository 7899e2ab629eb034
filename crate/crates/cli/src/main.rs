//! `cylstokes <command> --config <path> [--seed N] [--out DIR]`
//!
//! Exit status: 0 on success, 1 on usage or I/O errors, 2 when a measured
//! invariant is out of tolerance. `CYLSTOKES_THREADS` sets the worker count.

mod artifacts;
mod config;
mod error;
mod linear;
mod picard;
mod regression;
mod regularity;
mod sweeps;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::artifacts::{write_manifest, Artifacts, Report};
use crate::config::{CommandName, Common};
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "cylstokes", version, about = "Run a cylindrical Stokes experiment")]
struct Cli {
    command: CommandName,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory of the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

const THREADS_VAR: &str = "CYLSTOKES_THREADS";

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR}={value} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

/// Failed checks of a run, as `metric = value (relation limit)`.
pub type Failures = Vec<String>;

fn experiment<T>(
    name: CommandName,
    path: &Path,
    seed: Option<u64>,
    out: Option<&Path>,
    body: fn(&T, &mut Artifacts) -> Result<Report, CliError>,
) -> Result<Failures, CliError>
where
    T: DeserializeOwned + Serialize + Common,
{
    let start = Instant::now();
    let cfg: T = config::load(path, name, seed, out)?;
    let dir = cfg
        .output_dir()
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set output_dir".into()))?
        .to_path_buf();
    let mut artifacts = Artifacts::create(&dir)?;
    let report = body(&cfg, &mut artifacts)?;
    report.write(name.as_str(), &mut artifacts)?;
    let echo = serde_json::to_value(&cfg).map_err(|e| CliError::parse(path, e.to_string()))?;
    write_manifest(&artifacts, name.as_str(), &echo, &report, start.elapsed().as_secs_f64())?;
    Ok(report
        .failures()
        .iter()
        .map(|c| format!("{} = {:e} ({} {:e})", c.metric, c.value, c.relation, c.limit))
        .collect())
}

pub fn execute(name: CommandName, path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<Failures, CliError> {
    match name {
        CommandName::ResolventSweep2d => experiment(name, path, seed, out, sweeps::resolvent_sweep_2d),
        CommandName::ResolventSweep3d => experiment(name, path, seed, out, sweeps::resolvent_sweep_3d),
        CommandName::HelmholtzCheck => experiment(name, path, seed, out, linear::helmholtz_check),
        CommandName::SemigroupDecay => experiment(name, path, seed, out, linear::semigroup_decay),
        CommandName::Holder => experiment(name, path, seed, out, linear::holder),
        CommandName::FracPower => experiment(name, path, seed, out, linear::frac_power),
        CommandName::Embedding => experiment(name, path, seed, out, linear::embedding),
        CommandName::Picard => experiment(name, path, seed, out, picard::picard),
        CommandName::Regularity => experiment(name, path, seed, out, regularity::regularity),
        CommandName::Regression => regression::run(path, seed, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match execute(cli.command, &cli.config, cli.seed, cli.out.as_deref()) {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            for f in &failures {
                eprintln!("verification failed: {f}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
