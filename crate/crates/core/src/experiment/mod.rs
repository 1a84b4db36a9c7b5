//! Experiment drivers behind the command-line interface: Monte-Carlo runs of
//! the precoder designs, channel-variation sweeps, the rate benchmark and the
//! property suite.

pub mod check;
pub mod config;
pub mod montecarlo;
pub mod quadratic;

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub use check::{run_checks, CheckOptions, CheckOutcome};
pub use config::{ExperimentConfig, Mode, Variant};
pub use montecarlo::{run_monte_carlo, run_sweep, write_sweep, MonteCarloResult, Summary, SweepRow};
pub use quadratic::{write_rate, RateBenchmark, RateResult};

/// Fraction of excluded runs above which a command reports failure.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.05;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const INFEASIBLE_CONFIG: i32 = 2;
    pub const TOO_MANY_EXCLUDED: i32 = 3;
}

/// Exit code for an error that aborted a command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => exit::INFEASIBLE_CONFIG,
        _ => exit::FAILURE,
    }
}

/// Exit code once all runs finished.
pub fn exclusion_exit_code(excluded: usize, total: usize) -> i32 {
    if excluded == 0 {
        exit::OK
    } else if (excluded as f64) < MAX_EXCLUDED_FRACTION * total as f64 {
        log::warn!("{excluded} of {total} runs were excluded");
        exit::OK
    } else {
        log::error!("{excluded} of {total} runs were excluded");
        exit::TOO_MANY_EXCLUDED
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_hash: Option<String>,
    pub seed: u64,
    pub runs: usize,
    pub excluded: Vec<usize>,
}

impl Manifest {
    pub fn new(command: &str, config: Option<&ExperimentConfig>, seed: u64) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config.map(ExperimentConfig::hash),
            seed,
            runs: 0,
            excluded: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(dir.join("manifest.toml"), text)?;
        Ok(())
    }
}

fn create(dir: &Path, name: &str) -> Result<fs::File> {
    Ok(fs::File::create(dir.join(name))?)
}

/// Runs the Monte-Carlo experiment and writes one file per series, `aggregate.csv`,
/// the resolved configuration and the manifest. Returns the result and the exit code.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<(MonteCarloResult, i32)> {
    fs::create_dir_all(out)?;
    let res = run_monte_carlo(cfg)?;
    for (k, name) in res.series.iter().enumerate() {
        res.write_series(k, create(out, &format!("{name}.csv"))?)?;
    }
    res.write_aggregate(create(out, "aggregate.csv")?)?;
    fs::write(out.join("config.toml"), cfg.to_toml())?;
    let mut m = Manifest::new("run", Some(cfg), cfg.experiment.seed);
    m.runs = res.runs.len();
    m.excluded = res.excluded.iter().map(|e| e.0).collect();
    m.write(out)?;
    let code = exclusion_exit_code(res.excluded.len(), cfg.experiment.runs);
    Ok((res, code))
}

/// Sweeps the channel deviation and writes `sweep.csv`.
pub fn cmd_sweep(cfg: &ExperimentConfig, stds: &[f64], exact_slot: bool, out: &Path) -> Result<(Vec<SweepRow>, i32)> {
    fs::create_dir_all(out)?;
    let (rows, results) = run_sweep(cfg, stds, exact_slot)?;
    write_sweep(&rows, create(out, "sweep.csv")?)?;
    fs::write(out.join("config.toml"), cfg.to_toml())?;
    let mut m = Manifest::new("sweep", Some(cfg), cfg.experiment.seed);
    m.runs = results.iter().map(|r| r.runs.len()).min().unwrap_or(0);
    m.excluded = results.iter().flat_map(|r| r.excluded.iter().map(|e| e.0)).collect();
    m.excluded.sort_unstable();
    m.excluded.dedup();
    m.write(out)?;
    let code = results
        .iter()
        .map(|r| exclusion_exit_code(r.excluded.len(), cfg.experiment.runs))
        .max()
        .unwrap_or(exit::OK);
    Ok((rows, code))
}

/// Runs the rate benchmark and writes `quadratic.csv`.
pub fn cmd_quadratic(bench: &RateBenchmark, out: &Path) -> Result<RateResult> {
    fs::create_dir_all(out)?;
    let res = bench.run()?;
    write_rate(&res, create(out, "quadratic.csv")?)?;
    let mut m = Manifest::new("quadratic", None, bench.master_seed);
    m.runs = bench.seeds;
    m.write(out)?;
    Ok(res)
}

/// Runs the property suite and prints one line per property.
pub fn cmd_check(opts: &CheckOptions) -> i32 {
    let outcomes = run_checks(opts);
    let mut code = exit::OK;
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
        if !o.passed {
            code = exit::FAILURE;
        }
    }
    code
}
