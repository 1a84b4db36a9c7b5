//! Final-window MSE of every design as the channel variation grows. Small Monte-Carlo.

use asysca::experiment::{run_sweep, write_sweep, ExperimentConfig};

fn main() -> asysca::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.experiment.runs = 10;
    cfg.experiment.horizon = 200;
    let (rows, _) = run_sweep(&cfg, &[0.01, 0.05, 0.1, 0.15], false)?;
    write_sweep(&rows, std::io::stdout())
}
