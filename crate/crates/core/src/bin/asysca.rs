use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use asysca::experiment::{self, exit, CheckOptions, ExperimentConfig, RateBenchmark};

#[derive(Parser)]
#[command(version, about = "Asynchronous stochastic SCA experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo comparison of the precoder designs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Final-window MSE against the channel deviation.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1,0.15")]
        std: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Report the final slot only instead of the averaging window.
        #[arg(long)]
        exact_slot: bool,
    },
    /// Stationarity rate on the synthetic quadratic.
    Quadratic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        seeds: usize,
    },
    /// Property suite.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scales the synthetic gradient by 1 + value to exercise the suite.
        #[arg(long, default_value_t = 0.0, hide = true)]
        perturb_gradient: f64,
    },
}

fn run(cli: Cli) -> asysca::Result<i32> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (res, code) = experiment::cmd_run(&cfg, &out)?;
            let (a, b) = cfg.window_range();
            for name in &res.series {
                let s = res.window_summary(name, a, b).expect("series exists");
                println!("{name:<28} slots {a}-{b}: {:.6} ± {:.6}", s.mean, s.se);
            }
            Ok(code)
        }
        Command::Sweep {
            config,
            std,
            out,
            exact_slot,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (rows, code) = experiment::cmd_sweep(&cfg, &std, exact_slot, &out)?;
            for r in rows {
                println!("{:<6} {:<28} {:.6} ± {:.6}", r.channel_std, r.series, r.summary.mean, r.summary.se);
            }
            Ok(code)
        }
        Command::Quadratic { out, seeds } => {
            let bench = RateBenchmark {
                seeds,
                ..RateBenchmark::default()
            };
            let res = experiment::cmd_quadratic(&bench, &out)?;
            for p in &res.points {
                println!("T = {:<6} mean min Π = {:.4e}", p.horizon, p.summary().mean);
            }
            println!("slope {:.3}", res.slope);
            Ok(exit::OK)
        }
        Command::Check { seed, perturb_gradient } => Ok(experiment::cmd_check(&CheckOptions {
            seed,
            gradient_perturbation: perturb_gradient,
        })),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match run(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            experiment::exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
