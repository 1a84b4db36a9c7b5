//! Asynchronous SCA on a noisy quadratic with four workers and random service times.
//!
//! `cargo run --release --example quadratic_async`

use asysca::harness::{draw_samples, run_asynchronous, DelayModel, RunOptions, RunSetup};
use asysca::problem::Vector;
use asysca::rng::{SeedTree, Stream};
use asysca::sca::HyperParams;
use asysca::synthetic::QuadraticProblem;

fn main() -> asysca::Result<()> {
    let seeds = SeedTree::new(42);
    let problem = QuadraticProblem::random(20, 1.0, &mut seeds.rng(Stream::Model, 0))?;
    let horizon = 5000;
    let samples = draw_samples(&problem, horizon, &mut seeds.rng(Stream::Channel, 0));
    let step = (horizon as f64).powf(-0.5);
    let setup = RunSetup::new(&problem, HyperParams::new(step, step, 1.0, 10)?, Vector::zeros(20), &samples, horizon)
        .with_options(RunOptions {
            log_interval: 500,
            diag_batch: 500,
            ..RunOptions::default()
        });
    let (traj, log) = run_asynchronous(
        &setup,
        4,
        &DelayModel::uniform(1, 5)?,
        &mut seeds.rng(Stream::Delays, 0),
        &mut seeds.rng(Stream::Diagnostics, 0),
    )?;
    println!("{} updates, largest staleness {}", traj.update_count(), log.max_delay());
    for u in traj.updates().filter(|u| u.metrics.pi.is_some()) {
        println!("t={:5} Π={:.3e}", u.iteration, u.metrics.pi.unwrap());
    }
    println!("distance to optimum {:.4}", (&traj.final_iterate - problem.optimum()).norm());
    Ok(())
}
