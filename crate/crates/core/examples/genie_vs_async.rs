//! One worker with unit service time is the synchronous run. More workers introduce staleness.

use asysca::harness::{draw_samples, run_asynchronous, run_practical_synchronous, run_synchronous_genie, DelayModel, RunSetup};
use asysca::problem::Vector;
use asysca::rng::{SeedTree, Stream};
use asysca::sca::HyperParams;
use asysca::synthetic::QuadraticProblem;

fn main() -> asysca::Result<()> {
    let seeds = SeedTree::new(7);
    let p = QuadraticProblem::random(10, 0.5, &mut seeds.rng(Stream::Model, 0))?;
    let samples = draw_samples(&p, 2000, &mut seeds.rng(Stream::Channel, 0));
    let setup = RunSetup::new(&p, HyperParams::new(0.02, 0.05, 1.0, 10)?, Vector::zeros(10), &samples, 2000);

    let genie = run_synchronous_genie(&setup, &mut seeds.rng(Stream::Diagnostics, 0))?;
    let (single, _) = run_asynchronous(
        &setup,
        1,
        &DelayModel::deterministic(1)?,
        &mut seeds.rng(Stream::Delays, 0),
        &mut seeds.rng(Stream::Diagnostics, 0),
    )?;
    println!("single worker equals genie: {}", single.final_iterate == genie.final_iterate);

    let delays = DelayModel::uniform(1, 5)?;
    let (four, log) = run_asynchronous(
        &setup,
        4,
        &delays,
        &mut seeds.rng(Stream::Delays, 0),
        &mut seeds.rng(Stream::Diagnostics, 0),
    )?;
    let practical = run_practical_synchronous(&setup, &delays, &mut seeds.rng(Stream::Delays, 1), &mut seeds.rng(Stream::Diagnostics, 0))?;
    let gap = |x: &Vector| (x - p.optimum()).norm();
    println!("genie      {:.4}", gap(&genie.final_iterate));
    println!("async (4)  {:.4}  max staleness {}", gap(&four.final_iterate), log.max_delay());
    println!("practical  {:.4}  {} updates", gap(&practical.final_iterate), practical.update_count());
    Ok(())
}
