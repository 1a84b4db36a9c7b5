//! A single worker with unit service time must reproduce the synchronous run exactly.

use asysca::harness::{
    draw_samples, run_asynchronous, run_synchronous_genie, DelayModel, RunOptions, RunSetup, Trajectory,
};
use asysca::problem::{StochasticProblem, Vector};
use asysca::rng::{SeedTree, Stream};
use asysca::sca::HyperParams;
use asysca::synthetic::QuadraticProblem;
use asysca::wsn::{make_hybrid_problem, ChannelProcess, DeployedMse, HybridConfig, SensingDims, SensingModel};

fn csv_bytes(t: &Trajectory) -> Vec<u8> {
    let mut out = Vec::new();
    t.write_csv(&mut out).unwrap();
    out
}

fn both(setup: &RunSetup<'_>, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let seeds = SeedTree::new(seed);
    let delays = DelayModel::deterministic(1).unwrap();
    let (a, log) = run_asynchronous(
        setup,
        1,
        &delays,
        &mut seeds.rng(Stream::Delays, 0),
        &mut seeds.rng(Stream::Diagnostics, 0),
    )
    .unwrap();
    assert_eq!(log.max_delay(), 0);
    let g = run_synchronous_genie(setup, &mut seeds.rng(Stream::Diagnostics, 0)).unwrap();
    assert_eq!(a.final_iterate, g.final_iterate);
    assert_eq!(a.final_tracker, g.final_tracker);
    (csv_bytes(&a), csv_bytes(&g))
}

#[test]
fn synthetic_problem_with_diagnostics() {
    let seeds = SeedTree::new(11);
    let p = QuadraticProblem::random(20, 1.0, &mut seeds.rng(Stream::Model, 0)).unwrap();
    let samples = draw_samples(&p, 1000, &mut seeds.rng(Stream::Channel, 0));
    let setup = RunSetup::new(&p, HyperParams::new(0.05, 0.1, 1.0, 0).unwrap(), Vector::zeros(20), &samples, 1000)
        .with_options(RunOptions {
            log_interval: 10,
            diag_batch: 50,
            ..RunOptions::default()
        });
    let (a, g) = both(&setup, 11);
    assert!(a.len() > 1000 * 10);
    assert_eq!(a, g);
}

#[test]
fn precoding_problem_with_observer() {
    let seeds = SeedTree::new(12);
    let mut rng = seeds.rng(Stream::Model, 0);
    let model = SensingModel::build(SensingDims::uniform(2, 2, 2, 2, 2), 10.0, 30.0, &mut rng).unwrap();
    let channel = ChannelProcess::draw(2, 4, 0.05, &mut rng).unwrap();
    let p = make_hybrid_problem(model, channel, HybridConfig::envelope(0.05, 0.2)).unwrap();
    let samples = draw_samples(&p, 1000, &mut seeds.rng(Stream::Channel, 0));
    let obs = DeployedMse(&p);
    let setup = RunSetup::new(&p, HyperParams::new(0.001, 0.1, 0.2, 0).unwrap(), Vector::zeros(p.dim()), &samples, 1000)
        .with_observer(&obs);
    let (a, g) = both(&setup, 12);
    assert_eq!(a, g);
}

#[test]
fn several_workers_break_equivalence() {
    let seeds = SeedTree::new(13);
    let p = QuadraticProblem::random(5, 1.0, &mut seeds.rng(Stream::Model, 0)).unwrap();
    let samples = draw_samples(&p, 50, &mut seeds.rng(Stream::Channel, 0));
    let setup = RunSetup::new(&p, HyperParams::new(0.1, 0.1, 1.0, 10).unwrap(), Vector::zeros(5), &samples, 50);
    let (a, _) = run_asynchronous(
        &setup,
        3,
        &DelayModel::uniform(1, 3).unwrap(),
        &mut seeds.rng(Stream::Delays, 0),
        &mut seeds.rng(Stream::Diagnostics, 0),
    )
    .unwrap();
    let g = run_synchronous_genie(&setup, &mut seeds.rng(Stream::Diagnostics, 0)).unwrap();
    assert_ne!(csv_bytes(&a), csv_bytes(&g));
}
