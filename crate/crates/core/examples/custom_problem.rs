//! Plugging a user-defined problem into the optimizer: streaming sparse regression
//! with an `ℓ1` penalty. Samples are rows `(a, b)` with `b = aᵀx* + noise`.

use asysca::harness::{draw_samples, run_asynchronous, DelayModel, RunSetup};
use asysca::problem::{
    ConstraintSet, LinearProxSurrogate, ProblemConstants, Regularizer, Sample, StochasticProblem, Surrogate, Vector,
};
use asysca::rng::{standard_normal, SeedTree, Stream};
use asysca::sca::HyperParams;
use rand::RngCore;

struct SparseRegression {
    truth: Vector,
    noise: f64,
    penalty: f64,
    set: ConstraintSet,
}

impl SparseRegression {
    fn split<'a>(&self, xi: &'a Sample) -> (nalgebra::DVectorView<'a, f64>, f64) {
        let n = self.truth.len();
        (xi.0.rows(0, n), xi.0[n])
    }
}

impl StochasticProblem for SparseRegression {
    fn dim(&self) -> usize {
        self.truth.len()
    }

    fn draw_sample(&self, rng: &mut dyn RngCore) -> Sample {
        let n = self.truth.len();
        let a = Vector::from_fn(n, |_, _| standard_normal(rng) / (n as f64).sqrt());
        let b = a.dot(&self.truth) + self.noise * standard_normal(rng);
        let mut v = a.push(0.0);
        v[n] = b;
        Sample(v)
    }

    fn loss(&self, x: &Vector, xi: &Sample) -> asysca::Result<f64> {
        let (a, b) = self.split(xi);
        Ok(0.5 * (a.dot(x) - b).powi(2))
    }

    fn gradient(&self, x: &Vector, xi: &Sample) -> asysca::Result<Vector> {
        let (a, b) = self.split(xi);
        Ok(a * (a.dot(x) - b))
    }

    // Proximal linearization with the expected curvature `1/n`. Tangent at the
    // anchor by construction.
    fn surrogate(&self, anchor: &Vector, xi: &Sample) -> asysca::Result<Box<dyn Surrogate>> {
        Ok(Box::new(LinearProxSurrogate {
            anchor: anchor.clone(),
            offset: self.loss(anchor, xi)?,
            slope: self.gradient(anchor, xi)?,
            modulus: 1.0 / self.truth.len() as f64,
        }))
    }

    fn constraint(&self) -> &ConstraintSet {
        &self.set
    }

    fn regularizer(&self) -> Regularizer {
        Regularizer::L1(self.penalty)
    }

    fn constants(&self) -> ProblemConstants {
        ProblemConstants {
            lipschitz: 1.0,
            surrogate_lipschitz: 1.0 / self.truth.len() as f64,
            modulus: 1.0 / self.truth.len() as f64,
        }
    }
}

fn main() -> asysca::Result<()> {
    let n = 30;
    let mut truth = Vector::zeros(n);
    for (i, v) in [(2, 1.5), (7, -2.0), (19, 1.0)] {
        truth[i] = v;
    }
    let problem = SparseRegression {
        truth: truth.clone(),
        noise: 0.1,
        penalty: 0.001,
        set: ConstraintSet::Unconstrained(n),
    };
    let seeds = SeedTree::new(5);
    let horizon = 20_000;
    let samples = draw_samples(&problem, horizon, &mut seeds.rng(Stream::Channel, 0));
    let setup = RunSetup::new(&problem, HyperParams::new(0.05, 0.05, 1.0, 10)?, Vector::zeros(n), &samples, horizon);
    let (traj, _) = run_asynchronous(
        &setup,
        4,
        &DelayModel::uniform(1, 5)?,
        &mut seeds.rng(Stream::Delays, 0),
        &mut seeds.rng(Stream::Diagnostics, 0),
    )?;
    let x = &traj.final_iterate;
    let support: Vec<usize> = (0..n).filter(|&i| x[i].abs() > 0.1).collect();
    println!("recovered support {support:?}");
    println!("error {:.4}", (x - &truth).norm());
    Ok(())
}
