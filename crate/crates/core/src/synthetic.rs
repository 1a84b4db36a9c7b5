//! Strongly convex quadratic with additive Gaussian gradient noise.
//!
//! `f(x, ξ) = ½‖x − x*‖² + ⟨ξ, x⟩` with `ξ ~ N(0, (σ²/n) I)`, so `F(x) = ½‖x − x*‖²`
//! and the sample gradient has total noise variance `σ²`. The surrogate is the
//! sample loss itself, which is exactly linear plus a unit proximal term.

use rand::RngCore;

use crate::ellipsoid::Ellipsoid;
use crate::error::{ensure_dim, Error, Result};
use crate::rng::standard_normal;
use crate::problem::{
    ConstraintSet, LinearProxSurrogate, ProblemConstants, Sample, StochasticProblem, Surrogate,
    Vector,
};

#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    optimum: Vector,
    noise_std: f64,
    constraint: ConstraintSet,
}

impl QuadraticProblem {
    /// `noise_variance` is the total variance `E‖ξ‖²`. With `radius` the problem
    /// is restricted to the centred ball of that radius.
    pub fn new(optimum: Vector, noise_variance: f64, radius: Option<f64>) -> Result<Self> {
        if optimum.is_empty() {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(Error::InvalidArgument("noise variance must be non-negative".into()));
        }
        let n = optimum.len();
        let constraint = match radius {
            Some(r) => ConstraintSet::Ellipsoid(Ellipsoid::ball(n, r)?),
            None => ConstraintSet::Unconstrained(n),
        };
        Ok(Self {
            noise_std: (noise_variance / n as f64).sqrt(),
            optimum,
            constraint,
        })
    }

    /// Optimum drawn from `N(0, I)` and a ball of radius `‖x*‖ + 1`, so the optimum
    /// and the origin are interior.
    pub fn random(dim: usize, noise_variance: f64, rng: &mut dyn RngCore) -> Result<Self> {
        let optimum = Vector::from_iterator(dim, (0..dim).map(|_| standard_normal(rng)));
        let radius = optimum.norm() + 1.0;
        Self::new(optimum, noise_variance, Some(radius))
    }

    pub fn optimum(&self) -> &Vector {
        &self.optimum
    }

    /// Exact `F(x)`.
    pub fn expected_loss(&self, x: &Vector) -> f64 {
        0.5 * (x - &self.optimum).norm_squared()
    }

    /// Exact `∇F(x)`.
    pub fn expected_gradient(&self, x: &Vector) -> Vector {
        x - &self.optimum
    }
}

impl StochasticProblem for QuadraticProblem {
    fn dim(&self) -> usize {
        self.optimum.len()
    }

    fn draw_sample(&self, rng: &mut dyn RngCore) -> Sample {
        let n = self.dim();
        Sample(Vector::from_iterator(
            n,
            (0..n).map(|_| self.noise_std * standard_normal(rng)),
        ))
    }

    fn loss(&self, x: &Vector, xi: &Sample) -> Result<f64> {
        ensure_dim("point", x.len(), self.dim())?;
        ensure_dim("sample", xi.0.len(), self.dim())?;
        Ok(self.expected_loss(x) + xi.0.dot(x))
    }

    fn gradient(&self, x: &Vector, xi: &Sample) -> Result<Vector> {
        ensure_dim("point", x.len(), self.dim())?;
        ensure_dim("sample", xi.0.len(), self.dim())?;
        Ok(self.expected_gradient(x) + &xi.0)
    }

    fn surrogate(&self, anchor: &Vector, xi: &Sample) -> Result<Box<dyn Surrogate>> {
        Ok(Box::new(LinearProxSurrogate {
            anchor: anchor.clone(),
            offset: self.loss(anchor, xi)?,
            slope: self.gradient(anchor, xi)?,
            modulus: 1.0,
        }))
    }

    fn constraint(&self) -> &ConstraintSet {
        &self.constraint
    }

    fn constants(&self) -> ProblemConstants {
        ProblemConstants {
            lipschitz: 1.0,
            surrogate_lipschitz: 1.0,
            modulus: 1.0,
        }
    }
}
