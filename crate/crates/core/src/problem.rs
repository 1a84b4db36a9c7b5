//! Stochastic problems `min_x E[f(x, ξ)] + h(x)` over a convex set, and the
//! strongly convex surrogates built from a single sample.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::ellipsoid::Ellipsoid;
use crate::error::{ensure_dim, Error, Result};

pub type Vector = DVector<f64>;

/// One realisation of the random state, stored as a flat real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample(pub Vector);

impl Sample {
    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// Regularity constants used by the step-size gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    /// Lipschitz constant `L` of the sample gradients.
    pub lipschitz: f64,
    /// Lipschitz constant `L̂` of the surrogate gradients.
    pub surrogate_lipschitz: f64,
    /// Strong convexity modulus `μ` of the surrogate.
    pub modulus: f64,
}

/// Structure a surrogate can expose so the subproblem is solved in closed form.
#[derive(Debug, Clone, Copy)]
pub enum SurrogateModel<'a> {
    General,
    /// `c + ⟨g, x − a⟩ + (μ/2)‖x − a‖²`.
    LinearProx { slope: &'a Vector, modulus: f64 },
    /// `c + ⟨g, x − a⟩ + ½(x − a)ᵀH(x − a)`.
    Quadratic { slope: &'a Vector, hessian: &'a DMatrix<f64> },
}

/// Strongly convex approximation of `f(·, ξ)` around an anchor point.
pub trait Surrogate: Send + Sync {
    fn anchor(&self) -> &Vector;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    /// Strong convexity modulus.
    fn modulus(&self) -> f64;
    /// Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64;
    fn model(&self) -> SurrogateModel<'_> {
        SurrogateModel::General
    }
}

#[derive(Debug, Clone)]
pub struct LinearProxSurrogate {
    pub anchor: Vector,
    pub offset: f64,
    pub slope: Vector,
    pub modulus: f64,
}

impl Surrogate for LinearProxSurrogate {
    fn anchor(&self) -> &Vector {
        &self.anchor
    }
    fn value(&self, x: &Vector) -> f64 {
        let d = x - &self.anchor;
        self.offset + self.slope.dot(&d) + 0.5 * self.modulus * d.norm_squared()
    }
    fn gradient(&self, x: &Vector) -> Vector {
        &self.slope + (x - &self.anchor) * self.modulus
    }
    fn modulus(&self) -> f64 {
        self.modulus
    }
    fn lipschitz(&self) -> f64 {
        self.modulus
    }
    fn model(&self) -> SurrogateModel<'_> {
        SurrogateModel::LinearProx {
            slope: &self.slope,
            modulus: self.modulus,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticSurrogate {
    pub anchor: Vector,
    pub offset: f64,
    pub slope: Vector,
    pub hessian: DMatrix<f64>,
    pub modulus: f64,
    pub lipschitz: f64,
}

impl Surrogate for QuadraticSurrogate {
    fn anchor(&self) -> &Vector {
        &self.anchor
    }
    fn value(&self, x: &Vector) -> f64 {
        let d = x - &self.anchor;
        self.offset + self.slope.dot(&d) + 0.5 * d.dot(&(&self.hessian * &d))
    }
    fn gradient(&self, x: &Vector) -> Vector {
        &self.slope + &self.hessian * (x - &self.anchor)
    }
    fn modulus(&self) -> f64 {
        self.modulus
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    fn model(&self) -> SurrogateModel<'_> {
        SurrogateModel::Quadratic {
            slope: &self.slope,
            hessian: &self.hessian,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ConstraintSet {
    Unconstrained(usize),
    Ellipsoid(Ellipsoid),
}

impl ConstraintSet {
    pub fn dim(&self) -> usize {
        match self {
            ConstraintSet::Unconstrained(n) => *n,
            ConstraintSet::Ellipsoid(e) => e.dim(),
        }
    }

    pub fn is_unconstrained(&self) -> bool {
        matches!(self, ConstraintSet::Unconstrained(_))
    }

    pub fn project(&self, x: &Vector) -> Result<Vector> {
        match self {
            ConstraintSet::Unconstrained(n) => {
                ensure_dim("projection input", x.len(), *n)?;
                Ok(x.clone())
            }
            ConstraintSet::Ellipsoid(e) => Ok(e.project(x)?.point),
        }
    }

    pub fn contains(&self, x: &Vector, rel_tol: f64) -> bool {
        match self {
            ConstraintSet::Unconstrained(n) => x.len() == *n,
            ConstraintSet::Ellipsoid(e) => x.len() == e.dim() && e.contains(x, rel_tol),
        }
    }
}

/// Convex, possibly nonsmooth regularizer `h` with a cheap proximal map.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Regularizer {
    #[default]
    Zero,
    /// `w‖x‖₁`.
    L1(f64),
}

impl Regularizer {
    pub fn is_zero(&self) -> bool {
        match self {
            Regularizer::Zero => true,
            Regularizer::L1(w) => *w == 0.0,
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::L1(w) => w * x.lp_norm(1),
        }
    }

    /// `argmin_z h(z) + ‖z − v‖² / (2 step)`.
    pub fn prox(&self, v: &Vector, step: f64) -> Vector {
        match self {
            Regularizer::Zero => v.clone(),
            Regularizer::L1(w) => {
                let k = w * step;
                v.map(|vi| vi.signum() * (vi.abs() - k).max(0.0))
            }
        }
    }
}

pub trait StochasticProblem: Send + Sync {
    fn dim(&self) -> usize;
    fn draw_sample(&self, rng: &mut dyn RngCore) -> Sample;
    /// Sample loss `f(x, ξ)`.
    fn loss(&self, x: &Vector, xi: &Sample) -> Result<f64>;
    /// Sample gradient `∇f(x, ξ)`.
    fn gradient(&self, x: &Vector, xi: &Sample) -> Result<Vector>;
    /// Surrogate of `f(·, ξ)` anchored at `anchor`. Its gradient at the anchor
    /// must equal `gradient(anchor, ξ)`.
    fn surrogate(&self, anchor: &Vector, xi: &Sample) -> Result<Box<dyn Surrogate>>;
    fn constraint(&self) -> &ConstraintSet;
    fn regularizer(&self) -> Regularizer {
        Regularizer::Zero
    }
    fn constants(&self) -> ProblemConstants;
}

/// Norm of the gap between the surrogate gradient and the sample gradient at the anchor.
pub fn check_tangent(problem: &dyn StochasticProblem, anchor: &Vector, xi: &Sample) -> Result<f64> {
    ensure_dim("anchor", anchor.len(), problem.dim())?;
    let s = problem.surrogate(anchor, xi)?;
    let g = problem.gradient(anchor, xi)?;
    Ok((s.gradient(anchor) - g).norm())
}

/// Sample-average estimate of `∇F(x)` from `batch` fresh draws.
pub fn estimate_true_gradient(
    problem: &dyn StochasticProblem,
    x: &Vector,
    batch: usize,
    rng: &mut dyn RngCore,
) -> Result<Vector> {
    if batch == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut acc = Vector::zeros(problem.dim());
    for _ in 0..batch {
        let xi = problem.draw_sample(rng);
        acc += problem.gradient(x, &xi)?;
    }
    Ok(acc / batch as f64)
}

/// Sample-average estimate of `U(x) = F(x) + h(x)`.
pub fn estimate_objective(
    problem: &dyn StochasticProblem,
    x: &Vector,
    batch: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if batch == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut acc = 0.0;
    for _ in 0..batch {
        let xi = problem.draw_sample(rng);
        acc += problem.loss(x, &xi)?;
    }
    Ok(acc / batch as f64 + problem.regularizer().value(x))
}

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_difference(f: &dyn Fn(&Vector) -> f64, x: &Vector, h: f64) -> Vector {
    Vector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| {
            let mut p = x.clone();
            let mut m = x.clone();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        }),
    )
}
