//! Combined surrogate, subproblem solver and the iterate and tracker updates.

use nalgebra::DMatrix;
use rand::RngCore;

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::problem::{
    estimate_true_gradient, ConstraintSet, Regularizer, Sample, StochasticProblem, Surrogate,
    SurrogateModel, Vector,
};

const MAX_INNER_ITERATIONS: usize = 100_000;

/// Step sizes, proximal weight and the delay bound used by the step-size gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub gamma: f64,
    pub rho: f64,
    pub mu: f64,
    pub tau: usize,
}

impl HyperParams {
    pub fn new(gamma: f64, rho: f64, mu: f64, tau: usize) -> Result<Self> {
        let h = Self { gamma, rho, mu, tau };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidArgument(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidArgument(format!("mu must be positive, got {}", self.mu)));
        }
        Ok(())
    }
}

/// Optional per-iteration schedule `γ_t = γ t^{-a}`, `ρ_t = ρ t^{-b}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum StepSchedule {
    #[default]
    Constant,
    Diminishing { gamma_exponent: f64, rho_exponent: f64 },
}

impl StepSchedule {
    pub fn at(&self, hyper: &HyperParams, t: usize) -> (f64, f64) {
        match *self {
            StepSchedule::Constant => (hyper.gamma, hyper.rho),
            StepSchedule::Diminishing {
                gamma_exponent,
                rho_exponent,
            } => {
                let t = t.max(1) as f64;
                (hyper.gamma * t.powf(-gamma_exponent), hyper.rho * t.powf(-rho_exponent))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperCheck {
    pub margin: f64,
    pub feasible: bool,
}

/// `C_μ = μ − γL/2 − (1+L²)γ/ρ − τ²ργ(L² + L̂²ρ² + μ²)`.
pub fn stability_margin(l: f64, l_hat: f64, mu: f64, gamma: f64, rho: f64, tau: usize) -> f64 {
    let tau = tau as f64;
    mu - gamma * l / 2.0
        - (1.0 + l * l) * gamma / rho
        - tau * tau * rho * gamma * (l * l + l_hat * l_hat * rho * rho + mu * mu)
}

/// Evaluates the step-size gate. Convergence guarantees need a positive margin.
pub fn validate_hyperparams(
    l: f64,
    l_hat: f64,
    mu: f64,
    gamma: f64,
    rho: f64,
    tau: usize,
) -> Result<HyperCheck> {
    HyperParams::new(gamma, rho, mu, tau)?;
    if !(l >= 0.0 && l_hat >= 0.0 && l.is_finite() && l_hat.is_finite()) {
        return Err(Error::InvalidArgument("Lipschitz constants must be finite and non-negative".into()));
    }
    let margin = stability_margin(l, l_hat, mu, gamma, rho, tau);
    Ok(HyperCheck {
        margin,
        feasible: margin > 0.0,
    })
}

/// `ρ f̂(x) + (1−ρ)⟨y, x⟩ + (1−ρ)(μ/2)‖x − a‖²` for a surrogate anchored at `a`.
pub struct CombinedSurrogate<'a> {
    base: &'a dyn Surrogate,
    tracker: &'a Vector,
    rho: f64,
    mu: f64,
}

impl<'a> CombinedSurrogate<'a> {
    pub fn new(base: &'a dyn Surrogate, tracker: &'a Vector, rho: f64, mu: f64) -> Result<Self> {
        ensure_dim("tracker", tracker.len(), base.anchor().len())?;
        if !(rho > 0.0 && rho <= 1.0) || !(mu > 0.0) {
            return Err(Error::InvalidArgument("combined surrogate needs rho in (0, 1] and mu > 0".into()));
        }
        Ok(Self { base, tracker, rho, mu })
    }

    pub fn anchor(&self) -> &Vector {
        self.base.anchor()
    }

    pub fn value(&self, x: &Vector) -> f64 {
        let d = x - self.anchor();
        self.rho * self.base.value(x)
            + (1.0 - self.rho) * (self.tracker.dot(x) + 0.5 * self.mu * d.norm_squared())
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        let d = x - self.anchor();
        self.base.gradient(x) * self.rho + (self.tracker + d * self.mu) * (1.0 - self.rho)
    }

    pub fn modulus(&self) -> f64 {
        self.rho * self.base.modulus() + (1.0 - self.rho) * self.mu
    }

    pub fn lipschitz(&self) -> f64 {
        self.rho * self.base.lipschitz() + (1.0 - self.rho) * self.mu
    }
}

/// Minimises `h(x) + f̃(x)` over the constraint set.
///
/// Linear-plus-prox surrogates are solved in closed form, quadratic surrogates by an
/// exact linear or ellipsoid solve, and anything else by projected (or proximal)
/// gradient iterations stopped at gradient-mapping norm `tol`.
pub fn solve_subproblem(
    combined: &CombinedSurrogate<'_>,
    h: Regularizer,
    set: &ConstraintSet,
    tol: f64,
) -> Result<Vector> {
    let a = combined.anchor();
    ensure_dim("surrogate anchor", a.len(), set.dim())?;
    let (rho, mu, y) = (combined.rho, combined.mu, combined.tracker);
    let x = match combined.base.model() {
        SurrogateModel::LinearProx { slope, modulus } => {
            let kappa = rho * modulus + (1.0 - rho) * mu;
            let v = slope * rho + y * (1.0 - rho);
            let target = a - v / kappa;
            if h.is_zero() {
                Some(set.project(&target)?)
            } else if set.is_unconstrained() {
                Some(h.prox(&target, 1.0 / kappa))
            } else {
                None
            }
        }
        SurrogateModel::Quadratic { slope, hessian } if h.is_zero() => {
            let n = a.len();
            let hc = hessian * rho + DMatrix::identity(n, n) * ((1.0 - rho) * mu);
            let rhs = &hc * a - (slope * rho + y * (1.0 - rho));
            match set {
                ConstraintSet::Unconstrained(_) => Some(
                    hc.cholesky()
                        .ok_or_else(|| Error::Numeric("surrogate Hessian is not positive definite".into()))?
                        .solve(&rhs),
                ),
                ConstraintSet::Ellipsoid(e) => match e.minimize_quadratic(&hc, &rhs) {
                    Ok(s) => Some(s.x),
                    Err(Error::InvalidArgument(_)) => None,
                    Err(err) => return Err(err),
                },
            }
        }
        _ => None,
    };
    let x = match x {
        Some(x) => x,
        None => first_order_solve(combined, h, set, tol)?,
    };
    ensure_finite("subproblem solution", &x)?;
    Ok(x)
}

fn first_order_solve(
    combined: &CombinedSurrogate<'_>,
    h: Regularizer,
    set: &ConstraintSet,
    tol: f64,
) -> Result<Vector> {
    if !h.is_zero() && !set.is_unconstrained() {
        return Err(Error::InvalidArgument(
            "a nonzero regularizer is only supported without constraints".into(),
        ));
    }
    let step = 1.0 / combined.lipschitz();
    let map = |v: &Vector| -> Result<Vector> {
        if h.is_zero() {
            set.project(v)
        } else {
            Ok(h.prox(v, step))
        }
    };
    let mut x = map(combined.anchor())?;
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_INNER_ITERATIONS {
        let next = map(&(&x - combined.gradient(&x) * step))?;
        residual = (&next - &x).norm() / step;
        x = next;
        if residual <= tol {
            return Ok(x);
        }
    }
    Err(Error::NotConverged {
        what: "surrogate subproblem",
        iterations: MAX_INNER_ITERATIONS,
        residual,
        best: Some(x),
    })
}

/// `(1 − γ)x + γx̂`.
pub fn update_iterate(x: &Vector, x_hat: &Vector, gamma: f64) -> Result<Vector> {
    ensure_dim("candidate", x_hat.len(), x.len())?;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    Ok(x * (1.0 - gamma) + x_hat * gamma)
}

/// `(1 − ρ)y + ρg`.
pub fn update_tracker(y: &Vector, g: &Vector, rho: f64) -> Result<Vector> {
    ensure_dim("sample gradient", g.len(), y.len())?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("rho must lie in [0, 1], got {rho}")));
    }
    Ok(y * (1.0 - rho) + g * rho)
}

/// Proximal stochastic gradient step `prox_{ηh}(P_X(x − ηg))`.
pub fn prox_sgd_step(
    x: &Vector,
    g: &Vector,
    eta: f64,
    h: Regularizer,
    set: &ConstraintSet,
) -> Result<Vector> {
    ensure_dim("gradient", g.len(), x.len())?;
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {eta}")));
    }
    let v = x - g * eta;
    if h.is_zero() {
        set.project(&v)
    } else if set.is_unconstrained() {
        Ok(h.prox(&v, eta))
    } else {
        Err(Error::InvalidArgument(
            "a nonzero regularizer is only supported without constraints".into(),
        ))
    }
}

/// State of the optimizer before update `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub t: usize,
    pub x: Vector,
    pub y: Vector,
}

/// Diagnostics attached to one update. Missing entries were not logged.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IterationMetrics {
    /// `‖x̂ − x_t‖²`.
    pub delta_sq: Option<f64>,
    /// `‖y_t − ∇F(x_{t−1})‖²`.
    pub phi_sq: Option<f64>,
    /// Stationarity residual at `x̂`.
    pub pi: Option<f64>,
    /// Estimate of `U(x_t)`.
    pub objective: Option<f64>,
}

/// Stationarity measure `‖v̄ + ∇F(x̂)‖²` where `v̄ = −∇f̃(x̂)` comes from the
/// optimality condition of the subproblem solved at the given anchor.
#[allow(clippy::too_many_arguments)]
pub fn stationarity_residual(
    problem: &dyn StochasticProblem,
    x_hat: &Vector,
    anchor_x: &Vector,
    anchor_y: &Vector,
    anchor_xi: &Sample,
    hyper: &HyperParams,
    batch: usize,
    rng: &mut dyn RngCore,
    tol: f64,
) -> Result<f64> {
    let s = problem.surrogate(anchor_x, anchor_xi)?;
    let combined = CombinedSurrogate::new(s.as_ref(), anchor_y, hyper.rho, hyper.mu)?;
    let v_bar = -combined.gradient(x_hat);
    if problem.regularizer().is_zero() && problem.constraint().is_unconstrained() {
        let scale = 1.0 + anchor_y.norm();
        if v_bar.norm() > 100.0 * tol * scale {
            return Err(Error::ContractViolation(format!(
                "unconstrained subproblem solution has surrogate gradient norm {:e}",
                v_bar.norm()
            )));
        }
    }
    let g = estimate_true_gradient(problem, x_hat, batch, rng)?;
    Ok((v_bar + g).norm_squared())
}
