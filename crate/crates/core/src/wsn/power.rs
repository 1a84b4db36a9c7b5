//! Transmit power constraint, the budget shrink that leaves room for a per-slot
//! correction, and the correction itself.

use serde::{Deserialize, Serialize};

use crate::ellipsoid::{Ellipsoid, QpSolution};
use crate::error::{ensure_dim, Error, Result};
use crate::problem::Vector;
use crate::wsn::model::SensingModel;
use crate::wsn::mse::{power_matrix, MseQuadratic};

/// `{x : tr(GΓGᴴ) ≤ budget}` in the real embedding of the free entries.
pub fn power_ellipsoid(model: &SensingModel, budget: f64) -> Result<Ellipsoid> {
    Ellipsoid::new(power_matrix(model), budget)
}

/// Minimises a (possibly averaged) MSE quadratic subject to a total power budget.
pub fn solve_power_constrained_qp(model: &SensingModel, quad: &MseQuadratic, budget: f64) -> Result<QpSolution> {
    if !(budget > 0.0) {
        return Err(Error::InvalidArgument(format!("power budget must be positive, got {budget}")));
    }
    ensure_dim("quadratic", quad.b.len(), model.real_dim())?;
    solve_in(&power_ellipsoid(model, budget)?, quad)
}

pub(crate) fn solve_in(set: &Ellipsoid, quad: &MseQuadratic) -> Result<QpSolution> {
    set.minimize_quadratic(&(&quad.a * 2.0), &(&quad.b * 2.0))
}

/// How the correction's worst-case power is bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShrinkNorm {
    /// `ω = ‖Γ‖₂`.
    #[default]
    Spectral,
    /// `ω = max_i ‖Γ_i‖₂` over the diagonal blocks of `Γ`, valid because the
    /// correction shares the block pattern of the precoder.
    Block,
}

/// Constant `ω` with `tr(EΓEᴴ) ≤ ω‖E‖²_F` for every block-patterned `E`.
pub fn shrink_omega(model: &SensingModel, norm: ShrinkNorm) -> f64 {
    let spectral = |m: &crate::wsn::model::CMatrix| -> f64 {
        let n = m.nrows();
        let mut r = nalgebra::DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let z = m[(i, j)];
                r[(i, j)] = z.re;
                r[(n + i, n + j)] = z.re;
                r[(i, n + j)] = -z.im;
                r[(n + i, j)] = z.im;
            }
        }
        let r = (&r + r.transpose()) * 0.5;
        nalgebra::SymmetricEigen::new(r).eigenvalues.max()
    };
    match norm {
        ShrinkNorm::Spectral => spectral(&model.gamma),
        ShrinkNorm::Block => model
            .layout
            .col_ranges()
            .iter()
            .map(|&(a, b)| spectral(&model.gamma.view((a, a), (b - a, b - a)).into_owned()))
            .fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerShrink {
    pub budget: f64,
    pub omega: f64,
    /// False when the correction alone can exhaust the budget.
    pub sufficient: bool,
}

/// `P̃ = (√P − √ω ε)²`, clamped at zero.
pub fn power_shrink(power: f64, omega: f64, eps: f64) -> Result<PowerShrink> {
    if !(power > 0.0) || !(eps >= 0.0) || !(omega >= 0.0) {
        return Err(Error::InvalidArgument("power shrink needs P > 0, ε ≥ 0 and ω ≥ 0".into()));
    }
    if eps == 0.0 {
        return Ok(PowerShrink {
            budget: power,
            omega,
            sufficient: true,
        });
    }
    let root = power.sqrt() - omega.sqrt() * eps;
    if root <= 0.0 {
        log::warn!("correction radius {eps} leaves no power for the precoder (P = {power}, ω = {omega})");
        return Ok(PowerShrink {
            budget: 0.0,
            omega,
            sufficient: false,
        });
    }
    Ok(PowerShrink {
        budget: root * root,
        omega,
        sufficient: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionMode {
    /// A step of length `ε` against the MSE gradient.
    #[default]
    Linearized,
    /// The exact minimiser of the MSE over the `ε`-ball.
    Exact,
}

/// Per-slot correction `E` with `‖E‖_F ≤ ε`, and the multiplier `λ` of
/// `∇ζ(x + E) + λE = 0` in exact mode (zero otherwise).
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub e: Vector,
    pub multiplier: f64,
}

/// Reusable corrector that keeps the `ε`-ball factorised.
#[derive(Debug, Clone)]
pub struct Corrector {
    eps: f64,
    mode: CorrectionMode,
    ball: Ellipsoid,
}

impl Corrector {
    pub fn new(dim: usize, eps: f64, mode: CorrectionMode) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("correction radius must be non-negative, got {eps}")));
        }
        Ok(Self {
            eps,
            mode,
            ball: Ellipsoid::ball(dim, eps)?,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn mode(&self) -> CorrectionMode {
        self.mode
    }

    pub fn correct(&self, quad: &MseQuadratic, x: &Vector) -> Result<Correction> {
        ensure_dim("precoder vector", x.len(), self.ball.dim())?;
        let zero = || Correction {
            e: Vector::zeros(x.len()),
            multiplier: 0.0,
        };
        if self.eps == 0.0 {
            return Ok(zero());
        }
        let d = quad.gradient(x);
        let dn = d.norm();
        if dn <= 1e-14 {
            return Ok(zero());
        }
        match self.mode {
            CorrectionMode::Linearized => Ok(Correction {
                e: d * (-self.eps / dn),
                multiplier: 0.0,
            }),
            CorrectionMode::Exact => {
                // ζ(x + e) = ζ(x) + dᵀe + eᵀAe
                let s = self.ball.minimize_quadratic(&(&quad.a * 2.0), &(-d))?;
                Ok(Correction {
                    e: s.x,
                    multiplier: s.multiplier,
                })
            }
        }
    }
}

/// One-shot correction at `x` for the channel summarised by `quad`.
pub fn instantaneous_correction(quad: &MseQuadratic, x: &Vector, eps: f64, mode: CorrectionMode) -> Result<Correction> {
    Corrector::new(x.len(), eps, mode)?.correct(quad, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{standard_normal, SeedTree, Stream};
    use crate::wsn::channel::ChannelProcess;
    use crate::wsn::model::{CMatrix, SensingDims};
    use crate::wsn::mse::{mse_quadratic, transmit_power};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    fn scalar_quad() -> MseQuadratic {
        MseQuadratic {
            a: DMatrix::identity(2, 2),
            b: Vector::from_vec(vec![1.0, 0.0]),
            q: 1.0,
        }
    }

    fn scalar_model() -> SensingModel {
        let one = CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        SensingModel::from_parts(SensingDims::uniform(1, 1, 1, 1, 1), one.clone(), one, CMatrix::zeros(1, 1), 10.0)
            .unwrap()
    }

    fn default_model(seed: u64) -> SensingModel {
        SensingModel::build(SensingDims::uniform(2, 2, 2, 2, 2), 10.0, 30.0, &mut SeedTree::new(seed).rng(Stream::Model, 0))
            .unwrap()
    }

    #[test]
    fn scalar_qp_interior_and_boundary() {
        let m = scalar_model();
        let s = solve_power_constrained_qp(&m, &scalar_quad(), 10.0).unwrap();
        assert_relative_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_eq!(s.multiplier, 0.0);
        let s = solve_power_constrained_qp(&m, &scalar_quad(), 0.25).unwrap();
        assert_relative_eq!(s.x[0], 0.5, epsilon = 1e-12);
        assert!(s.x[1].abs() < 1e-14);
    }

    #[test]
    fn scalar_qp_over_averaged_channels() {
        let m = scalar_model();
        let q3 = MseQuadratic {
            a: DMatrix::identity(2, 2),
            b: Vector::from_vec(vec![3.0, 0.0]),
            q: 9.0,
        };
        let avg = MseQuadratic::average(&[scalar_quad(), q3]).unwrap();
        let s = solve_power_constrained_qp(&m, &avg, 10.0).unwrap();
        assert_relative_eq!(s.x[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn shrink_examples() {
        assert_eq!(power_shrink(10.0, 3.0, 0.0).unwrap().budget, 10.0);
        assert_relative_eq!(power_shrink(4.0, 1.0, 1.0).unwrap().budget, 1.0);
        let s = power_shrink(1.0, 4.0, 1.0).unwrap();
        assert_eq!(s.budget, 0.0);
        assert!(!s.sufficient);
    }

    #[test]
    fn block_norm_never_exceeds_spectral_norm() {
        for seed in 0..20 {
            let m = default_model(seed);
            assert!(shrink_omega(&m, ShrinkNorm::Block) <= shrink_omega(&m, ShrinkNorm::Spectral) + 1e-12);
        }
    }

    #[test]
    fn linearized_correction_is_a_scaled_unit_step() {
        let q = MseQuadratic {
            a: DMatrix::identity(2, 2) * 0.5,
            b: Vector::zeros(2),
            q: 0.0,
        };
        // d = 2·0.5·x = (3, 4)
        let c = instantaneous_correction(&q, &Vector::from_vec(vec![3.0, 4.0]), 0.05, CorrectionMode::Linearized).unwrap();
        assert_relative_eq!(c.e[0], -0.03, epsilon = 1e-15);
        assert_relative_eq!(c.e[1], -0.04, epsilon = 1e-15);
    }

    #[test]
    fn zero_gradient_gives_zero_correction() {
        let at_min = Vector::from_vec(vec![1.0, 0.0]);
        for mode in [CorrectionMode::Linearized, CorrectionMode::Exact] {
            let c = instantaneous_correction(&scalar_quad(), &at_min, 0.1, mode).unwrap();
            assert_eq!(c.e.norm(), 0.0);
        }
    }

    #[test]
    fn exact_correction_reaches_interior_optimum() {
        let c = instantaneous_correction(&scalar_quad(), &Vector::zeros(2), 10.0, CorrectionMode::Exact).unwrap();
        assert_relative_eq!(c.e[0], 1.0, epsilon = 1e-12);
        assert_eq!(c.multiplier, 0.0);
    }

    #[test]
    fn exact_correction_beats_random_feasible_perturbations() {
        let m = default_model(1);
        let mut rng = SeedTree::new(1).rng(Stream::Check, 0);
        let ch = ChannelProcess::draw(2, 4, 0.05, &mut rng).unwrap();
        for _ in 0..10 {
            let q = mse_quadratic(&m, &ch.sample(&mut rng)).unwrap();
            let x = Vector::from_fn(16, |_, _| standard_normal(&mut rng)) * 0.3;
            let c = instantaneous_correction(&q, &x, 0.05, CorrectionMode::Exact).unwrap();
            assert!(c.e.norm() <= 0.05 * (1.0 + 1e-12));
            let best = q.value(&(&x + &c.e));
            for _ in 0..1000 {
                let mut e = Vector::from_fn(16, |_, _| standard_normal(&mut rng));
                let r = 0.05 * rand::Rng::random::<f64>(&mut rng).sqrt();
                e *= r / e.norm();
                assert!(best <= q.value(&(&x + e)) + 1e-12);
            }
        }
    }

    #[test]
    fn shrunk_budget_keeps_corrected_power_within_budget() {
        let m = default_model(2);
        let mut rng = SeedTree::new(2).rng(Stream::Check, 0);
        for norm in [ShrinkNorm::Spectral, ShrinkNorm::Block] {
            let eps = 0.3;
            let s = power_shrink(m.power, shrink_omega(&m, norm), eps).unwrap();
            let set = power_ellipsoid(&m, s.budget).unwrap();
            for _ in 0..2000 {
                let g = Vector::from_fn(16, |_, _| standard_normal(&mut rng)) * 3.0;
                let g = set.project(&g).unwrap().point;
                let mut e = Vector::from_fn(16, |_, _| standard_normal(&mut rng));
                e *= eps / e.norm();
                let p = transmit_power(&m, &m.layout.to_matrix(&(g + e)).unwrap());
                assert!(p <= m.power * (1.0 + 1e-12), "{p}");
            }
        }
    }
}
