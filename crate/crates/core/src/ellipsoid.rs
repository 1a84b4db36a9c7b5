//! Ellipsoids `{x : xᵀQx ≤ c}` with exact Euclidean projection and an exact
//! solver for convex quadratics restricted to the ellipsoid.
//!
//! Both routines reduce to a scalar secular equation in the Lagrange multiplier,
//! solved by bracketing and bisection in the eigenbasis of `Q`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{ensure_dim, ensure_finite, Error, Result};

const MAX_BISECTIONS: usize = 200;
const MAX_DOUBLINGS: usize = 2000;

#[derive(Debug, Clone)]
pub struct Ellipsoid {
    q: DMatrix<f64>,
    budget: f64,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
    /// `V D^{-1/2}` when `Q` is positive definite.
    whitening: Option<DMatrix<f64>>,
}

/// Projection of a point together with the multiplier `λ` of `z − x + λQz = 0`.
#[derive(Debug, Clone)]
pub struct Projection {
    pub point: DVector<f64>,
    pub multiplier: f64,
}

/// Minimiser of `½xᵀMx − cᵀx` over the ellipsoid with the multiplier of
/// `Mx − c + λQx = 0`.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub multiplier: f64,
    pub kkt_residual: f64,
}

impl Ellipsoid {
    pub fn new(q: DMatrix<f64>, budget: f64) -> Result<Self> {
        if !q.is_square() || q.nrows() == 0 {
            return Err(Error::InvalidArgument("ellipsoid matrix must be square".into()));
        }
        if !(budget.is_finite() && budget >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ellipsoid budget must be finite and non-negative, got {budget}"
            )));
        }
        let scale = q.amax().max(1.0);
        if (&q - q.transpose()).amax() > 1e-10 * scale {
            return Err(Error::InvalidArgument("ellipsoid matrix is not symmetric".into()));
        }
        let sym = (&q + q.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let max_eig = eig.eigenvalues.max();
        let min_eig = eig.eigenvalues.min();
        if min_eig < -1e-12 * max_eig.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "ellipsoid matrix is not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
        let eigvals = eig.eigenvalues.map(|d| d.max(0.0));
        let whitening = if min_eig > 1e-13 * max_eig {
            let mut w = eig.eigenvectors.clone();
            for (j, d) in eigvals.iter().enumerate() {
                w.column_mut(j).scale_mut(1.0 / d.sqrt());
            }
            Some(w)
        } else {
            None
        };
        Ok(Self {
            q: sym,
            budget,
            eigvals,
            eigvecs: eig.eigenvectors,
            whitening,
        })
    }

    /// Euclidean ball of the given radius centred at the origin.
    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim), radius * radius)
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// `xᵀQx`.
    pub fn quad(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.q * x))
    }

    /// Membership with a relative tolerance on the budget.
    pub fn contains(&self, x: &DVector<f64>, rel_tol: f64) -> bool {
        self.quad(x) <= self.budget * (1.0 + rel_tol) + rel_tol * f64::EPSILON
    }

    pub fn project(&self, x: &DVector<f64>) -> Result<Projection> {
        ensure_dim("projection input", x.len(), self.dim())?;
        ensure_finite("projection input", x)?;
        if self.quad(x) <= self.budget {
            return Ok(Projection {
                point: x.clone(),
                multiplier: 0.0,
            });
        }
        let w = self.eigvecs.transpose() * x;
        let d = &self.eigvals;
        let coords = |lam: f64| DVector::from_iterator(w.len(), w.iter().zip(d.iter()).map(|(wi, di)| wi / (1.0 + lam * di)));
        if self.budget == 0.0 {
            let z = DVector::from_iterator(
                w.len(),
                w.iter().zip(d.iter()).map(|(wi, di)| if *di > 0.0 { 0.0 } else { *wi }),
            );
            return Ok(Projection {
                point: &self.eigvecs * z,
                multiplier: f64::INFINITY,
            });
        }
        let phi = |lam: f64| -> f64 {
            w.iter()
                .zip(d.iter())
                .map(|(wi, di)| di * (wi / (1.0 + lam * di)).powi(2))
                .sum()
        };
        let lam = solve_secular(phi, self.budget, "ellipsoid projection")?;
        Ok(Projection {
            point: &self.eigvecs * coords(lam),
            multiplier: lam,
        })
    }

    /// Exact minimiser of `½xᵀMx − cᵀx` subject to `xᵀQx ≤ budget` for
    /// symmetric positive semidefinite `M` and positive definite `Q`.
    pub fn minimize_quadratic(&self, m: &DMatrix<f64>, c: &DVector<f64>) -> Result<QpSolution> {
        let n = self.dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "quadratic has shape {}x{}, expected {n}x{n}",
                m.nrows(),
                m.ncols()
            )));
        }
        ensure_dim("linear term", c.len(), n)?;
        ensure_finite("linear term", c)?;
        let w = self.whitening.as_ref().ok_or_else(|| {
            Error::InvalidArgument("quadratic solve requires a positive definite ellipsoid".into())
        })?;
        let mt = w.transpose() * m * w;
        let mt = (&mt + mt.transpose()) * 0.5;
        let ct = w.transpose() * c;
        let eig = SymmetricEigen::new(mt);
        let lams = eig.eigenvalues.map(|l| l.max(0.0));
        let u = &eig.eigenvectors;
        let g = u.transpose() * ct;
        let tiny = 1e-13 * lams.max().max(1.0);

        let interior = {
            let mut z = DVector::zeros(n);
            let mut bounded = true;
            for i in 0..n {
                if lams[i] > tiny {
                    z[i] = g[i] / lams[i];
                } else if g[i].abs() > tiny {
                    bounded = false;
                }
            }
            bounded.then_some(z)
        };
        let (z, lam) = match interior {
            Some(z) if z.norm_squared() <= self.budget => (z, 0.0),
            _ => {
                if self.budget == 0.0 {
                    (DVector::zeros(n), f64::INFINITY)
                } else {
                    let phi = |lam: f64| -> f64 {
                        g.iter()
                            .zip(lams.iter())
                            .map(|(gi, li)| (gi / (li + lam)).powi(2))
                            .sum()
                    };
                    let lam = solve_secular(phi, self.budget, "ellipsoid quadratic")?;
                    let z = DVector::from_iterator(n, g.iter().zip(lams.iter()).map(|(gi, li)| gi / (li + lam)));
                    (z, lam)
                }
            }
        };
        let x = w * (u * z);
        ensure_finite("ellipsoid quadratic solution", &x)?;
        let kkt_residual = if lam.is_finite() {
            (m * &x - c + &self.q * &x * lam).norm()
        } else {
            0.0
        };
        Ok(QpSolution {
            x,
            multiplier: lam,
            kkt_residual,
        })
    }
}

/// Finds `λ > 0` with `phi(λ) = target` for a decreasing `phi` with `phi(0) > target`.
/// Returns the upper end of the final bracket so the corresponding point is feasible.
fn solve_secular(phi: impl Fn(f64) -> f64, target: f64, what: &'static str) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while phi(hi) > target {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::Numeric(format!("{what}: multiplier bracket diverged")));
        }
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok(hi);
        }
        let v = phi(mid);
        if !v.is_finite() {
            return Err(Error::Numeric(format!("{what}: non-finite secular value")));
        }
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (phi(hi) - target).abs() <= 1e-15 * target {
            return Ok(hi);
        }
    }
    let residual = (phi(hi) - target).abs() / target;
    if residual <= 1e-12 {
        Ok(hi)
    } else {
        Err(Error::NotConverged {
            what,
            iterations: MAX_BISECTIONS,
            residual,
            best: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn kkt(e: &Ellipsoid, x: &DVector<f64>, p: &Projection) -> f64 {
        let stat = (&p.point - x + e.matrix() * &p.point * p.multiplier).norm();
        let comp = (p.multiplier * (e.quad(&p.point) - e.budget())).abs();
        stat.max(comp)
    }

    #[test]
    fn unit_ball_projection() {
        let e = Ellipsoid::ball(2, 1.0).unwrap();
        let p = e.project(&DVector::from_vec(vec![3.0, 4.0])).unwrap();
        assert_relative_eq!(p.point[0], 0.6, epsilon = 1e-12);
        assert_relative_eq!(p.point[1], 0.8, epsilon = 1e-12);
        assert_relative_eq!(p.multiplier, 4.0, epsilon = 1e-9);
    }

    #[test]
    fn interior_point_is_fixed() {
        let e = Ellipsoid::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])), 1.0).unwrap();
        let x = DVector::from_vec(vec![0.5, 0.2]);
        let p = e.project(&x).unwrap();
        assert_eq!(p.point, x);
        assert_eq!(p.multiplier, 0.0);
    }

    #[test]
    fn diagonal_ellipsoid_projection_on_axis() {
        // x = (0, 2) onto 4y² ≤ 1 lands at (0, 1/2).
        let e = Ellipsoid::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])), 1.0).unwrap();
        let x = DVector::from_vec(vec![0.0, 2.0]);
        let p = e.project(&x).unwrap();
        assert_relative_eq!(p.point[1], 0.5, epsilon = 1e-12);
        assert!(kkt(&e, &x, &p) < 1e-10);
    }

    #[test]
    fn singular_matrix_leaves_null_space_free() {
        let e = Ellipsoid::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0])), 1.0).unwrap();
        let p = e.project(&DVector::from_vec(vec![3.0, 7.0])).unwrap();
        assert_relative_eq!(p.point[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.point[1], 7.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(Ellipsoid::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]), 1.0).is_err());
        assert!(Ellipsoid::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0])), 1.0).is_err());
        assert!(Ellipsoid::ball(2, 1.0).unwrap().project(&DVector::zeros(3)).is_err());
    }

    #[test]
    fn scalar_quadratic_hits_boundary() {
        // min (x − 3)² over x² ≤ 1 → x = 1, and 2(x − 3) + 2λx = 0 gives λ = 2 in ½-scaling.
        let e = Ellipsoid::ball(1, 1.0).unwrap();
        let m = DMatrix::from_element(1, 1, 2.0);
        let c = DVector::from_element(1, 6.0);
        let s = e.minimize_quadratic(&m, &c).unwrap();
        assert_relative_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.multiplier, 4.0, epsilon = 1e-9);
        assert!(s.kkt_residual < 1e-10);
    }

    #[test]
    fn quadratic_interior_minimum() {
        let e = Ellipsoid::ball(2, 10.0).unwrap();
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let c = DVector::from_vec(vec![2.0, -1.0]);
        let s = e.minimize_quadratic(&m, &c).unwrap();
        assert_relative_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.x[1], -1.0, epsilon = 1e-12);
        assert_eq!(s.multiplier, 0.0);
    }

    #[test]
    fn quadratic_with_singular_hessian() {
        // Linear objective −x₁ over the unit ball: the minimiser is e₁.
        let e = Ellipsoid::ball(2, 1.0).unwrap();
        let s = e
            .minimize_quadratic(&DMatrix::zeros(2, 2), &DVector::from_vec(vec![1.0, 0.0]))
            .unwrap();
        assert_relative_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert!(s.x[1].abs() < 1e-12);
    }

    fn spd(n: usize, seed: &[f64]) -> DMatrix<f64> {
        let b = DMatrix::from_fn(n, n, |i, j| seed[(i * n + j) % seed.len()]);
        &b * b.transpose() + DMatrix::identity(n, n) * 0.1
    }

    proptest! {
        #[test]
        fn projection_satisfies_kkt_and_is_idempotent(
            seed in prop::collection::vec(-2.0f64..2.0, 16),
            x in prop::collection::vec(-10.0f64..10.0, 4),
            budget in 0.1f64..5.0,
        ) {
            let e = Ellipsoid::new(spd(4, &seed), budget).unwrap();
            let x = DVector::from_vec(x);
            let p = e.project(&x).unwrap();
            prop_assert!(kkt(&e, &x, &p) < 1e-10 * (1.0 + x.norm()));
            prop_assert!(e.contains(&p.point, 1e-12));
            let pp = e.project(&p.point).unwrap();
            prop_assert!((pp.point - &p.point).norm() <= 1e-12 * (1.0 + p.point.norm()));
        }

        #[test]
        fn projection_is_nonexpansive(
            seed in prop::collection::vec(-2.0f64..2.0, 9),
            x in prop::collection::vec(-10.0f64..10.0, 3),
            y in prop::collection::vec(-10.0f64..10.0, 3),
        ) {
            let e = Ellipsoid::new(spd(3, &seed), 1.0).unwrap();
            let (x, y) = (DVector::from_vec(x), DVector::from_vec(y));
            let d = (e.project(&x).unwrap().point - e.project(&y).unwrap().point).norm();
            prop_assert!(d <= (x - y).norm() + 1e-10);
        }

        #[test]
        fn quadratic_solution_beats_feasible_points(
            seed in prop::collection::vec(-2.0f64..2.0, 9),
            mseed in prop::collection::vec(-2.0f64..2.0, 9),
            c in prop::collection::vec(-5.0f64..5.0, 3),
            trials in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 20),
        ) {
            let e = Ellipsoid::new(spd(3, &seed), 1.0).unwrap();
            let m = DMatrix::from_fn(3, 3, |i, j| mseed[i * 3 + j]);
            let m = &m * m.transpose();
            let c = DVector::from_vec(c);
            let s = e.minimize_quadratic(&m, &c).unwrap();
            prop_assert!(e.contains(&s.x, 1e-10));
            prop_assert!(s.kkt_residual < 1e-8 * (1.0 + c.norm()));
            let obj = |x: &DVector<f64>| 0.5 * x.dot(&(&m * x)) - c.dot(x);
            let best = obj(&s.x);
            for t in trials {
                let z = e.project(&DVector::from_vec(t)).unwrap().point;
                prop_assert!(best <= obj(&z) + 1e-9);
            }
        }
    }
}
