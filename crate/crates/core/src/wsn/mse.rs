//! Estimation MSE at the fusion centre and its quadratic form in the free precoder entries.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{ensure_dim, Error, Result};
use crate::problem::Vector;
use crate::wsn::model::{CMatrix, SensingModel};

/// Direct evaluation of `E‖θ − ΞG(Hθ + n)‖²` for a precoder `G` and channel `Ξ`.
pub fn mse(model: &SensingModel, g: &CMatrix, xi: &CMatrix) -> Result<f64> {
    let (n, l) = model.layout.shape();
    if g.shape() != (n, l) {
        return Err(Error::ContractViolation(format!("precoder has shape {:?}, expected {:?}", g.shape(), (n, l))));
    }
    if xi.shape() != (model.dims.fc_antennas, n) {
        return Err(Error::ContractViolation(format!(
            "channel has shape {:?}, expected {:?}",
            xi.shape(),
            (model.dims.fc_antennas, n)
        )));
    }
    let (h, rt, rn) = (&model.h, &model.r_theta, &model.r_noise);
    let xg = xi * g;
    let xgh = &xg * h;
    let z = (&xgh * rt * xgh.adjoint()).trace() - (&xgh * rt).trace() + (&xg * rn * xg.adjoint()).trace()
        - (rt * xgh.adjoint()).trace()
        + rt.trace();
    debug_assert!(z.im.abs() <= 1e-12 * (1.0 + z.re.abs()), "complex MSE residue {}", z.im);
    Ok(z.re)
}

/// `ζ(x) = xᵀAx − 2bᵀx + q` in the real embedding of the free precoder entries.
#[derive(Debug, Clone, PartialEq)]
pub struct MseQuadratic {
    pub a: DMatrix<f64>,
    pub b: Vector,
    pub q: f64,
}

impl MseQuadratic {
    pub fn value(&self, x: &Vector) -> f64 {
        x.dot(&(&self.a * x)) - 2.0 * self.b.dot(x) + self.q
    }

    /// `d = 2(Ax − b)`.
    pub fn gradient(&self, x: &Vector) -> Vector {
        (&self.a * x - &self.b) * 2.0
    }

    /// Largest eigenvalue of `A`.
    pub fn spectral_norm(&self) -> f64 {
        SymmetricEigen::new(self.a.clone()).eigenvalues.max().max(0.0)
    }

    pub fn average(items: &[MseQuadratic]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::InvalidArgument("cannot average an empty list of quadratics".into()))?;
        let k = items.len() as f64;
        let mut acc = first.clone();
        for it in &items[1..] {
            ensure_dim("quadratic", it.b.len(), acc.b.len())?;
            acc.a += &it.a;
            acc.b += &it.b;
            acc.q += it.q;
        }
        acc.a /= k;
        acc.b /= k;
        acc.q /= k;
        Ok(acc)
    }
}

/// `[[Re M, −Im M], [Im M, Re M]]`, the real form of a Hermitian quadratic.
fn embed_hermitian(m: &CMatrix) -> DMatrix<f64> {
    let n = m.nrows();
    let mut r = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            r[(i, j)] = z.re;
            r[(n + i, n + j)] = z.re;
            r[(i, n + j)] = -z.im;
            r[(n + i, j)] = z.im;
        }
    }
    (&r + r.transpose()) * 0.5
}

/// Coefficients of the MSE as a function of the free entries for a fixed channel.
pub fn mse_quadratic(model: &SensingModel, xi: &CMatrix) -> Result<MseQuadratic> {
    let n = model.layout.shape().0;
    if xi.shape() != (model.dims.fc_antennas, n) {
        return Err(Error::ContractViolation("channel shape does not match the model".into()));
    }
    let w = xi.adjoint() * xi;
    let cross = &model.h * &model.r_theta * xi;
    let e = model.layout.entries();
    let m = e.len();
    let ac = CMatrix::from_fn(m, m, |kp, k| model.gamma[(e[k].1, e[kp].1)] * w[(e[kp].0, e[k].0)]);
    let bc: Vec<Complex64> = e.iter().map(|&(r, c)| cross[(c, r)].conj()).collect();
    let mut b = Vector::zeros(2 * m);
    for (k, z) in bc.iter().enumerate() {
        b[k] = z.re;
        b[m + k] = z.im;
    }
    let a = embed_hermitian(&ac);
    debug_assert!(
        SymmetricEigen::new(a.clone()).eigenvalues.min() >= -1e-10 * a.amax().max(1.0),
        "MSE quadratic is not positive semidefinite"
    );
    Ok(MseQuadratic {
        a,
        b,
        q: model.r_theta.trace().re,
    })
}

/// Real-embedded gradient of the MSE with respect to the free entries.
pub fn mse_gradient(model: &SensingModel, x: &Vector, xi: &CMatrix) -> Result<Vector> {
    ensure_dim("precoder vector", x.len(), model.real_dim())?;
    Ok(mse_quadratic(model, xi)?.gradient(x))
}

/// Real matrix `Q` with `xᵀQx = tr(GΓGᴴ)` on the block pattern.
pub fn power_matrix(model: &SensingModel) -> DMatrix<f64> {
    let e = model.layout.entries();
    let m = e.len();
    let qc = CMatrix::from_fn(m, m, |kp, k| {
        if e[k].0 == e[kp].0 {
            model.gamma[(e[k].1, e[kp].1)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    embed_hermitian(&qc)
}

/// Total transmit power `tr(GΓGᴴ)`.
pub fn transmit_power(model: &SensingModel, g: &CMatrix) -> f64 {
    (g * &model.gamma * g.adjoint()).trace().re
}

/// The part of the corrected MSE that is not convex,
/// `ε² dᵀAd / (‖d‖² + υ²) − ε(√(‖d‖² + υ²) − υ)` with `d = 2(Ax − b)`,
/// together with its gradient in `x`.
pub fn nonconvex_part(quad: &MseQuadratic, x: &Vector, eps: f64, upsilon: f64) -> (f64, Vector) {
    let d = quad.gradient(x);
    let ad = &quad.a * &d;
    let r = d.dot(&ad);
    let den = d.norm_squared() + upsilon * upsilon;
    let s = den.sqrt();
    let value = eps * eps * r / den - eps * (s - upsilon);
    let grad_d = (ad * 2.0 / den - &d * (2.0 * r / (den * den))) * (eps * eps) - &d * (eps / s);
    (value, &quad.a * grad_d * 2.0)
}
