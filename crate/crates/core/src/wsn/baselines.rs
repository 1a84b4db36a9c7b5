//! Reference designs: the per-slot optimal precoder, the best fixed precoder in
//! hindsight and a fixed precoder learned online by projected SGD.

use crate::error::{Error, Result};
use crate::problem::{ConstraintSet, Regularizer, Vector};
use crate::sca::prox_sgd_step;
use crate::wsn::hybrid::Deployment;
use crate::wsn::model::{CMatrix, SensingModel};
use crate::wsn::mse::{mse, mse_quadratic, transmit_power, MseQuadratic};
use crate::wsn::power::{power_ellipsoid, solve_power_constrained_qp};

fn evaluate(model: &SensingModel, x: Vector, xi: &CMatrix) -> Result<Deployment> {
    let g = model.layout.to_matrix(&x)?;
    Ok(Deployment {
        mse: mse(model, &g, xi)?,
        power: transmit_power(model, &g),
        precoder: x,
    })
}

/// MSE-optimal precoder for a known channel under the full budget.
pub fn instantaneous_design(model: &SensingModel, xi: &CMatrix) -> Result<Deployment> {
    let quad = mse_quadratic(model, xi)?;
    let x = solve_power_constrained_qp(model, &quad, model.power)?.x;
    evaluate(model, x, xi)
}

/// Minimiser of the MSE averaged over `channels` with total power `budget`.
pub fn fixed_design(model: &SensingModel, channels: &[CMatrix], budget: f64) -> Result<Vector> {
    if channels.is_empty() {
        return Err(Error::InvalidArgument("need at least one channel".into()));
    }
    let quads = channels
        .iter()
        .map(|c| mse_quadratic(model, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(solve_power_constrained_qp(model, &MseQuadratic::average(&quads)?, budget)?.x)
}

/// Best fixed precoder for the whole channel sequence, known only in hindsight.
pub fn static_hindsight(model: &SensingModel, channels: &[CMatrix]) -> Result<Vector> {
    fixed_design(model, channels, model.power)
}

/// MSE of a fixed precoder on every channel of a sequence.
pub fn evaluate_fixed(model: &SensingModel, x: &Vector, channels: &[CMatrix]) -> Result<Vec<Deployment>> {
    channels.iter().map(|c| evaluate(model, x.clone(), c)).collect()
}

/// Fixed precoder updated by projected stochastic gradient steps on the
/// observed channel, within the full power budget.
#[derive(Debug, Clone)]
pub struct OnlineSgd {
    set: ConstraintSet,
    eta: f64,
}

impl OnlineSgd {
    pub fn new(model: &SensingModel, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {eta}")));
        }
        Ok(Self {
            set: ConstraintSet::Ellipsoid(power_ellipsoid(model, model.power)?),
            eta,
        })
    }

    pub fn step(&self, model: &SensingModel, x: &Vector, xi: &CMatrix) -> Result<Vector> {
        let g = mse_quadratic(model, xi)?.gradient(x);
        prox_sgd_step(x, &g, self.eta, Regularizer::Zero, &self.set)
    }

    /// Deploys the current precoder on each channel and then takes a step on it.
    pub fn run(&self, model: &SensingModel, initial: &Vector, channels: &[CMatrix]) -> Result<Vec<Deployment>> {
        let mut x = initial.clone();
        let mut out = Vec::with_capacity(channels.len());
        for c in channels {
            out.push(evaluate(model, x.clone(), c)?);
            x = self.step(model, &x, c)?;
        }
        Ok(out)
    }
}
