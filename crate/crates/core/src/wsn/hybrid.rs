//! Hybrid precoder design: a slowly updated precoder optimised for the expected
//! corrected MSE, plus a small per-slot correction computed from the current channel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::Observer;
use crate::problem::{
    ConstraintSet, LinearProxSurrogate, ProblemConstants, QuadraticSurrogate, Sample, StochasticProblem, Surrogate,
    Vector,
};
use crate::wsn::channel::{sample_to_channel, ChannelProcess};
use crate::wsn::model::{CMatrix, SensingModel};
use crate::wsn::mse::{mse, mse_quadratic, nonconvex_part, transmit_power, MseQuadratic};
use crate::wsn::power::{power_ellipsoid, power_shrink, shrink_omega, CorrectionMode, Corrector, PowerShrink, ShrinkNorm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridVariant {
    /// Linear-plus-prox surrogate built from the gradient at the corrected precoder.
    Envelope,
    /// Convex part of the linearly corrected MSE kept exactly, the rest linearised.
    Convex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridConfig {
    pub variant: HybridVariant,
    /// Correction radius `ε`.
    pub eps: f64,
    /// Proximal weight `μ` of the surrogate.
    pub mu: f64,
    /// Smoothing constant `υ` of the convex variant.
    pub upsilon: f64,
    /// Correction used by the envelope variant. The convex variant always linearises.
    pub correction: CorrectionMode,
    pub shrink_norm: ShrinkNorm,
}

impl HybridConfig {
    pub fn envelope(eps: f64, mu: f64) -> Self {
        Self {
            variant: HybridVariant::Envelope,
            eps,
            mu,
            upsilon: 1e-4,
            correction: CorrectionMode::Linearized,
            shrink_norm: ShrinkNorm::Spectral,
        }
    }

    pub fn convex(eps: f64, mu: f64, upsilon: f64) -> Self {
        Self {
            variant: HybridVariant::Convex,
            eps,
            mu,
            upsilon,
            correction: CorrectionMode::Linearized,
            shrink_norm: ShrinkNorm::Spectral,
        }
    }
}

/// Deployed design in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub precoder: Vector,
    pub mse: f64,
    pub power: f64,
}

#[derive(Debug, Clone)]
pub struct HybridProblem {
    model: SensingModel,
    channel: ChannelProcess,
    config: HybridConfig,
    shrink: PowerShrink,
    constraint: ConstraintSet,
    corrector: Corrector,
    base_norm: f64,
}

/// Hybrid design problem over the shrunk power ellipsoid.
pub fn make_hybrid_problem(model: SensingModel, channel: ChannelProcess, config: HybridConfig) -> Result<HybridProblem> {
    if !(config.mu > 0.0) {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {}", config.mu)));
    }
    if config.variant == HybridVariant::Convex && !(config.upsilon > 0.0) {
        return Err(Error::InvalidArgument("smoothing constant must be positive".into()));
    }
    let n = model.layout.shape().0;
    if channel.base().shape() != (model.dims.fc_antennas, n) {
        return Err(Error::InvalidArgument("channel shape does not match the model".into()));
    }
    let shrink = power_shrink(model.power, shrink_omega(&model, config.shrink_norm), config.eps)?;
    if shrink.budget <= 0.0 {
        return Err(Error::Config(format!(
            "correction radius {} leaves no power budget for the precoder",
            config.eps
        )));
    }
    let constraint = ConstraintSet::Ellipsoid(power_ellipsoid(&model, shrink.budget)?);
    let mode = match config.variant {
        HybridVariant::Envelope => config.correction,
        HybridVariant::Convex => CorrectionMode::Linearized,
    };
    let corrector = Corrector::new(model.real_dim(), config.eps, mode)?;
    let base_norm = mse_quadratic(&model, channel.base())?.spectral_norm();
    Ok(HybridProblem {
        model,
        channel,
        config,
        shrink,
        constraint,
        corrector,
        base_norm,
    })
}

impl HybridProblem {
    pub fn model(&self) -> &SensingModel {
        &self.model
    }

    pub fn channel(&self) -> &ChannelProcess {
        &self.channel
    }

    pub fn config(&self) -> &HybridConfig {
        &self.config
    }

    pub fn shrink(&self) -> &PowerShrink {
        &self.shrink
    }

    pub fn channel_of(&self, xi: &Sample) -> Result<CMatrix> {
        sample_to_channel(xi, self.model.dims.fc_antennas, self.model.layout.shape().0)
    }

    pub fn quadratic(&self, xi: &Sample) -> Result<MseQuadratic> {
        mse_quadratic(&self.model, &self.channel_of(xi)?)
    }

    /// Precoder plus correction and its MSE on the slot's channel.
    pub fn deploy(&self, x: &Vector, xi: &Sample) -> Result<Deployment> {
        let ch = self.channel_of(xi)?;
        let quad = mse_quadratic(&self.model, &ch)?;
        let precoder = x + self.corrector.correct(&quad, x)?.e;
        let g = self.model.layout.to_matrix(&precoder)?;
        let power = transmit_power(&self.model, &g);
        if power > self.model.power * (1.0 + 1e-9) {
            return Err(Error::ContractViolation(format!(
                "deployed power {power} exceeds budget {}",
                self.model.power
            )));
        }
        Ok(Deployment {
            mse: mse(&self.model, &g, &ch)?,
            precoder,
            power,
        })
    }

    fn loss_and_gradient(&self, x: &Vector, quad: &MseQuadratic) -> Result<(f64, Vector)> {
        match self.config.variant {
            HybridVariant::Envelope => {
                let shifted = x + self.corrector.correct(quad, x)?.e;
                Ok((quad.value(&shifted), quad.gradient(&shifted)))
            }
            HybridVariant::Convex => {
                let (v, g) = nonconvex_part(quad, x, self.config.eps, self.config.upsilon);
                Ok((quad.value(x) + v, quad.gradient(x) + g))
            }
        }
    }
}

impl StochasticProblem for HybridProblem {
    fn dim(&self) -> usize {
        self.model.real_dim()
    }

    fn draw_sample(&self, rng: &mut dyn rand::RngCore) -> Sample {
        self.channel.sample_context(rng)
    }

    fn loss(&self, x: &Vector, xi: &Sample) -> Result<f64> {
        Ok(self.loss_and_gradient(x, &self.quadratic(xi)?)?.0)
    }

    fn gradient(&self, x: &Vector, xi: &Sample) -> Result<Vector> {
        Ok(self.loss_and_gradient(x, &self.quadratic(xi)?)?.1)
    }

    fn surrogate(&self, anchor: &Vector, xi: &Sample) -> Result<Box<dyn Surrogate>> {
        let quad = self.quadratic(xi)?;
        let (offset, slope) = self.loss_and_gradient(anchor, &quad)?;
        let mu = self.config.mu;
        Ok(match self.config.variant {
            HybridVariant::Envelope => Box::new(LinearProxSurrogate {
                anchor: anchor.clone(),
                offset,
                slope,
                modulus: mu,
            }),
            HybridVariant::Convex => {
                let n = anchor.len();
                let lipschitz = 2.0 * quad.spectral_norm() + mu;
                Box::new(QuadraticSurrogate {
                    anchor: anchor.clone(),
                    offset,
                    slope,
                    hessian: &quad.a * 2.0 + nalgebra::DMatrix::identity(n, n) * mu,
                    modulus: mu,
                    lipschitz,
                })
            }
        })
    }

    fn constraint(&self) -> &ConstraintSet {
        &self.constraint
    }

    /// `L` is taken from the base channel's quadratic.
    fn constants(&self) -> ProblemConstants {
        let l = 2.0 * self.base_norm;
        let l_hat = match self.config.variant {
            HybridVariant::Envelope => self.config.mu,
            HybridVariant::Convex => l + self.config.mu,
        };
        ProblemConstants {
            lipschitz: l,
            surrogate_lipschitz: l_hat,
            modulus: self.config.mu,
        }
    }
}

/// Records the MSE and power of the deployed design in every slot.
pub struct DeployedMse<'a>(pub &'a HybridProblem);

impl Observer for DeployedMse<'_> {
    fn names(&self) -> Vec<String> {
        vec!["deployed_mse".into(), "deployed_power".into()]
    }

    fn observe(&self, _slot: usize, x: &Vector, xi: &Sample) -> Result<Vec<f64>> {
        let d = self.0.deploy(x, xi)?;
        Ok(vec![d.mse, d.power])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{central_difference, check_tangent};
    use crate::rng::{standard_normal, SeedTree, Stream};
    use crate::wsn::model::SensingDims;
    use rand::RngCore;

    fn setup(seed: u64, cfg: HybridConfig) -> HybridProblem {
        let seeds = SeedTree::new(seed);
        let model =
            SensingModel::build(SensingDims::uniform(2, 2, 2, 2, 2), 10.0, 30.0, &mut seeds.rng(Stream::Model, 0)).unwrap();
        let ch = ChannelProcess::draw(2, 4, 0.05, &mut seeds.rng(Stream::Channel, 0)).unwrap();
        make_hybrid_problem(model, ch, cfg).unwrap()
    }

    fn random_feasible(p: &HybridProblem, rng: &mut dyn RngCore) -> Vector {
        let x = Vector::from_fn(p.dim(), |_, _| standard_normal(rng));
        p.constraint().project(&x).unwrap()
    }

    #[test]
    fn tangent_condition_for_all_variants() {
        let mut exact = HybridConfig::envelope(0.05, 0.2);
        exact.correction = CorrectionMode::Exact;
        for cfg in [HybridConfig::envelope(0.05, 0.2), exact, HybridConfig::convex(0.02, 0.01, 1e-4)] {
            let p = setup(1, cfg);
            let mut rng = SeedTree::new(1).rng(Stream::Check, 0);
            for _ in 0..100 {
                let x = random_feasible(&p, &mut rng);
                let xi = p.draw_sample(&mut rng);
                assert!(check_tangent(&p, &x, &xi).unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn exact_envelope_gradient_matches_value_function() {
        let mut cfg = HybridConfig::envelope(0.05, 0.2);
        cfg.correction = CorrectionMode::Exact;
        let p = setup(2, cfg);
        let mut rng = SeedTree::new(2).rng(Stream::Check, 0);
        for _ in 0..10 {
            let x = random_feasible(&p, &mut rng) * 0.5;
            let xi = p.draw_sample(&mut rng);
            let s = p.surrogate(&x, &xi).unwrap();
            let g = s.gradient(&x);
            let fd = central_difference(&|v: &Vector| p.loss(v, &xi).unwrap(), &x, 1e-6);
            assert!((&g - &fd).norm() <= 1e-4 * g.norm().max(1e-8), "{}", (&g - &fd).norm() / g.norm());
        }
    }

    #[test]
    fn envelope_surrogate_is_exactly_strongly_convex() {
        let p = setup(3, HybridConfig::envelope(0.05, 0.2));
        let mut rng = SeedTree::new(3).rng(Stream::Check, 0);
        let a = random_feasible(&p, &mut rng);
        let s = p.surrogate(&a, &p.draw_sample(&mut rng)).unwrap();
        let (x, y) = (random_feasible(&p, &mut rng), random_feasible(&p, &mut rng));
        let gap = s.value(&x) - s.value(&y) - s.gradient(&y).dot(&(&x - &y));
        assert!((gap - 0.1 * (&x - &y).norm_squared()).abs() < 1e-10);
    }

    #[test]
    fn convex_surrogate_without_correction_is_mse_plus_prox() {
        let p = setup(4, HybridConfig::convex(0.0, 0.01, 1e-4));
        let mut rng = SeedTree::new(4).rng(Stream::Check, 0);
        let a = random_feasible(&p, &mut rng);
        let xi = p.draw_sample(&mut rng);
        let s = p.surrogate(&a, &xi).unwrap();
        let x = random_feasible(&p, &mut rng);
        let want = p.quadratic(&xi).unwrap().value(&x) + 0.005 * (&x - &a).norm_squared();
        assert!((s.value(&x) - want).abs() < 1e-10);
    }

    #[test]
    fn deployed_power_respects_budget() {
        for cfg in [HybridConfig::envelope(0.05, 0.2), HybridConfig::convex(0.02, 0.01, 1e-4)] {
            let p = setup(5, cfg);
            let mut rng = SeedTree::new(5).rng(Stream::Check, 0);
            let e = match p.constraint() {
                ConstraintSet::Ellipsoid(e) => e.clone(),
                _ => unreachable!(),
            };
            for _ in 0..200 {
                // Push iterates to the boundary where the guarantee is tight.
                let x = Vector::from_fn(p.dim(), |_, _| standard_normal(&mut rng)) * 10.0;
                let x = e.project(&x).unwrap().point;
                let d = p.deploy(&x, &p.draw_sample(&mut rng)).unwrap();
                assert!(d.power <= p.model().power * (1.0 + 1e-12));
                let g = p.model().layout.to_matrix(&d.precoder).unwrap();
                assert!(p.model().layout.to_vector(&g).is_ok());
            }
        }
    }

    #[test]
    fn oversized_correction_is_a_configuration_error() {
        let seeds = SeedTree::new(6);
        let model =
            SensingModel::build(SensingDims::uniform(2, 2, 2, 2, 2), 10.0, 30.0, &mut seeds.rng(Stream::Model, 0)).unwrap();
        let ch = ChannelProcess::draw(2, 4, 0.05, &mut seeds.rng(Stream::Channel, 0)).unwrap();
        assert!(matches!(
            make_hybrid_problem(model, ch, HybridConfig::envelope(10.0, 0.2)),
            Err(Error::Config(_))
        ));
    }
}
