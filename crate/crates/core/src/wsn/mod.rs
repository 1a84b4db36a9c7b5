//! Precoder design for parameter estimation over a coherent multiple-access
//! channel between `K` multi-antenna sensors and a fusion centre.

pub mod baselines;
pub mod channel;
pub mod hybrid;
pub mod model;
pub mod mse;
pub mod power;

pub use channel::ChannelProcess;
pub use baselines::{instantaneous_design, static_hindsight, OnlineSgd};
pub use hybrid::{make_hybrid_problem, DeployedMse, HybridConfig, HybridProblem, HybridVariant};
pub use model::{BlockLayout, CMatrix, SensingDims, SensingModel};
pub use mse::{mse, mse_gradient, mse_quadratic, MseQuadratic};
pub use power::{
    instantaneous_correction, power_shrink, shrink_omega, solve_power_constrained_qp, CorrectionMode, ShrinkNorm,
};
