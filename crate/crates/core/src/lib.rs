//! Learn a sparse variational Gaussian process model of an unknown stochastic
//! system from sampled transitions, then steer the state mean and covariance of
//! the system to target values with a greedy shrinking-horizon sequence of
//! linearized covariance steering problems.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

pub mod dynamics;
mod error;
pub mod gp;
pub mod greedy;
pub mod lcs;
pub mod linalg;
mod scalar;
pub mod sdp;
pub mod ut;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Dataset = gp::Dataset<f64>;
pub type SvgpModel = gp::SvgpModel<f64>;
pub type KernelParams = gp::KernelParams<f64>;
pub type UnicycleParams = dynamics::UnicycleParams<f64>;
pub type SamplingBox = dynamics::SamplingBox<f64>;
pub type AnalyticUnicycle = dynamics::AnalyticUnicycle<f64>;
pub type SvgpDynamics = dynamics::SvgpDynamics<f64>;
pub type LinearizedModel = dynamics::LinearizedModel<f64>;
pub type GaussianState = ut::GaussianState<f64>;
pub type AffineLaw = ut::AffineLaw<f64>;
pub type UtParams = ut::UtParams<f64>;
pub type LmiQpProblem = sdp::LmiQpProblem<f64>;
pub type SolverSettings = sdp::SolverSettings<f64>;
pub type SolveReport = sdp::SolveReport<f64>;
pub type SteeringTarget = lcs::SteeringTarget<f64>;
pub type PolicyParams = lcs::PolicyParams<f64>;
pub type LcsSettings = lcs::LcsSettings<f64>;
pub type LcsSolution = lcs::LcsSolution<f64>;
pub type SteeringScenario = greedy::SteeringScenario<f64>;
pub type SteeringTrace = greedy::SteeringTrace<f64>;
pub type RolloutReport = greedy::RolloutReport<f64>;
