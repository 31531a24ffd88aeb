//! Adaptive lateral and longitudinal control of a four-wheel electric
//! vehicle: nonlinear plant, LPV prediction model with RLS tire stiffness
//! estimation, PSO-tuned PID speed control, and a constrained MPC steering
//! controller with a stability envelope.
//!
//! Numerical modules are generic over [`Real`] (`f32` or `f64`); aliases for
//! both precisions are exported at the crate root. The simulation harness is
//! `f64` only.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod envelope;
pub mod harness;
pub mod error;
pub mod lpv;
pub mod mpc;
pub mod pid;
pub mod plant;
pub mod pso;
pub mod qp;
pub mod rls;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{wrap_angle, Real};

pub type PlantF64 = plant::Plant<f64>;
pub type PlantF32 = plant::Plant<f32>;
pub type VehicleParamsF64 = plant::VehicleParams<f64>;
pub type VehicleParamsF32 = plant::VehicleParams<f32>;
pub type PlantStateF64 = plant::PlantState<f64>;
pub type PlantStateF32 = plant::PlantState<f32>;
pub type LtiInstanceF64 = lpv::LtiInstance<f64>;
pub type LtiInstanceF32 = lpv::LtiInstance<f32>;
pub type RlsEstimatorF64 = rls::RlsEstimator<f64>;
pub type RlsEstimatorF32 = rls::RlsEstimator<f32>;
pub type PidControllerF64 = pid::PidController<f64>;
pub type PidControllerF32 = pid::PidController<f32>;
pub type PsoConfigF64 = pso::PsoConfig<f64>;
pub type PsoConfigF32 = pso::PsoConfig<f32>;
pub type QpProblemF64 = qp::QpProblem<f64>;
pub type QpProblemF32 = qp::QpProblem<f32>;
pub type MpcConfigF64 = mpc::MpcConfig<f64>;
pub type MpcConfigF32 = mpc::MpcConfig<f32>;
pub type LateralMpcF64 = mpc::LateralMpc<f64>;
pub type LateralMpcF32 = mpc::LateralMpc<f32>;
