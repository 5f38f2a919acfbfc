//! Learnability experiments for neural quantum states on disordered spin and
//! fermion Hamiltonians.
//!
//! Every numerical type is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases below fix the scalar for the common cases.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod basis;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod linalg;
pub mod models;
pub mod optimize;
pub mod scalar;
pub mod seed;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Hamiltonian = models::HamiltonianOperator<f64>;
pub type Disorder = models::DisorderRealization<f64>;
pub type GroundState = exact::GroundState<f64>;
pub type Ansatz = ansatz::Ansatz<f64>;
pub type Parameters = ansatz::FlatParameters<f64>;
pub type TrainResult = optimize::TrainResult<f64>;
pub type Instance = experiments::Instance<f64>;

pub type Hamiltonian32 = models::HamiltonianOperator<f32>;
pub type Disorder32 = models::DisorderRealization<f32>;
pub type GroundState32 = exact::GroundState<f32>;
pub type Ansatz32 = ansatz::Ansatz<f32>;
pub type Parameters32 = ansatz::FlatParameters<f32>;
pub type TrainResult32 = optimize::TrainResult<f32>;
pub type Instance32 = experiments::Instance<f32>;
