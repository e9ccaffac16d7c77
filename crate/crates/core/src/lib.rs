//! Nuclear-norm penalized trace regression and matrix completion.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the common `f64` instantiation.

// `!(x > 0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod designs;
pub mod error;
pub mod estimators;
pub mod lasso;
pub mod linalg;
pub mod lowerbound;
pub mod rng;
pub mod scalar;
pub mod spectral_rank;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Matrix = linalg::DenseMatrix<f64>;
pub type Matrix32 = linalg::DenseMatrix<f32>;
pub type Design = designs::Design<f64>;
pub type NoiseModel = designs::NoiseModel<f64>;
pub type ObservationSet = designs::ObservationSet<f64>;
pub type LambdaRule = estimators::LambdaRule<f64>;
pub type SolverConfig = estimators::SolverConfig<f64>;
pub type LinearDesign = lasso::LinearDesign<f64>;
