//! Poisson and heat equations on canonical domains driven by random
//! Dirichlet boundary data.
//!
//! The crate evaluates explicit heat and Green kernels with their inward
//! normal derivatives, Dirichlet maps, the pointwise solution fields
//! generated by five families of boundary noise, exact second-moment
//! formulas, and Monte Carlo and regression machinery for measuring how
//! fast `E u²(x)` blows up as `x` approaches the boundary.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(a < b)` also rejects NaN
#![allow(clippy::type_complexity)]

pub mod dirichlet;
pub mod domains;
pub mod error;
pub mod estimators;
pub mod fields;
pub mod harness;
pub mod kernels;
pub mod noise;
pub mod quadrature;
pub mod special;

pub use domains::{BoundaryQuadrature, Domain, TimeGrid};
pub use error::{Error, Result};

pub use kernels::KernelConfig;
pub use noise::{BoundaryNoiseSpec, NoiseRealization};
