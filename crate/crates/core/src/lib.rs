//! Exponential integrators for semilinear integro-differential equations
//! u' + int_0^t b(t - s) A u(s) ds = f(t, u) on (0, 1) with Dirichlet data,
//! discretised by sine modes. Each mode is advanced with its scalar resolvent
//! (Riesz or damped exponential kernel), so linear problems are exact in the
//! homogeneous case.

// NaN-rejecting checks are written as !(x > 0.0)
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod mlf;
pub mod oracle;
pub mod quadrature;
pub mod resolvent;
pub mod solvers;
pub mod spectral;
pub mod tableau;

pub use error::{Error, Result};
