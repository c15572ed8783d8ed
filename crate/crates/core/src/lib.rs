//! Numerical laboratory for the planar oscillator
//! `x' = x - y - x(t - tau)(x^2 + y^2)`, `y' = x + y - y(t - tau)(x^2 + y^2)`.
//!
//! * [`model`]: the equations in Cartesian and polar form, constructed
//!   histories, closed-form references.
//! * [`integrator`]: adaptive Dormand-Prince with dense output, method of
//!   steps for the delay system, event location.
//! * [`blowup`]: run classification, blow-up time extrapolation and the
//!   checks behind the blow-up construction.
//! * [`periodic`]: constant-radius periodic solutions and their branches.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blowup;
pub mod integrator;
pub mod model;
pub mod periodic;
