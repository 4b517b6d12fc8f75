//! Simulation of α-stable Lévy space-time noise through its Poisson random
//! measure, stochastic integration against it, mild solutions of linear and
//! Lipschitz-nonlinear stochastic heat, cable, fractional-heat and wave
//! equations, and Monte-Carlo verification suites for the distributional
//! identities, tail bounds and moment inequalities involved.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod integral;
pub mod quad;
pub mod kernels;
pub mod noise;
pub mod rng;
pub mod solver;
pub mod stable;
pub mod verify;

pub use error::{Error, Result};
