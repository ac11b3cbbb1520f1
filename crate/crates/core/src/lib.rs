//! Optimal control of steady second-grade fluids with Navier-slip walls,
//! discretized by a spectral Galerkin method in a finite-element Stokes
//! eigenbasis.

// NaN must fail the positivity checks, and element kernels index in lockstep.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod binio;
pub mod continuation;
pub mod control;
pub mod eigen;
pub mod error;
pub mod fem;
pub mod idlab;
pub mod linearized;
pub mod mesh;
pub mod quadrature;
pub mod reduced;
pub mod sensitivity;
pub mod state;
pub mod sparse;
pub mod workbench;

pub use error::{Error, Result};
