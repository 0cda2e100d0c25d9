//! Numerical lab for ∂ₜw + T^K w = 0 with a singular, possibly
//! non-symmetric-in-time, symmetric-in-space kernel K.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod error;
pub mod estimates;
pub mod evolution;
pub mod exec;
pub mod expr;
pub mod grid;
pub mod harness;
pub mod kernels;
pub mod nonlinear;
pub mod nonlocal_op;
pub mod quad;
pub mod solver;
pub mod testclass;

pub use error::{Error, Result};
pub use grid::{Exterior, Grid, GridFunction};
pub use kernels::{Kernel, KernelParams};
