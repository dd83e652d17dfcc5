//! Matrix-free solvers for the cubic regularization subproblem
//!
//! `min_x b^T x + 1/2 x^T A x + rho/3 ||x||^3`
//!
//! built on approximate secular equations: a few extreme eigenpairs of `A`
//! plus a single surrogate for the unseen spectrum give a scalar equation
//! whose root fixes the shift, after which one shifted linear solve
//! recovers the step. Exact, Krylov and gradient-descent baselines, an ARC
//! outer loop and instance generators are included.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod vecops;

pub mod arc;
pub mod cli;
pub mod crs;
pub mod operators;
pub mod problems;
pub mod secular;
