//! Numerical laboratory for the σ₂-Hessian equation.
//!
//! Cone algebra and closed-form constants live in [`cone`]; the Newton
//! solver in [`solver`]; log-Laplacian and Jacobi residuals in [`jacobi`];
//! the doubling experiment in [`doubling`]; Wolff potentials, Harnack and
//! Hölder measurements in [`potential`]; and the batch runner in [`cli`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod rng;
pub mod linalg;
pub mod cone;
pub mod grid;
pub mod rhs;
pub mod solver;
pub mod report;
pub mod jacobi;
pub mod doubling;
pub mod potential;
pub mod cli;
