//! Numerical toolkit for the stochastic generalized Burgers–Huxley equation
//!
//! ```text
//! du = [ν u_xx − α u^δ u_x + β u(1 − u^δ)(u^δ − γ)] dt + √ε g(t, x, u) dW^Q,   x ∈ (0, 1)
//! ```
//!
//! with homogeneous Dirichlet boundary conditions and Q-Wiener noise that is
//! white in time and colored in space. Everything is discretized in the sine
//! basis of the Dirichlet Laplacian and stepped with an exponential Euler
//! scheme in mild form.
//!
//! * [`spectral`]: basis, transforms, heat kernel, kernel-estimate fits
//! * [`model`]: parameters, nonlinearities and their derivatives, noise coefficient
//! * [`noise`]: Q-Wiener increments, Brownian-bridge refinement, control paths
//! * [`solvers`]: deterministic, stochastic, linearized, rescaled, controlled and skeleton problems
//! * [`deviation`]: speed functions, minimum-energy rate function, Gramian, tail estimates
//! * [`montecarlo`]: coupled ensembles, convergence fits, closed-form OU oracle

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod deviation;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod noise;
pub mod solvers;
pub mod spectral;

pub use error::{Error, Result};
