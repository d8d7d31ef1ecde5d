//! Multi-factor Markovian approximation of rough volatility models.
//!
//! The fractional kernel `K(t) = t^{H-1/2} / Γ(H+1/2)` is the Laplace transform
//! of a positive measure on the mean-reversion half-line. Discretizing that
//! measure on a partition `0 = η₀ < η₁ < … < ηₙ` gives a sum of exponentials
//! `Kⁿ(t) = Σ cᵢ e^{-γᵢ t}`, which turns the non-Markovian rough Heston
//! dynamics into an `n`-factor Markov system. This crate provides:
//!
//! - [`special`]: Gamma, Mittag-Leffler, the fractional resolvent and the
//!   forward variance curve.
//! - [`kernel`]: the fractional kernel, partitions, the exponential-sum
//!   kernels built from them, their L¹/L² errors, the analytic error bounds
//!   and partition optimization.
//! - [`riccati`]: the Riccati right-hand side, the `n`-dimensional
//!   multi-factor Riccati solver, the fractional Adams scheme and the
//!   log-price characteristic function.
//! - [`pricing`]: Lewis Fourier inversion, Black-Scholes, implied volatility,
//!   smiles and the Riccati error report.
//! - [`montecarlo`]: path simulation of the multi-factor model and a
//!   Volterra Euler reference scheme.
//! - [`timing`]: runtime scaling of the two Riccati solvers.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod kernel;
pub mod montecarlo;
pub mod params;
pub mod pricing;
pub mod quad;
pub mod riccati;
pub mod special;
pub mod timing;

pub use error::{Error, Result};

pub use kernel::{FactorChoice, FractionalKernel, MultiFactorKernel, Objective, Partition, VolKernel};
pub use num_complex::Complex64;
pub use params::{ModelParams, ThetaCurve};
pub use pricing::{CharacteristicFunction, IntegrationConfig, Smile, SmilePoint};
pub use riccati::{CharFnForm, GVariant, RiccatiSolution};
