//! Nonparametric instrumental-variable regression under full independence
//! of the instrument and the structural error.
//!
//! The model is y = φ(z) + u with an instrument w satisfying u ⫫ w and
//! E(u) = 0. φ solves the nonlinear integral equation T(φ) = 0, where T(φ)
//! is the gap between the conditional (on w) and unconditional CDFs of the
//! centered residuals. The equation is ill-posed; [`solver`] regularizes it
//! by Landweber-Fridman iteration
//!
//!   φ̂_{j+1} = φ̂_j − c · T̂′* (T̂(φ̂_j)),
//!
//! with the iteration count selected by a minimum-empirical-norm stopping
//! rule under an N_max budget derived from the sample size.
//!
//! The crate also ships the building blocks around that solver: kernels of
//! arbitrary even order ([`kernels`]), kernel smoothers ([`smoothing`]), the
//! operator and its adjoint ([`operator`]), pseudo-true-value analysis for
//! underidentified discrete-instrument designs ([`ident`]), a parametric
//! Cramér-von Mises baseline ([`parametric`]) and seeded simulation DGPs
//! with a Monte Carlo driver ([`simulate`]).
//!
//! With the default `parallel` feature, replications and grid evaluations
//! run on rayon; outputs are bitwise identical to the sequential build.

pub mod error;
pub mod ident;
pub mod kernels;
pub mod operator;
pub mod par;
pub mod parametric;
pub mod rng;
pub mod simulate;
pub mod smoothing;
pub mod solver;
pub mod stats;

pub use error::{Error, Result};
pub use par::{parallel_enabled, set_parallel_enabled};
pub use smoothing::{CurveEstimate, Instrument, Sample};
