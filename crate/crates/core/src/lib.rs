//! Numerical laboratory for singularly perturbed slow-fast diffusions with
//! small noise on both time scales.
//!
//! The slow component `X` is driven by a bounded drift `b(x, y)` and noise of
//! size `eps^alpha`; the fast component `Y` follows a gradient flow of the
//! potential `U(x, ·)` accelerated by `1/eps`, with noise `s(eps)/sqrt(eps)`.
//! As `eps -> 0` the fast process concentrates on the global minima of
//! `U(x, ·)` with weights proportional to `det(D²_y U)^{-1/2}`, and the slow
//! process follows the averaged (possibly discontinuous) limit ODE.
//!
//! Modules:
//!
//! * [`potential`] potentials, drifts, global-minimum search, assumption audits
//! * [`sde`] Euler-Maruyama for the coupled system and the frozen fast process
//! * [`fastproc`] Gibbs measures on grids, Laplace limits, relaxation times,
//!   action functional, quasipotentials and W-graph constants
//! * [`limit`] averaged drift, limit ODE, Filippov enlargement, convergence study
//! * [`filter`] bootstrap particle filter for the conditional law of `Y`
//! * [`diagnostics`] experiment orchestration and reports
//! * [`cli`] config parsing and command dispatch behind the `slowfast` binary

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
mod error;
pub mod fastproc;
pub mod filter;
pub mod io;
pub mod limit;
pub mod potential;
pub mod rng;
pub mod sde;

pub use error::{Error, Result};
pub use potential::{Drift, DriftSpec, MinimaOptions, MinimaSet, Potential, PotentialSpec};
pub use sde::{NoiseSchedule, SimConfig, TrajectoryPair};
