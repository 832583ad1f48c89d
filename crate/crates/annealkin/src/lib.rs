//! Simulated annealing driven by the kinetic Langevin equation.
//!
//! The crate provides the pieces needed to study when annealing with inertia
//! finds global minima: potential landscapes and their discretizations
//! (`landscape`), graph-based barrier/critical-height analysis (`elevation`),
//! cooling and friction schedules (`schedules`), SDE integrators
//! (`integrator`), local linearization with Lyapunov certificates
//! (`linearization`), Gibbs-measure diagnostics (`gibbs`), and a Monte Carlo
//! harness that turns the convergence statements into repeatable experiments
//! (`montecarlo`).

pub mod elevation;
mod error;
pub mod gibbs;
pub mod integrator;
pub mod landscape;
pub mod linearization;
pub mod montecarlo;
pub mod schedules;

pub use error::{Error, Result};
