//! Diffusion LMS and diffusion NLMS over a network with a fusion center.
//!
//! The crate has two halves that are meant to be compared against each other:
//!
//! * [`sim`] runs the actual CTA/ATC fusion-center algorithms on simulated
//!   cyclostationary inputs and a random-walk plant, averaging the fusion
//!   deviation over many independent Monte Carlo runs.
//! * [`theory`] evaluates the closed-form mean and mean-square-deviation
//!   recursions (per-tap general model and the scalar slow-power model) and
//!   their steady-state fixed points.
//!
//! [`design`] holds the stability bounds and optimal combination weights, and
//! [`harness`] ties everything together into declarative experiments, CSV
//! output and the `fclms` command line tool.

pub mod design;
pub mod error;
pub mod harness;
pub mod signal;
pub mod sim;
pub mod theory;

pub use error::{Error, Result};

/// Converts a linear power ratio to decibels.
pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
