//! Estimation of a two-phase spin rotation `exp(i(phi_x J_x + phi_y J_y))`.
//!
//! The crate provides exact spin-j operator algebra, quantum Fisher information
//! matrices computed along two independent routes, closed-form sensitivities
//! for the joint, sequential and spin-measurement strategies, spin-squeezing
//! diagnostics, Monte Carlo estimation experiments and a probe-state optimizer.

#![forbid(unsafe_code)]

pub mod error;
pub mod linalg;
pub mod montecarlo;
pub mod optimize;
pub mod parallel;
pub mod qfi;
pub mod spin;
pub mod squeezing;
pub mod state;
pub mod strategy;

pub use error::{Error, Result};
pub use qfi::{PhasePair, QfiMatrix, QfiOrder};
pub use spin::{Axis, CompositeSpace, Operator, Parity, SpinOps, SpinQuantum};
pub use state::{StateSpec, StateVector};
