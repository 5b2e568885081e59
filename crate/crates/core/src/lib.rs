//! Continuous-time tanh reservoir computer with per-node readout time-shifts.
//!
//! The crate is organised bottom-up:
//!
//! * [`dynamics`] integrates the chaotic benchmark systems that supply input
//!   and target signals, and measures their autocorrelation timescale.
//! * [`reservoir`] builds the random symmetric network and drives it with an
//!   input signal, recording node states and their exact time derivatives.
//! * [`readout`] assembles (optionally shifted) readout matrices, fits ridge
//!   readouts and scores them.
//! * [`timeshift`] draws random shifts or extracts optimized shifts from a
//!   joint fit on readouts and their derivatives.
//! * [`harness`] runs the parameter sweeps and writes CSV/JSON results.

pub mod dynamics;
pub mod error;
pub mod harness;
pub mod readout;
pub mod reservoir;
pub mod seed;
pub mod timeshift;

pub use error::{Error, Result};
