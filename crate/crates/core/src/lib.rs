//! Decoy-state quantum key distribution sharing a multicore fiber with
//! classical data.
//!
//! The crate models the quantum channel's noise budget (intercore leakage,
//! worst-case Raman crosstalk, detector dark counts), turns it into gains,
//! error rates and secure key rates, and drives the model through power
//! sweeps, calibration against target operating points and long-run
//! session emulation.
//!
//! ```
//! use mcf_qkd::engine::{simulate_point, Scenario};
//!
//! let result = simulate_point(&Scenario::default()).unwrap();
//! assert!((result.loss.total().value() - 14.1).abs() < 1e-9);
//! assert!(result.secure_finite_bps() > 0.0);
//! ```

// Guards written as `!(x > 0.0)` also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decoy;
pub mod engine;
pub mod error;
pub mod fiber;
pub mod io;
pub mod noise;
pub mod units;

pub use error::{Error, Result};
