//! Simulation and stability certificates for agentic control loops.
//!
//! An agentic loop is modelled as a hybrid system: a delayed linear flow
//! per mode, a slowly adapting parameter vector, a memory state, a
//! drifting goal, discrete mode switches chosen by a policy, and
//! architecture reconfigurations that may reset part of the state.
//!
//! The crate offers two views of the same loop:
//!
//! - [`engine::simulate`] integrates it and classifies the outcome;
//! - [`budget::effective_margin`] predicts the outcome from constants,
//!   deducting one term per mechanism from the nominal decay rate.
//!
//! ```
//! use agentic_control::budget::{effective_margin, BudgetConstants};
//!
//! let report = effective_margin(&BudgetConstants::coupled(0.15, 0.03, 4.0)).unwrap();
//! assert!((report.lambda - 0.217).abs() < 1e-3);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;

pub mod budget;
pub mod commands;
pub mod config;
pub mod engine;
pub mod experiments;
pub mod io;
pub mod lyapunov;
pub mod model;
pub mod policy;

pub use error::{Error, Result};
