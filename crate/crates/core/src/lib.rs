//! Relay extremum-seeking control of a forced, drifting Van der Pol
//! oscillator, driven either by the raw measured state or by the energy of the
//! measurement in the dominant modes of an EDMD-fitted Koopman operator.
//!
//! Pipeline: [`experiments::train`] fits a [`lifting::KoopmanModel`] from
//! interference-corrupted trajectories, [`experiments::static_map`] sweeps the
//! tuning parameter, [`experiments::run_closed_loop`] runs the controller and
//! [`experiments::compute_metrics`] scores the run.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod lifting;
pub mod plant;
pub mod signal;

pub use error::{Error, Result};
pub use exec::Execution;
