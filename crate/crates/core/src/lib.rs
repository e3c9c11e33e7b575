//! Simulation toolkit for a dissipation-engineered fluxonium with
//! fluorescence readout and two-tone unconditional reset.
//!
//! Internal units are rad/us for angular frequencies, us for times and
//! kelvin for temperature. Conversions live in [`units`].

pub mod config;
pub mod dissipation;
pub mod dynamics;
pub mod error;
pub mod filter;
pub mod qubit;
pub mod readout;
pub mod reset;
pub mod units;

pub use error::{Error, Result};
