//! Liquid state machine simulator with shared metabolic energy pools.
//!
//! The crate is organised around the life cycle of one experiment run:
//!
//! - [`topology`] builds the random spatial reservoir graph.
//! - [`energy`] assigns neurons to shared energy pools and gates spikes.
//! - [`dynamics`] steps the leaky integrate-and-fire reservoir over a sample.
//! - [`readout`] trains the linear readout with the normal equations.
//! - [`metrics`] measures separation quality and the Lyapunov estimate.
//! - [`quantization`] provides fixed-point formats and the digital variant.
//! - [`data`] loads, filters and splits EEG recordings (or synthesises them).
//! - [`harness`] runs single experiments, sweeps, statistics and result files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod quantization;
pub mod readout;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};
