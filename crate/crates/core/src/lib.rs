//! Simulation and analysis toolkit for testing whether optical phases commute.
//!
//! A Sagnac interferometer with two phase elements (a liquid-crystal retarder
//! and a negative-index metamaterial) sits inside a Mach-Zehnder
//! interferometer. Non-commuting (quaternionic) phases leak light into the
//! Sagnac dark port, which shows up as a change of the Mach-Zehnder fringe
//! visibility. The crate models the apparatus, simulates photon-counting
//! interferograms, fits them, and turns campaign statistics into a bound on
//! the non-commutativity.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod fitcore;
pub mod hypercomplex;
pub mod interferometer;
pub mod io;
pub mod metaoptics;
pub mod photonsim;
