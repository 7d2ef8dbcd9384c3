//! Wideband hybrid MIMO-OFDM channel estimation with online array calibration.
//!
//! The library models a base station and a user equipment with impaired
//! arrays (mutual coupling, per-element gain/phase, element spacing), a
//! multipath channel whose array responses squint across the band, and
//! hybrid-beamformed pilot observations. The estimator alternates between
//! path estimation (OMP on an angle-delay grid, then gradient refinement)
//! and closed-form or gradient updates of the array errors, using several
//! past frames that share the same array errors.
//!
//! Start from the examples:
//!
//! ```text
//! cargo run --example steering_squint
//! cargo run --example channel_synthesis
//! cargo run --example whitened_measurements
//! cargo run --example omp_on_grid
//! cargo run --example offgrid_refinement
//! cargo run --example coupling_model
//! cargo run --example element_calibration
//! cargo run --example calibrated_estimation
//! cargo run --release --example monte_carlo
//! ```
//!
//! The `squintcal` binary runs sweeps from a config file or preset.

pub mod array;
pub mod channel;
pub mod coupling;
pub mod element;
pub mod error;
pub mod estimator;
pub mod io;
pub mod linalg;
pub mod measurement;
pub mod model;
pub mod offgrid;
pub mod ongrid;
pub mod sim;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
