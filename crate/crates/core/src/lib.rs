//! Squeezed supermodes and four-node cluster states from a below-threshold
//! optical parametric oscillator pumped with OAM `±1` Laguerre–Gaussian beams.
//!
//! The crate follows the full chain:
//!
//! - [`lg_overlap`]: mode functions and overlap couplings vs waist ratio,
//! - [`langevin`] / [`covariance`]: five-mode Langevin system and its
//!   zero-frequency spectra (closed forms and a generic linear solve),
//! - [`supermode`]: coupling-matrix eigenmodes and their squeezing,
//! - [`cluster`]: cluster unitary, nullifiers and the van Loock–Furusawa test,
//! - [`sde`]: Monte Carlo check of the spectra with complex-noise trajectories,
//! - [`reports`]: CSV/JSON report generation behind the `oamcluster` binary.

pub mod cluster;
pub mod covariance;
pub mod error;
pub mod langevin;
pub mod lg_overlap;
pub mod quadrature;
pub mod reports;
pub mod sde;
pub mod supermode;

pub use error::{Error, Result};
