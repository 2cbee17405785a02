//! Simulation, martingale-measure construction and variance-minimizing
//! hedging for a market whose price and volatility factor are driven by a
//! two-dimensional Brownian motion and a two-dimensional compensated
//! Poisson process.
//!
//! The crate is organized around the pipeline the batch CLI runs:
//!
//! * [`coeffs`] — deterministic model inputs and their validation;
//! * [`simulate`] — driving noise and path evolution under the historical
//!   or a shifted martingale measure;
//! * [`measure`] — likelihood-ratio densities, the martingale condition and
//!   the entropy-minimizing shift;
//! * [`malliavin`] — pathwise derivative operators for the call payoff and
//!   their conditional-expectation estimators;
//! * [`hedge`] — the variance-minimizing hedge ratio, replication and
//!   hedging-error measurement;
//! * [`report`] — Monte Carlo reports with order-deterministic reductions.

pub mod coeffs;
pub mod error;
pub mod hedge;
pub mod malliavin;
pub mod measure;
pub mod report;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
