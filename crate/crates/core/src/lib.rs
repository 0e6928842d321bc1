//! Behavioral simulator and characterization toolkit for a second-order
//! discrete-time single-bit delta-sigma ADC designed for operation up to
//! 250 degC.
//!
//! Modules:
//! - [`modulator`]: the CIFB loop difference equations, stimulus
//!   generation and bitstream I/O.
//! - [`thermal`]: temperature-dependent non-idealities (junction and
//!   channel leakage, dummy compensation, clock boosting, kT/C noise,
//!   CMFB disturbance, supply-current estimate, electromigration check).
//! - [`decimator`]: sinc^3 cascaded-integrator-comb decimation.
//! - [`spectrum`]: windowed Welch power spectra.
//! - [`metrics`]: SNR / SINAD / THD / SFDR / ENOB / INL / Schreier FoM.
//! - [`harness`]: experiment plans, Monte-Carlo temperature sweeps,
//!   capture ingestion and CSV emission behind the `sdadc` CLI.

pub mod decimator;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod modulator;
pub mod spectrum;
pub mod thermal;

pub use error::{Error, Result};
