//! Link-level simulation of spectrum-skirt-filling microwave transmission.
//!
//! The crate designs pulse shapes that fill a regulatory spectral mask
//! ([`spectral`]), runs them through a Rummler multipath channel with Wiener
//! phase noise ([`link`]), removes the resulting intersymbol interference with
//! linear, decision-feedback or Tomlinson-Harashima structures ([`equalize`]),
//! tracks the carrier phase with a DPLL or a pilot-anchored BCJR phase trellis
//! ([`phasesync`]) and scores the outcome as SER and achievable rate
//! ([`metrics`]). [`sim`] ties it together into reproducible Monte-Carlo sweeps.

pub mod equalize;
pub mod error;
pub mod io;
pub mod link;
pub mod metrics;
pub mod phasesync;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Sample rate of the simulated transmitter in Hz. Normalized frequency 0.5
/// corresponds to 51.2 MHz.
pub const SAMPLE_RATE_HZ: f64 = 102.4e6;
