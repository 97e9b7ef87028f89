//! Simulation and processing toolkit for passive SRS sensing from a UAV.
//!
//! The chain is: [`waveform`] builds comb-2 SRS symbols, [`channel`] pushes
//! them through a tapped-delay-line channel, [`sync`] finds the repetition
//! structure, [`ident`] separates users by cyclic shift, [`locate`] turns
//! per-position metrics into position estimates and [`mission`] flies the
//! whole thing. [`harness`] holds file formats, sweeps and the CLI glue.

pub mod capture;
pub mod channel;
pub mod dsp;
pub mod error;
pub mod harness;
pub mod ident;
pub mod locate;
pub mod mission;
pub mod seed;
pub mod sync;
pub mod waveform;

pub use capture::IqCapture;
pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
