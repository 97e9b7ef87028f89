//! File formats, capture construction, offline processing, sweeps and reports.

pub mod capture_spec;
pub mod config;
pub mod iq;
pub mod process;
pub mod report;
pub mod stats;
pub mod sweep;
