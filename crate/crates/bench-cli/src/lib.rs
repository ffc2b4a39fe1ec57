//! Experiment driver for the i-SIR library: finite-state reports, pilot
//! timing fits, adaptive runs and fixed-N campaigns, all written as CSV or
//! JSON-lines.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod models;
