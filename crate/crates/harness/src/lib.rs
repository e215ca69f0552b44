//! Experiment harness: scenario configs, seeded runs and sweeps, CSV
//! emission, and the verification commands (gradient check, oracle gap).

pub mod config;
pub mod gradcheck;
pub mod metrics;
pub mod oracle;
pub mod runner;
pub mod stats;
