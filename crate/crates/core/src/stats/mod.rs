//! Experiment harness: configuration, replications, hypothesis tests and
//! convergence reports.

pub mod config;
pub mod experiments;
pub mod hypothesis;
pub mod replicate;
pub mod report;
