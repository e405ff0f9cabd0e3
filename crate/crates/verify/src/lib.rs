//! Experiment harness: inequality suites, fitted constants, decay curves and artifacts.

pub mod buckley;
pub mod config;
pub mod corpus;
pub mod decay;
pub mod fit;
pub mod report;
pub mod run;
pub mod suites;
