//! Orchestration: run configuration, runs, verification suites, the
//! kernel benchmark and the acceptance criteria.

pub mod bench;
pub mod checks;
pub mod criteria;
pub mod config;
pub mod run;
pub mod svg;
pub mod verify;
