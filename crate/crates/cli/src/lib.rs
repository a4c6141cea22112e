//! Experiment orchestration for the `actdet` binary: spec parsing and
//! resolution, (policy × seed) cell execution, and figure emission.

pub mod figures;
pub mod runner;
pub mod spec;
