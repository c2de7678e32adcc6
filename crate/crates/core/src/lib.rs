pub mod convergence;
pub mod error;
pub mod harness;
pub mod learners;
pub mod pattern;
pub mod schedule;
pub mod scheme;
pub mod trace;
