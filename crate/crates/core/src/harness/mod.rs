//! Runs, local testing frames and their cost-saving metrics.

pub mod frame;
pub mod metrics;
pub mod run;

pub use frame::{colts_label, execute_frame, inflate_frame, inflation_for, FrameSpec, LocalFrame};
pub use metrics::{dacsr, discrepancy, evaluate, icsr, MetricsReport};
pub use run::{execute_run, FitFailure, FrameLevels, Inflation, NonViable, Run, RunSetup};
