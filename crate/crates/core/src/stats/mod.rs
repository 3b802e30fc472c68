//! Reproducible Monte Carlo estimators and experiments.

mod estimate;
mod experiments;

pub use estimate::*;
pub use experiments::*;
