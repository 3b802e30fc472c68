#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons reject NaN parameters

pub mod checks;
pub mod decay;
pub mod error;
pub mod greens;
pub mod harness;
pub mod linalg;
pub mod logpot;
pub mod model;
pub mod polystruct;
pub mod quad;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
