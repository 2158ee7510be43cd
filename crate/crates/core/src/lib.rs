// Negated float comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod demo;
pub mod error;
pub mod formats;
pub mod geometry;
pub mod plant;
pub mod policy;
pub mod retarget;
pub mod seed;
pub mod tactile;

pub use error::{Error, Result};
