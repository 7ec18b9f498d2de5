#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod convexfn;
pub mod error;
pub mod estimate;
pub mod extreal;
pub mod hulls;
pub mod indexation;
pub mod linearize;
pub mod linsys;
pub mod norms;

pub use error::{Error, Result};
