// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod cli;
pub mod codec;
pub mod error;
pub mod localizer;
pub mod rng;
pub mod select;
pub mod sharing;
pub mod harness;
pub mod theory;
