// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod governor;
pub mod harness;
pub mod numkit;
pub mod plant;
pub mod sac;
pub mod srsm;
