// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dp;
pub mod extquad;
pub mod json;
pub mod linalg;
pub mod moments;
pub mod problems;
