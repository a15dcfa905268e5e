#![no_std]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bits;
pub mod constellation;
pub mod dgps;
pub mod geodesy;
pub mod lane;
pub mod matcher;
pub mod pnt;
pub mod signal;
