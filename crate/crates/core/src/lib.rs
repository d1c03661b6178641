#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod expansion;
pub mod impliedvol;
pub mod kernel;
pub mod model;
pub mod opalg;
pub mod timealg;
pub mod validate;
