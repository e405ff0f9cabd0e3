//! Dyadic lattices, grid functions, maximal and singular operators, sparse families and weights.

pub mod czo;
pub mod dyadic;
pub mod maximal;
pub mod signal;
pub mod sparse;
pub mod weights;
