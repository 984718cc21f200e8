// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Voigt components are addressed by index throughout.
#![allow(clippy::needless_range_loop)]

pub mod arrayfile;
pub mod dataset;
pub mod error;
pub mod fft;
pub mod green;
pub mod grid;
pub mod homogenize;
pub mod image;
pub mod multiscale;
pub mod rve;
pub mod solver;
pub mod tensor;
