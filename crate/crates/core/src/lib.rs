#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod diagnostics;
pub mod ground_state;
pub mod io;
pub mod perturbed;
pub mod potential;
pub mod radial;
pub mod spectral;
