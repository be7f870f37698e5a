// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod error;
pub mod fit;
pub mod grid;
pub mod heuristic;
pub mod hyperbolic;
pub mod numeric;
pub mod ode;
pub mod parabolic;
pub mod remainder;
pub mod spectral;
