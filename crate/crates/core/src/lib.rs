//! Numerical laboratory for the 1D backward–forward diffusion–convection
//! equation `u_t = (Φ(u_x))_x + Ψ(x, u_x)`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod fit;
pub mod interp;
pub mod io;
pub mod lemma;
pub mod model;
pub mod regions;
pub mod solver;
pub mod transform;
