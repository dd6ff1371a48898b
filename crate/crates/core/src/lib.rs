//! Solvability analysis for Wiener-Hopf integral equations of the first kind,
//! `∫_0^∞ K(t - τ) φ(τ) dτ = f(t)` for `t >= 0`.

// `!(x > 0.0)` is deliberate: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod config;
pub mod kernel;
pub mod pipeline;
pub mod quad;
pub mod solver;
pub mod spaces;
pub mod spec_file;
pub mod symbol;
