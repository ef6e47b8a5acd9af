//! Numerical lab for damped wave equations `u_tt + b(t) u_t = Δu + c(t)·∇u + d(t) u + N`
//! with time-dependent damping: similarity-frame decomposition, energy
//! ladders, remainder envelopes and diffusion-phenomenon rate fits.

// `!(x > y)` is how NaN gets rejected alongside out-of-range values, and
// index loops over several parallel spectral arrays read better than zips.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod coeffs;
pub mod fields;
pub mod nonlinearity;
pub mod dynamics;
pub mod decompose;
pub mod energy;
pub mod analysis;
pub mod config;
pub mod store;
pub mod pipeline;
pub mod selftest;
