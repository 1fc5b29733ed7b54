//! Loop-group construction of spherical frontals and CMC surfaces.

// `!(a > b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod laurent;
pub mod factorization;
pub mod analytic;
pub mod potentials;
pub mod frame;
pub mod surface;
pub mod singularities;
pub mod io;
