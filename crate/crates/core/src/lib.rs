//! Centre-unstable manifolds of maps fixing a compact curve, computed by the
//! graph transform on a cutoff extension, plus edge-of-stability tooling for
//! 2x2 matrix factorisation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod eos;
pub mod extension;
pub mod linalg;
pub mod manifold;
pub mod nonsmooth;
pub mod surgery;
pub mod tolerances;
pub mod transform;
