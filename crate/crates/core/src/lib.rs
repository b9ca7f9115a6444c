//! Generalized Radon transforms on sampled fields, plus coherent-state and
//! group-representation tomography on finite-dimensional truncations.
//!
//! Modules:
//! - [`field`]: grids, phantoms, quadrature on grids, the `TOMOGRD1` file format
//! - [`radon_affine`]: line/hyperplane transforms and their inverses
//! - [`radon_deformed`]: transforms along diffeomorphic images of hyperplanes and quadrics
//! - [`cstomo`]: coherent-state symbols, quantizer, star product
//! - [`group_tomo`]: sampling functions and spectral tomograms for SU(2) spin-j

pub mod cstomo;
pub mod error;
pub mod field;
pub mod group_tomo;
pub mod levelset;
pub mod linalg;
pub mod quadrature;
pub mod radon_affine;
pub mod radon_deformed;
pub mod sampler;

pub use error::{Result, TomoError};
pub use field::{BoxDomain, ScalarField, TomogramTable};
pub use sampler::{TableSampler, TomogramSampler};

/// Number of worker threads requested through `TOMO_THREADS`, if set.
pub fn thread_cap() -> Option<usize> {
    std::env::var("TOMO_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}
