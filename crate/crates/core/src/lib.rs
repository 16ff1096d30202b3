//! Simulation and estimation of COGARCH(1,1) processes driven by Lévy
//! processes: exact simulation, discrete GARCH embeddings on irregular grids
//! with pathwise convergence diagnostics, and pseudo-maximum-likelihood
//! fitting of irregularly spaced returns.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cogarch;
pub mod embedding;
pub mod error;
pub mod grid;
pub mod io;
pub mod levy;
pub mod pml;
pub mod rng;
pub mod study;

pub use cogarch::{BivariatePath, CogarchParams, PathFlavor, Sigma0Policy};
pub use error::{Error, Result};
pub use grid::Grid;
pub use levy::{InnovationSet, LevyPath, LevySpec};
pub use pml::{FitConfig, FitResult, ReturnsSeries, WeightScheme};
