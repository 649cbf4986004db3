//! Numerical toolkit for lattice Schrödinger operators `H = H₀ + λ V_S^ω`
//! whose random potential lives on a sparse set `S ⊂ ℤ^ν`.
//!
//! The crate computes fractional norms of translation-invariant kernels,
//! fractional moments of finite-volume Green functions, decoupling constants
//! and localization thresholds, free-evolution kernels and their dispersive
//! decay, sparseness integrals, and eigenvector diagnostics near the mobility
//! edges. Closed-form pieces are generic over [`Real`] (`f32`/`f64`); the
//! aliases below fix the usual `f64` choice.

pub mod bessel;
pub mod disorder;
pub mod dynamics;
pub mod error;
pub mod fourier;
pub mod lattice;
pub mod linalg;
pub mod operators;
pub mod quadrature;
pub mod resolvent;
pub mod rng;
pub mod scalar;
pub mod spectra;
pub mod stats;

pub use error::{Error, Result};
pub use lattice::{Cube, Generator, Site, SiteSet, SparseSet};
pub use scalar::Real;

pub type Kernel = operators::KernelOperator<f64>;
pub type KernelF32 = operators::KernelOperator<f32>;
pub type Symbol = operators::SymbolSpec<f64>;
pub type SymbolF32 = operators::SymbolSpec<f32>;
pub type RunningStats = stats::RunningStats<f64>;
