//! Discrete least-squares approximation over optimized downward closed
//! polynomial spaces.
//!
//! The library provides, in arbitrary dimension:
//!
//! - multi-index sets with the downward closed and anchored structure,
//!   their enumeration, injective encodings and cardinality bounds
//!   ([`index_sets`]);
//! - tensorized orthonormal Jacobi bases for beta densities, the stability
//!   quantity K(P_Λ) and Gauss–Jacobi quadrature ([`jacobi`]);
//! - reproducible i.i.d. sampling from the tensorized density and the
//!   empirical seminorm ([`sampling`]);
//! - design matrices, Gramians, stable least-squares projection,
//!   truncation and exact L² error evaluation ([`least_squares`]);
//! - optimized index-set selection: exhaustive, greedy (structured OMP)
//!   and relaxed search, best n-term oracles and stability constants
//!   ([`model_selection`]);
//! - the closed-form sample-size conditions with a minimal-m solver
//!   ([`conditions`]);
//! - Monte Carlo experiment drivers with deterministic CSV reports
//!   ([`experiments`]).

pub mod conditions;
pub mod error;
pub mod jacobi;
pub mod least_squares;
pub mod model_selection;
pub mod report;
pub mod sampling;
pub mod index_sets;

pub use error::{Error, Result};

/// Library version string embedded in report sidecars.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
