//! Maximum-entropy modeling over linear phenomenological constraints.
//!
//! The crate is organized bottom-up:
//!
//! - [`simplex`]: microstate spaces, distributions, counts, entropy and divergence
//!   primitives, multinomial sampling.
//! - [`constraints`]: canonicalization of redundant coefficient matrices into
//!   reduced row-echelon *architectures*, kernel bases and nesting maps.
//! - [`solver`]: the MaxEnt distribution of an equivalence class via Newton-Raphson
//!   on the Lagrange multipliers or iterative proportional fitting, plus a sampler
//!   for class members around the MaxEnt point.
//! - [`selection`]: chi-squared machinery, empirical and likelihood-ratio p-values,
//!   BIC/AIC, expected entropy, the four selection procedures and Monte-Carlo
//!   training/test error estimators.
//! - [`ising`]: lattice-gas Ising Hamiltonians, interaction closures and the
//!   exhaustive enumeration of candidate models.
//! - [`bench`]: the end-to-end inverse-Ising model-selection benchmark.
//!
//! All logarithms are natural logarithms; entropies and divergences are in nats.

#![forbid(unsafe_code)]

pub mod bench;
pub mod constraints;
mod error;
pub mod ising;
pub mod linalg;
pub mod selection;
pub mod simplex;
pub mod solver;

pub use error::{Error, Result};

pub use constraints::{ArchitectureMatrix, CoefficientMatrix, KernelBasis, NestingMap};
pub use selection::{Method, ModelScore, SelectionConfig};
pub use simplex::{CountVector, Distribution, MicrostateSpace};
pub use solver::{MaxEntSolution, SolveOptions};
