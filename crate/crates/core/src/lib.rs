//! Recovery of multicomponent images from blurred, decimated and noisy
//! observations under a structure-tensor total-variation constraint.
//!
//! The problem solved is
//!
//! ```text
//! minimize ‖A x − z‖²  subject to  x ∈ [lo, hi]^{N·R},  Σ_ℓ τ_ℓ ‖X^(ℓ)‖_p ≤ η
//! ```
//!
//! where `X^(ℓ)` is the block of local (TV) or non-local (NLTV) differences
//! of all components at pixel `ℓ` and `‖·‖_p` a Schatten norm.

mod binio;
pub mod error;
pub mod image;
pub mod matrix;
pub mod nlweights;
pub mod operators;
pub mod pipeline;
pub mod projections;
pub mod solvers;

pub use error::{Error, Result};
pub use image::{BoxConstraint, DegradedObservation, Dims, MultiComponentImage, WindowSpec};
pub use nlweights::{build_graph, NeighborhoodGraph, PatchSpec};
pub use operators::{AnalysisOperator, Coupling, DegradationOperator, LinearOperator, Regularizer, TensorField};
pub use projections::{ConstraintSpec, Schatten};
pub use solvers::{mlfbf_solve, sdmm_solve, ConstraintMode, ProblemInstance, SolverConfig, SolverKind, SolverTrace};

/// The guide's code listings, compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/images.md")]
    mod images {}
    #[doc = include_str!("../../../book/src/regularizers.md")]
    mod regularizers {}
    #[doc = include_str!("../../../book/src/projections.md")]
    mod projections {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
