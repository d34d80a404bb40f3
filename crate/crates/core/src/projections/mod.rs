//! Projection and proximity kernels.

mod constraint;
mod matrix_epi;
mod scalar;
mod svd;

pub use constraint::{project_d_direct, ConstraintSpec, EpiAuxiliary};
pub use matrix_epi::{project_epi_matrix, Schatten};
pub use scalar::{project_box, project_epi_abs, project_epi_l2, project_epi_linf, project_halfspace, project_l1_ball};
pub use svd::{thin_svd, SvdResult};
