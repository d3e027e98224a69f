//! Grids, multilinear interpolation, warping and differential operators.
//!
//! Layout is row-major with the last axis fastest. Vector fields interleave
//! their components per voxel. Displacements and velocities are in voxel
//! units; physical spacing only enters through [`VectorField::magnitude_mm`]
//! and the evaluation metrics.

mod diff;
pub(crate) mod filter;
mod grid;
pub(crate) mod interp;

pub use diff::{gradient_operator, gradient_operator_adjoint, jacobian_determinant};
pub(crate) use diff::squared_gradient_norm_and_normal;
pub use filter::gaussian_blur;
pub use grid::{GridSpec, LabelField, ScalarField, VectorField};
pub use interp::{interpolate_scalar, interpolate_vector, warp, warp_labels};
