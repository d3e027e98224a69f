//! Finite-difference operators on vector fields.

use super::grid::{ScalarField, VectorField};
use crate::error::{Error, Result};

/// Per-voxel `det(I + grad u)` in voxel units. Central differences in the
/// interior, one-sided differences on the boundary faces.
pub fn jacobian_determinant(displacement: &VectorField) -> ScalarField {
    let grid = displacement.grid();
    let d = grid.ndim();
    let dims = grid.dims();
    let strides = grid.strides();
    let u = displacement.values();
    let mut out = Vec::with_capacity(grid.num_voxels());
    let mut jac = [[0.0f64; 3]; 3];
    for i in 0..grid.num_voxels() {
        let c = grid.coords(i);
        for a in 0..d {
            let (lo, hi, h) = if c[a] == 0 {
                (i, i + strides[a], 1.0)
            } else if c[a] == dims[a] - 1 {
                (i - strides[a], i, 1.0)
            } else {
                (i - strides[a], i + strides[a], 2.0)
            };
            for comp in 0..d {
                let deriv = (u[hi * d + comp] - u[lo * d + comp]) / h;
                jac[comp][a] = deriv + if comp == a { 1.0 } else { 0.0 };
            }
        }
        let det = if d == 2 {
            jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0]
        } else {
            jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1])
                - jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0])
                + jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0])
        };
        out.push(det);
    }
    ScalarField::from_parts_unchecked(grid.clone(), out)
}

/// Forward differences of every component along every axis.
///
/// Entry `a` of the result holds `w(x + e_a) - w(x)` for all components,
/// with the trailing slab along `a` set to zero.
pub fn gradient_operator(field: &VectorField) -> Vec<VectorField> {
    let grid = field.grid();
    let d = grid.ndim();
    let dims = grid.dims();
    let strides = grid.strides();
    let w = field.values();
    (0..d)
        .map(|a| {
            let mut out = vec![0.0; w.len()];
            for i in 0..grid.num_voxels() {
                if grid.coords(i)[a] + 1 < dims[a] {
                    let j = i + strides[a];
                    for comp in 0..d {
                        out[i * d + comp] = w[j * d + comp] - w[i * d + comp];
                    }
                }
            }
            VectorField::from_parts_unchecked(grid.clone(), out)
        })
        .collect()
}

/// Transpose of [`gradient_operator`].
pub fn gradient_operator_adjoint(grads: &[VectorField]) -> Result<VectorField> {
    let first = grads
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty gradient stack".into()))?;
    let grid = first.grid();
    let d = grid.ndim();
    if grads.len() != d {
        return Err(Error::InvalidArgument(format!(
            "expected {d} derivative fields, got {}",
            grads.len()
        )));
    }
    let dims = grid.dims();
    let strides = grid.strides();
    let mut out = vec![0.0; first.values().len()];
    for (a, g) in grads.iter().enumerate() {
        grid.check_same(g.grid(), "gradient adjoint")?;
        let gv = g.values();
        for i in 0..grid.num_voxels() {
            if grid.coords(i)[a] + 1 < dims[a] {
                let j = i + strides[a];
                for comp in 0..d {
                    let v = gv[i * d + comp];
                    out[j * d + comp] += v;
                    out[i * d + comp] -= v;
                }
            }
        }
    }
    Ok(VectorField::from_parts_unchecked(grid.clone(), out))
}

/// `sum |L w|^2` and `L^T L w` in one pass.
pub(crate) fn squared_gradient_norm_and_normal(field: &VectorField) -> (f64, Vec<f64>) {
    let grid = field.grid();
    let d = grid.ndim();
    let dims = grid.dims();
    let strides = grid.strides();
    let w = field.values();
    let mut total = 0.0;
    let mut normal = vec![0.0; w.len()];
    for i in 0..grid.num_voxels() {
        let c = grid.coords(i);
        for a in 0..d {
            if c[a] + 1 < dims[a] {
                let j = i + strides[a];
                for comp in 0..d {
                    let diff = w[j * d + comp] - w[i * d + comp];
                    total += diff * diff;
                    normal[j * d + comp] += diff;
                    normal[i * d + comp] -= diff;
                }
            }
        }
    }
    (total, normal)
}
