//! Cubic B-spline parametrised velocity fields.
//!
//! The control lattice has spacing `delta` voxels and one extra control
//! point before the first voxel, so that every voxel has its full 4-point
//! cubic support: along an axis of `n` voxels there are
//! `floor((n - 1) / delta) + 4` control points, the first at voxel `-delta`.

use crate::error::{Error, Result};
use crate::field::{GridSpec, VectorField};

#[derive(Clone, Debug, PartialEq)]
pub struct BSplineSvf {
    control: VectorField,
    spacing: usize,
}

/// Cubic B-spline basis values for fractional offset `t` in [0, 1).
#[inline]
pub(crate) fn cubic_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        (1.0 - t) * (1.0 - t) * (1.0 - t) / 6.0,
        (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
        (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
        t3 / 6.0,
    ]
}

pub fn control_dims(grid: &GridSpec, spacing: usize) -> Vec<usize> {
    grid.dims().iter().map(|&n| (n - 1) / spacing + 4).collect()
}

/// Grid of the control lattice for an image grid.
pub fn control_grid(grid: &GridSpec, spacing: usize) -> Result<GridSpec> {
    if spacing == 0 {
        return Err(Error::InvalidArgument("control spacing must be >= 1".into()));
    }
    let s: Vec<f64> = grid.spacing().iter().map(|v| v * spacing as f64).collect();
    GridSpec::new(&control_dims(grid, spacing), &s)
}

impl BSplineSvf {
    pub fn new(control: VectorField, spacing: usize) -> Result<Self> {
        if spacing == 0 {
            return Err(Error::InvalidArgument("control spacing must be >= 1".into()));
        }
        Ok(Self { control, spacing })
    }

    pub fn zeros(grid: &GridSpec, spacing: usize) -> Result<Self> {
        Ok(Self {
            control: VectorField::zeros(control_grid(grid, spacing)?),
            spacing,
        })
    }

    pub fn control(&self) -> &VectorField {
        &self.control
    }

    pub fn spacing(&self) -> usize {
        self.spacing
    }
}

/// Per-axis list of (first control index, 4 weights) for each voxel coordinate.
fn axis_tables(grid: &GridSpec, spacing: usize) -> Vec<Vec<(usize, [f64; 4])>> {
    grid.dims()
        .iter()
        .map(|&n| {
            (0..n)
                .map(|x| {
                    let k0 = x / spacing;
                    let t = (x % spacing) as f64 / spacing as f64;
                    (k0, cubic_weights(t))
                })
                .collect()
        })
        .collect()
}

fn check_coverage(svf: &BSplineSvf, grid: &GridSpec) -> Result<()> {
    let expected = control_dims(grid, svf.spacing);
    if svf.control.grid().dims() != expected.as_slice() {
        return Err(Error::GridMismatch(format!(
            "control lattice {:?} does not cover image {:?} at spacing {} (expected {:?})",
            svf.control.grid().dims(),
            grid.dims(),
            svf.spacing,
            expected
        )));
    }
    Ok(())
}

/// Calls `f(voxel, control_index, weight)` for every contributing control point.
fn for_each_support(
    grid: &GridSpec,
    ctrl_grid: &GridSpec,
    spacing: usize,
    mut f: impl FnMut(usize, usize, f64),
) {
    let d = grid.ndim();
    let tables = axis_tables(grid, spacing);
    let cstrides = ctrl_grid.strides();
    let terms = 1usize << (2 * d);
    for i in 0..grid.num_voxels() {
        let c = grid.coords(i);
        for t in 0..terms {
            let mut w = 1.0;
            let mut idx = 0usize;
            for a in 0..d {
                let off = (t >> (2 * (d - 1 - a))) & 3;
                let (k0, ref weights) = tables[a][c[a]];
                w *= weights[off];
                idx += (k0 + off) * cstrides[a];
            }
            f(i, idx, w);
        }
    }
}

/// Dense velocity at every voxel of `grid`.
pub fn bspline_to_dense(svf: &BSplineSvf, grid: &GridSpec) -> Result<VectorField> {
    check_coverage(svf, grid)?;
    let d = grid.ndim();
    let ctrl = svf.control.values();
    let mut out = vec![0.0; grid.num_voxels() * d];
    for_each_support(grid, svf.control.grid(), svf.spacing, |i, k, w| {
        for comp in 0..d {
            out[i * d + comp] += w * ctrl[k * d + comp];
        }
    });
    Ok(VectorField::from_parts_unchecked(grid.clone(), out))
}

/// Transpose of [`bspline_to_dense`].
pub(crate) fn bspline_adjoint(
    grid: &GridSpec,
    ctrl_grid: &GridSpec,
    spacing: usize,
    dense_bar: &[f64],
) -> Vec<f64> {
    let d = grid.ndim();
    let mut out = vec![0.0; ctrl_grid.num_voxels() * d];
    for_each_support(grid, ctrl_grid, spacing, |i, k, w| {
        for comp in 0..d {
            out[k * d + comp] += w * dense_bar[i * d + comp];
        }
    });
    out
}

/// Sum of basis weights at each voxel (1 everywhere for a valid lattice).
pub fn partition_of_unity(grid: &GridSpec, spacing: usize) -> Result<Vec<f64>> {
    let cg = control_grid(grid, spacing)?;
    let mut out = vec![0.0; grid.num_voxels()];
    for_each_support(grid, &cg, spacing, |i, _, w| out[i] += w);
    Ok(out)
}
