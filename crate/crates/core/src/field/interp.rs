//! Multilinear interpolation with clamp-to-edge boundaries, plus warping.

use super::grid::{GridSpec, LabelField, ScalarField, VectorField};
use crate::error::{Error, Result};

/// Corner indices and weights of one multilinear sample.
///
/// `dw[a][k]` is the derivative of corner weight `k` with respect to the
/// sample position along axis `a`. It is zero along axes where the position
/// was clamped, matching the clamped (flat) extension of the field.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Stencil {
    pub n: usize,
    pub idx: [usize; 8],
    pub w: [f64; 8],
    pub dw: [[f64; 8]; 3],
}

#[inline]
pub(crate) fn stencil(dims: &[usize], strides: &[usize], pos: &[f64]) -> Stencil {
    let d = dims.len();
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    let mut inside = [true; 3];
    for a in 0..d {
        let hi = (dims[a] - 1) as f64;
        let p = pos[a];
        let c = if p < 0.0 {
            inside[a] = false;
            0.0
        } else if p > hi {
            inside[a] = false;
            hi
        } else {
            p
        };
        let i0 = (c.floor() as usize).min(dims[a] - 2);
        base[a] = i0;
        frac[a] = c - i0 as f64;
    }
    let n = 1usize << d;
    let mut st = Stencil {
        n,
        idx: [0; 8],
        w: [0.0; 8],
        dw: [[0.0; 8]; 3],
    };
    for k in 0..n {
        let mut idx = 0usize;
        let mut w = 1.0;
        let mut factors = [0.0f64; 3];
        let mut slopes = [0.0f64; 3];
        for a in 0..d {
            let upper = (k >> (d - 1 - a)) & 1 == 1;
            let i = base[a] + upper as usize;
            idx += i * strides[a];
            let (f, s) = if upper {
                (frac[a], 1.0)
            } else {
                (1.0 - frac[a], -1.0)
            };
            factors[a] = f;
            slopes[a] = if inside[a] { s } else { 0.0 };
            w *= f;
        }
        st.idx[k] = idx;
        st.w[k] = w;
        for a in 0..d {
            let mut g = slopes[a];
            for b in 0..d {
                if b != a {
                    g *= factors[b];
                }
            }
            st.dw[a][k] = g;
        }
    }
    st
}

fn check_position(pos: &[f64], d: usize) -> Result<()> {
    if pos.len() != d {
        return Err(Error::InvalidArgument(format!(
            "position has {} coordinates, grid has {d} axes",
            pos.len()
        )));
    }
    if pos.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite position {pos:?}"
        )));
    }
    Ok(())
}

/// Sample a scalar field at a continuous voxel position.
pub fn interpolate_scalar(field: &ScalarField, pos: &[f64]) -> Result<f64> {
    let grid = field.grid();
    check_position(pos, grid.ndim())?;
    let st = stencil(grid.dims(), &grid.strides(), pos);
    let v = field.values();
    Ok((0..st.n).map(|k| st.w[k] * v[st.idx[k]]).sum())
}

/// Sample every component of a vector field at a continuous voxel position.
pub fn interpolate_vector(field: &VectorField, pos: &[f64]) -> Result<Vec<f64>> {
    let grid = field.grid();
    let d = grid.ndim();
    check_position(pos, d)?;
    let st = stencil(grid.dims(), &grid.strides(), pos);
    let v = field.values();
    let mut out = vec![0.0; d];
    for k in 0..st.n {
        for (c, o) in out.iter_mut().enumerate() {
            *o += st.w[k] * v[st.idx[k] * d + c];
        }
    }
    Ok(out)
}

/// Position `x + u(x)` of voxel `i` (written into `pos`).
#[inline]
pub(crate) fn displaced(grid: &GridSpec, u: &[f64], i: usize, pos: &mut [f64; 3]) {
    let d = grid.ndim();
    let c = grid.coords(i);
    for a in 0..d {
        pos[a] = c[a] as f64 + u[i * d + a];
    }
}

/// `out(x) = moving(x + displacement(x))`.
pub fn warp(moving: &ScalarField, displacement: &VectorField) -> Result<ScalarField> {
    let grid = moving.grid();
    grid.check_same(displacement.grid(), "warp")?;
    let dims = grid.dims();
    let strides = grid.strides();
    let m = moving.values();
    let u = displacement.values();
    let mut pos = [0.0; 3];
    let out = (0..grid.num_voxels())
        .map(|i| {
            displaced(grid, u, i, &mut pos);
            let st = stencil(dims, &strides, &pos[..grid.ndim()]);
            (0..st.n).map(|k| st.w[k] * m[st.idx[k]]).sum()
        })
        .collect();
    Ok(ScalarField::from_parts_unchecked(grid.clone(), out))
}

/// Nearest-neighbour label warp, `out(x) = labels(round(x + displacement(x)))`.
pub fn warp_labels(labels: &LabelField, displacement: &VectorField) -> Result<LabelField> {
    let grid = labels.grid();
    grid.check_same(displacement.grid(), "label warp")?;
    let d = grid.ndim();
    let dims = grid.dims();
    let u = displacement.values();
    let src = labels.labels();
    let out = (0..grid.num_voxels())
        .map(|i| {
            let c = grid.coords(i);
            let mut nearest = [0usize; 3];
            for a in 0..d {
                let p = (c[a] as f64 + u[i * d + a]).round();
                nearest[a] = p.clamp(0.0, (dims[a] - 1) as f64) as usize;
            }
            src[grid.index(&nearest[..d])]
        })
        .collect();
    LabelField::new(grid.clone(), out)
}

/// Bilinear cell lookup on a 2D grid, with the clamp flags folded into the slopes.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Bilinear {
    /// Index of the lower corner; the others are `+1`, `+n1`, `+n1+1`.
    pub base: usize,
    pub fx: f64,
    pub fy: f64,
    /// 1 inside the domain along that axis, 0 where clamped.
    pub sx: f64,
    pub sy: f64,
}

#[inline(always)]
fn clamp_axis(p: f64, n: usize) -> (usize, f64, f64) {
    let c = p.clamp(0.0, (n - 1) as f64);
    let s = if c == p { 1.0 } else { 0.0 };
    let i0 = (c as usize).min(n - 2);
    (i0, c - i0 as f64, s)
}

#[inline(always)]
pub(crate) fn bilinear(n0: usize, n1: usize, px: f64, py: f64) -> Bilinear {
    let (ix, fx, sx) = clamp_axis(px, n0);
    let (iy, fy, sy) = clamp_axis(py, n1);
    Bilinear {
        base: ix * n1 + iy,
        fx,
        fy,
        sx,
        sy,
    }
}

impl Bilinear {
    /// Value of channel `c` of a `channels`-interleaved buffer.
    #[inline(always)]
    pub fn sample(&self, v: &[f64], n1: usize, channels: usize, c: usize) -> f64 {
        let b = self.base;
        let v00 = v[b * channels + c];
        let v01 = v[(b + 1) * channels + c];
        let v10 = v[(b + n1) * channels + c];
        let v11 = v[(b + n1 + 1) * channels + c];
        let a0 = v00 + self.fy * (v01 - v00);
        let a1 = v10 + self.fy * (v11 - v10);
        a0 + self.fx * (a1 - a0)
    }

    /// Value and position derivatives of channel `c`.
    #[inline(always)]
    pub fn sample_grad(&self, v: &[f64], n1: usize, channels: usize, c: usize) -> (f64, f64, f64) {
        let b = self.base;
        let v00 = v[b * channels + c];
        let v01 = v[(b + 1) * channels + c];
        let v10 = v[(b + n1) * channels + c];
        let v11 = v[(b + n1 + 1) * channels + c];
        let a0 = v00 + self.fy * (v01 - v00);
        let a1 = v10 + self.fy * (v11 - v10);
        let dx = self.sx * (a1 - a0);
        let dy = self.sy * ((1.0 - self.fx) * (v01 - v00) + self.fx * (v11 - v10));
        (a0 + self.fx * (a1 - a0), dx, dy)
    }
}
