//! Scaling and squaring.

use crate::error::{first_non_finite, Error, Result};
use crate::field::interp::{bilinear, stencil};
use crate::field::{GridSpec, VectorField};

pub const MAX_SQUARINGS: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvfConfig {
    /// `T`: the flow is integrated with `2^T` steps.
    pub num_squarings: u32,
}

impl Default for SvfConfig {
    fn default() -> Self {
        Self { num_squarings: 12 }
    }
}

impl SvfConfig {
    pub fn new(num_squarings: u32) -> Result<Self> {
        let cfg = Self { num_squarings };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_squarings > MAX_SQUARINGS {
            return Err(Error::InvalidArgument(format!(
                "num_squarings {} exceeds {MAX_SQUARINGS}",
                self.num_squarings
            )));
        }
        Ok(())
    }
}

/// Displacement of `exp(w)`.
pub fn exponentiate(w: &VectorField, cfg: SvfConfig) -> Result<VectorField> {
    cfg.validate()?;
    let mut steps = integrate(w.grid(), w.values(), 1.0, cfg.num_squarings)?;
    let last = steps.pop().expect("at least one step");
    Ok(VectorField::from_parts_unchecked(w.grid().clone(), last))
}

/// Displacement of `exp(-w)`, the inverse transformation.
pub fn exponentiate_inverse(w: &VectorField, cfg: SvfConfig) -> Result<VectorField> {
    cfg.validate()?;
    let mut steps = integrate(w.grid(), w.values(), -1.0, cfg.num_squarings)?;
    let last = steps.pop().expect("at least one step");
    Ok(VectorField::from_parts_unchecked(w.grid().clone(), last))
}

/// One squaring step: displacement of `phi o phi`.
pub(crate) fn compose_self(grid: &GridSpec, u: &[f64]) -> Vec<f64> {
    if grid.ndim() == 2 {
        return compose_self_2d(grid, u);
    }
    let d = grid.ndim();
    let dims = grid.dims();
    let strides = grid.strides();
    let mut out = vec![0.0; u.len()];
    let mut pos = [0.0; 3];
    for i in 0..grid.num_voxels() {
        let c = grid.coords(i);
        for a in 0..d {
            pos[a] = c[a] as f64 + u[i * d + a];
        }
        let st = stencil(dims, &strides, &pos[..d]);
        for comp in 0..d {
            let mut acc = 0.0;
            for k in 0..st.n {
                acc += st.w[k] * u[st.idx[k] * d + comp];
            }
            out[i * d + comp] = u[i * d + comp] + acc;
        }
    }
    out
}

fn compose_self_2d(grid: &GridSpec, u: &[f64]) -> Vec<f64> {
    let (n0, n1) = (grid.dims()[0], grid.dims()[1]);
    let row = 2 * n1;
    let mut out = vec![0.0; u.len()];
    for x in 0..n0 {
        for y in 0..n1 {
            let i = 2 * (x * n1 + y);
            let b = bilinear(n0, n1, x as f64 + u[i], y as f64 + u[i + 1]);
            let lo = &u[2 * b.base..2 * b.base + 4];
            let hi = &u[2 * b.base + row..2 * b.base + row + 4];
            let (gx, gy) = (b.fx, b.fy);
            for c in 0..2 {
                let a0 = lo[c] + gy * (lo[2 + c] - lo[c]);
                let a1 = hi[c] + gy * (hi[2 + c] - hi[c]);
                out[i + c] = u[i + c] + a0 + gx * (a1 - a0);
            }
        }
    }
    out
}

/// Reverse of one 2D squaring step, accumulated into `prev`.
fn compose_adjoint_2d(grid: &GridSpec, u: &[f64], bar: &[f64], prev: &mut [f64]) {
    let (n0, n1) = (grid.dims()[0], grid.dims()[1]);
    let row = 2 * n1;
    for x in 0..n0 {
        for y in 0..n1 {
            let i = 2 * (x * n1 + y);
            let g = [bar[i], bar[i + 1]];
            if g[0] == 0.0 && g[1] == 0.0 {
                continue;
            }
            let b = bilinear(n0, n1, x as f64 + u[i], y as f64 + u[i + 1]);
            let k = 2 * b.base;
            let lo = &u[k..k + 4];
            let hi = &u[k + row..k + row + 4];
            let (fx, fy) = (b.fx, b.fy);
            let (mut px, mut py) = (0.0, 0.0);
            for c in 0..2 {
                let a0 = lo[c] + fy * (lo[2 + c] - lo[c]);
                let a1 = hi[c] + fy * (hi[2 + c] - hi[c]);
                px += g[c] * (a1 - a0);
                py += g[c] * ((1.0 - fx) * (lo[2 + c] - lo[c]) + fx * (hi[2 + c] - hi[c]));
            }
            prev[i] += b.sx * px;
            prev[i + 1] += b.sy * py;
            let w_lo = 1.0 - fx;
            {
                let t = &mut prev[k..k + 4];
                for c in 0..2 {
                    let gl = g[c] * w_lo;
                    t[c] += gl - gl * fy;
                    t[2 + c] += gl * fy;
                }
            }
            let t = &mut prev[k + row..k + row + 4];
            for c in 0..2 {
                let gh = g[c] * fx;
                t[c] += gh - gh * fy;
                t[2 + c] += gh * fy;
            }
        }
    }
}

/// All intermediate displacements `u_0 = sign * w / 2^T, ..., u_T`.
pub(crate) fn integrate(
    grid: &GridSpec,
    w: &[f64],
    sign: f64,
    num_squarings: u32,
) -> Result<Vec<Vec<f64>>> {
    let scale = sign / f64::powi(2.0, num_squarings as i32);
    let mut steps = Vec::with_capacity(num_squarings as usize + 1);
    steps.push(w.iter().map(|v| v * scale).collect::<Vec<_>>());
    for t in 0..num_squarings as usize {
        let next = compose_self(grid, &steps[t]);
        if first_non_finite(&next).is_some() {
            return Err(Error::NonFinite {
                stage: "scaling and squaring",
                index: t + 1,
            });
        }
        steps.push(next);
    }
    Ok(steps)
}

/// Reverse pass through [`integrate`]: maps the adjoint of the final
/// displacement to the adjoint of the velocity `w`.
pub(crate) fn integrate_adjoint(
    grid: &GridSpec,
    steps: &[Vec<f64>],
    sign: f64,
    final_bar: Vec<f64>,
) -> Vec<f64> {
    let d = grid.ndim();
    let dims = grid.dims();
    let strides = grid.strides();
    let mut bar = final_bar;
    let mut pos = [0.0; 3];
    for u in steps[..steps.len() - 1].iter().rev() {
        // identity term
        let mut prev = bar.clone();
        if d == 2 {
            compose_adjoint_2d(grid, u, &bar, &mut prev);
            bar = prev;
            continue;
        }
        for i in 0..grid.num_voxels() {
            let c = grid.coords(i);
            for a in 0..d {
                pos[a] = c[a] as f64 + u[i * d + a];
            }
            let st = stencil(dims, &strides, &pos[..d]);
            let g = &bar[i * d..(i + 1) * d];
            for a in 0..d {
                let mut acc = 0.0;
                for k in 0..st.n {
                    let dw = st.dw[a][k];
                    if dw != 0.0 {
                        for comp in 0..d {
                            acc += g[comp] * dw * u[st.idx[k] * d + comp];
                        }
                    }
                }
                prev[i * d + a] += acc;
            }
            for k in 0..st.n {
                let w = st.w[k];
                if w != 0.0 {
                    for comp in 0..d {
                        prev[st.idx[k] * d + comp] += w * g[comp];
                    }
                }
            }
        }
        bar = prev;
    }
    let scale = sign / f64::powi(2.0, (steps.len() - 1) as i32);
    bar.iter_mut().for_each(|v| *v *= scale);
    bar
}
