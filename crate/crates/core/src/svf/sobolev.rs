//! Separable H1 (Sobolev) smoothing.

use crate::error::{Error, Result};
use crate::field::filter::{convolve_axis, convolve_axis_adjoint};
use crate::field::{GridSpec, VectorField};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevConfig {
    /// Kernel width in voxels (odd, at least 3).
    pub width: usize,
    /// Smoothing parameter; the taps decay as `exp(-|i| / sqrt(lambda))`.
    pub lambda: f64,
}

impl Default for SobolevConfig {
    fn default() -> Self {
        Self {
            width: 7,
            lambda: 0.5,
        }
    }
}

impl SobolevConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 3 || self.width % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "sobolev width {} must be odd and >= 3",
                self.width
            )));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sobolev lambda {} must be positive",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Normalised 1D taps, offsets `-(width/2) ..= width/2`.
    pub fn kernel(&self) -> Vec<f64> {
        let r = (self.width / 2) as isize;
        let scale = self.lambda.sqrt();
        let mut k: Vec<f64> = (-r..=r)
            .map(|i| (-(i.unsigned_abs() as f64) / scale).exp())
            .collect();
        let s: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= s);
        k
    }
}

/// Smooth each component of a vector field along every axis.
pub fn sobolev_smooth(field: &VectorField, cfg: &SobolevConfig) -> Result<VectorField> {
    cfg.validate()?;
    let out = smooth_values(field.grid(), field.values(), cfg);
    Ok(VectorField::from_parts_unchecked(field.grid().clone(), out))
}

pub(crate) fn smooth_values(grid: &GridSpec, values: &[f64], cfg: &SobolevConfig) -> Vec<f64> {
    let kernel = cfg.kernel();
    let d = grid.ndim();
    let mut cur = values.to_vec();
    for a in 0..d {
        cur = convolve_axis(&cur, grid, d, a, &kernel);
    }
    cur
}

/// Transpose of [`smooth_values`]; differs from it only near the boundary.
pub(crate) fn smooth_values_adjoint(grid: &GridSpec, values: &[f64], cfg: &SobolevConfig) -> Vec<f64> {
    let kernel = cfg.kernel();
    let d = grid.ndim();
    let mut cur = values.to_vec();
    for a in (0..d).rev() {
        cur = convolve_axis_adjoint(&cur, grid, d, a, &kernel);
    }
    cur
}
