//! Local standardisation over clipped cubic windows.

use crate::error::{Error, Result};
use crate::field::filter::{box_sum, window_counts};
use crate::field::{GridSpec, ScalarField};

pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Forward values kept for the reverse pass.
#[derive(Clone, Debug)]
pub(crate) struct Standardised {
    pub out: Vec<f64>,
    centred: Vec<f64>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    floored: Vec<bool>,
    counts: Vec<f64>,
    radius: usize,
}

fn check_window(grid: &GridSpec, window: usize) -> Result<usize> {
    let min_dim = *grid.dims().iter().min().unwrap();
    if window % 2 == 0 || window > min_dim {
        return Err(Error::InvalidArgument(format!(
            "window {window} must be odd and at most {min_dim}"
        )));
    }
    Ok(window / 2)
}

pub(crate) fn standardise_forward(grid: &GridSpec, x: &[f64], window: usize) -> Result<Standardised> {
    let radius = check_window(grid, window)?;
    // the output is shift invariant; centring first keeps the moments well conditioned
    let shift = x.iter().sum::<f64>() / x.len() as f64;
    let centred: Vec<f64> = x.iter().map(|v| v - shift).collect();
    let sq: Vec<f64> = centred.iter().map(|v| v * v).collect();
    let counts = window_counts(grid, radius);
    let s1 = box_sum(&centred, grid, radius);
    let s2 = box_sum(&sq, grid, radius);
    let n = x.len();
    let mut mean = vec![0.0; n];
    let mut sd = vec![0.0; n];
    let mut floored = vec![false; n];
    let mut out = vec![0.0; n];
    for i in 0..n {
        let m = s1[i] / counts[i];
        let mut var = s2[i] / counts[i] - m * m;
        if var <= VARIANCE_FLOOR {
            var = VARIANCE_FLOOR;
            floored[i] = true;
        }
        mean[i] = m;
        sd[i] = var.sqrt();
        out[i] = (centred[i] - m) / sd[i];
    }
    Ok(Standardised {
        out,
        centred,
        mean,
        sd,
        floored,
        counts,
        radius,
    })
}

impl Standardised {
    /// Gradient with respect to the input given the gradient of the output.
    pub(crate) fn adjoint(&self, grid: &GridSpec, out_bar: &[f64]) -> Vec<f64> {
        let n = out_bar.len();
        let mut direct = vec![0.0; n];
        let mut mean_bar = vec![0.0; n];
        let mut sq_bar = vec![0.0; n];
        for i in 0..n {
            let g = out_bar[i];
            let s = self.sd[i];
            let m = self.mean[i];
            direct[i] = g / s;
            let mut mb = -g / s;
            if !self.floored[i] {
                let s_bar = -g * (self.centred[i] - m) / (s * s);
                let var_bar = s_bar / (2.0 * s);
                mb -= 2.0 * m * var_bar;
                sq_bar[i] = var_bar / self.counts[i];
            }
            mean_bar[i] = mb / self.counts[i];
        }
        let a = box_sum(&mean_bar, grid, self.radius);
        let b = box_sum(&sq_bar, grid, self.radius);
        (0..n)
            .map(|j| direct[j] + a[j] + 2.0 * self.centred[j] * b[j])
            .collect()
    }
}

/// Subtract the local mean and divide by the local standard deviation.
pub fn local_standardise(img: &ScalarField, window: usize) -> Result<ScalarField> {
    let st = standardise_forward(img.grid(), img.values(), window)?;
    Ok(ScalarField::from_parts_unchecked(img.grid().clone(), st.out))
}

/// `local_standardise(fixed) - local_standardise(warped)`.
pub fn residuals(fixed: &ScalarField, warped: &ScalarField, window: usize) -> Result<ScalarField> {
    fixed.grid().check_same(warped.grid(), "residuals")?;
    let f = standardise_forward(fixed.grid(), fixed.values(), window)?;
    let m = standardise_forward(warped.grid(), warped.values(), window)?;
    let r = f.out.iter().zip(&m.out).map(|(a, b)| a - b).collect();
    Ok(ScalarField::from_parts_unchecked(fixed.grid().clone(), r))
}
