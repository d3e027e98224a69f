//! Separable line filters over interleaved multi-channel buffers.

use super::grid::{GridSpec, ScalarField};

/// Calls `f(base, stride, len)` for every 1D line along `axis` of every channel.
pub(crate) fn for_each_line(
    grid: &GridSpec,
    channels: usize,
    axis: usize,
    mut f: impl FnMut(usize, usize, usize),
) {
    let dims = grid.dims();
    let strides = grid.strides();
    let n = dims[axis];
    let inner = strides[axis];
    let outer: usize = dims[..axis].iter().product();
    for o in 0..outer {
        for j in 0..inner {
            let voxel = o * n * inner + j;
            for c in 0..channels {
                f(voxel * channels + c, inner * channels, n);
            }
        }
    }
}

/// Centred convolution along `axis` with clamp-to-edge padding.
/// `kernel` has odd length; tap `k` applies to offset `k - radius`.
pub(crate) fn convolve_axis(
    values: &[f64],
    grid: &GridSpec,
    channels: usize,
    axis: usize,
    kernel: &[f64],
) -> Vec<f64> {
    let r = kernel.len() / 2;
    let mut out = vec![0.0; values.len()];
    let mut padded = Vec::new();
    for_each_line(grid, channels, axis, |base, stride, n| {
        padded.clear();
        padded.extend(std::iter::repeat_n(values[base], r));
        padded.extend((0..n).map(|i| values[base + i * stride]));
        padded.extend(std::iter::repeat_n(values[base + (n - 1) * stride], r));
        for i in 0..n {
            let window = &padded[i..i + kernel.len()];
            out[base + i * stride] = kernel.iter().zip(window).map(|(k, v)| k * v).sum();
        }
    });
    out
}

/// Transpose of [`convolve_axis`].
pub(crate) fn convolve_axis_adjoint(
    values: &[f64],
    grid: &GridSpec,
    channels: usize,
    axis: usize,
    kernel: &[f64],
) -> Vec<f64> {
    let r = kernel.len() / 2;
    let mut out = vec![0.0; values.len()];
    let mut acc = Vec::new();
    for_each_line(grid, channels, axis, |base, stride, n| {
        acc.clear();
        acc.resize(n + 2 * r, 0.0);
        for i in 0..n {
            let g = values[base + i * stride];
            for (a, k) in acc[i..i + kernel.len()].iter_mut().zip(kernel) {
                *a += k * g;
            }
        }
        // fold the padding back onto the edge samples
        let head: f64 = acc[..r].iter().sum();
        let tail: f64 = acc[n + r..].iter().sum();
        acc[r] += head;
        acc[n + r - 1] += tail;
        for i in 0..n {
            out[base + i * stride] = acc[i + r];
        }
    });
    out
}

/// Sum over the window `[i - radius, i + radius]` clipped to the domain.
pub(crate) fn box_sum_axis(values: &[f64], grid: &GridSpec, axis: usize, radius: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    let mut line = Vec::new();
    for_each_line(grid, 1, axis, |base, stride, n| {
        // running sums along the line
        line.clear();
        line.push(0.0);
        let mut acc = 0.0;
        for i in 0..n {
            acc += values[base + i * stride];
            line.push(acc);
        }
        for i in 0..n {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius + 1).min(n);
            out[base + i * stride] = line[hi] - line[lo];
        }
    });
    out
}

/// Separable clipped box sum over all axes.
pub(crate) fn box_sum(values: &[f64], grid: &GridSpec, radius: usize) -> Vec<f64> {
    let mut cur = values.to_vec();
    for a in 0..grid.ndim() {
        cur = box_sum_axis(&cur, grid, a, radius);
    }
    cur
}

/// Number of in-domain voxels in each clipped window.
pub(crate) fn window_counts(grid: &GridSpec, radius: usize) -> Vec<f64> {
    let d = grid.ndim();
    let dims = grid.dims();
    (0..grid.num_voxels())
        .map(|i| {
            let c = grid.coords(i);
            (0..d)
                .map(|a| {
                    let lo = c[a].saturating_sub(radius);
                    let hi = (c[a] + radius + 1).min(dims[a]);
                    (hi - lo) as f64
                })
                .product()
        })
        .collect()
}

/// Normalised Gaussian taps truncated at three standard deviations.
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with clamp-to-edge padding, `sigma` in voxels.
pub fn gaussian_blur(field: &ScalarField, sigma: f64) -> ScalarField {
    if sigma <= 0.0 {
        return field.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let grid = field.grid();
    let mut cur = field.values().to_vec();
    for a in 0..grid.ndim() {
        cur = convolve_axis(&cur, grid, 1, a, &kernel);
    }
    ScalarField::from_parts_unchecked(grid.clone(), cur)
}

/// Gaussian blur applied independently to each of `channels` interleaved components.
pub(crate) fn gaussian_blur_channels(
    values: &[f64],
    grid: &GridSpec,
    channels: usize,
    sigma: f64,
) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma);
    let mut cur = values.to_vec();
    for a in 0..grid.ndim() {
        cur = convolve_axis(&cur, grid, channels, a, &kernel);
    }
    cur
}
