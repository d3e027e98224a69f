//! Synthetic registration pairs with known ground truth.

use crate::error::{Error, Result};
use crate::field::filter::gaussian_blur_channels;
use crate::field::{gaussian_blur, jacobian_determinant, warp, warp_labels, GridSpec, LabelField, ScalarField, VectorField};
use crate::svf::{exponentiate, exponentiate_inverse, sobolev_smooth, SobolevConfig, SvfConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub dims: Vec<usize>,
    pub labels: usize,
    /// Root-mean-square ground-truth velocity magnitude in voxels.
    pub amplitude: f64,
    /// Gaussian width (voxels) of the velocity noise.
    pub smoothness: f64,
    pub noise: f64,
    /// Amplitude of the background texture relative to the label contrast.
    pub texture: f64,
    /// Gaussian width (voxels) of the texture noise.
    pub texture_scale: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            dims: vec![64, 64],
            labels: 6,
            amplitude: 4.0,
            smoothness: 6.0,
            noise: 0.01,
            texture: 0.25,
            texture_scale: 2.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthPair {
    pub fixed: ScalarField,
    pub moving: ScalarField,
    pub fixed_labels: LabelField,
    pub moving_labels: LabelField,
    pub velocity: VectorField,
    /// Displacement of `exp(velocity)`; `moving(x) = fixed(x + displacement(x))`.
    pub displacement: VectorField,
}

fn smooth_noise(grid: &GridSpec, channels: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..grid.num_voxels() * channels).map(|_| rng.sample(StandardNormal)).collect();
    gaussian_blur_channels(&raw, grid, channels, sigma)
}

fn normalise(values: &mut [f64]) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt().max(1e-12);
    values.iter_mut().for_each(|v| *v = (*v - m) / sd);
}

/// Ellipses (ellipsoids) of three size classes, drawn largest first.
fn draw_labels(grid: &GridSpec, k: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let d = grid.ndim();
    let dims = grid.dims();
    let min_dim = *dims.iter().min().unwrap() as f64;
    let mut labels = vec![0u32; grid.num_voxels()];
    let mut shapes: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..k)
        .map(|j| {
            let class = 2 - (j * 3 / k.max(1));
            let base = min_dim * [0.06, 0.09, 0.13][class];
            let radii: Vec<f64> = (0..d).map(|_| base * rng.random_range(0.75..1.3)).collect();
            let centre: Vec<f64> = (0..d)
                .map(|a| {
                    let margin = radii[a] + 0.12 * dims[a] as f64;
                    rng.random_range(margin..(dims[a] as f64 - 1.0 - margin).max(margin + 1.0))
                })
                .collect();
            (base, centre, radii)
        })
        .collect();
    shapes.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    for (id, (_, centre, radii)) in shapes.iter().enumerate() {
        for i in 0..labels.len() {
            let c = grid.coords(i);
            let q: f64 = (0..d).map(|a| ((c[a] as f64 - centre[a]) / radii[a]).powi(2)).sum();
            if q <= 1.0 {
                labels[i] = id as u32 + 1;
            }
        }
    }
    labels
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthPair> {
    if cfg.labels == 0 || !(cfg.amplitude >= 0.0) || !(cfg.smoothness > 0.0) || !(cfg.noise >= 0.0) || !(cfg.texture >= 0.0) || !(cfg.texture_scale > 0.0) {
        return Err(Error::InvalidArgument(format!("invalid synth config {cfg:?}")));
    }
    let grid = GridSpec::unit(&cfg.dims)?;
    let d = grid.ndim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let label_values = draw_labels(&grid, cfg.labels, &mut rng);
    let fixed_labels = LabelField::new(grid.clone(), label_values)?;
    let mut texture = smooth_noise(&grid, 1, cfg.texture_scale, &mut rng);
    normalise(&mut texture);
    let levels: Vec<f64> = (0..=cfg.labels).map(|j| if j == 0 { 0.0 } else { 0.6 + 0.8 * (j as f64 / cfg.labels as f64) }).collect();
    let clean: Vec<f64> = texture
        .iter()
        .zip(fixed_labels.labels())
        .map(|(t, &l)| cfg.texture * t + levels[l as usize])
        .collect();
    let clean = gaussian_blur(&ScalarField::new(grid.clone(), clean)?, 0.7);

    let mut v = smooth_noise(&grid, d, cfg.smoothness, &mut rng);
    let rms = (v.iter().map(|x| x * x).sum::<f64>() / grid.num_voxels() as f64).sqrt();
    let scale = if rms > 0.0 { cfg.amplitude / rms } else { 0.0 };
    v.iter_mut().for_each(|x| *x *= scale);
    let mut velocity = sobolev_smooth(&VectorField::new(grid.clone(), v)?, &SobolevConfig::default())?;
    let svf = SvfConfig::default();
    let displacement = loop {
        let u = exponentiate(&velocity, svf)?;
        let inv = exponentiate_inverse(&velocity, svf)?;
        let folds = |f: &VectorField| jacobian_determinant(f).values().iter().any(|&j| j <= 0.0);
        if !folds(&u) && !folds(&inv) {
            break u;
        }
        log::warn!("ground-truth field folds, halving its amplitude");
        velocity = velocity.scaled(0.5);
    };

    let moving_clean = warp(&clean, &displacement)?;
    let mut add_noise = |f: &ScalarField| -> Result<ScalarField> {
        let vals = f.values().iter().map(|x| x + cfg.noise * rng.sample::<f64, _>(StandardNormal)).collect();
        ScalarField::new(f.grid().clone(), vals)
    };
    let fixed = add_noise(&clean)?;
    let moving = add_noise(&moving_clean)?;
    let moving_labels = warp_labels(&fixed_labels, &displacement)?;
    Ok(SynthPair {
        fixed,
        moving,
        fixed_labels,
        moving_labels,
        velocity,
        displacement,
    })
}
