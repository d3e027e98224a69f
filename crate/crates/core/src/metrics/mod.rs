//! Overlap, surface distance, Jacobian statistics and uncertainty maps.

mod edt;

use crate::error::{Error, Result};
use crate::field::{jacobian_determinant, warp_labels, GridSpec, LabelField, ScalarField, VectorField};

pub fn dice(a: &LabelField, b: &LabelField, label: u32) -> Result<f64> {
    a.grid().check_same(b.grid(), "dice")?;
    let (mut na, mut nb, mut both) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        let (ia, ib) = (x == label, y == label);
        na += ia as usize;
        nb += ib as usize;
        both += (ia && ib) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (na + nb) as f64)
}

/// Mask voxels with a face neighbour outside the mask or outside the grid.
fn boundary(grid: &GridSpec, mask: &[bool]) -> Vec<bool> {
    let d = grid.ndim();
    let dims = grid.dims();
    let strides = grid.strides();
    (0..mask.len())
        .map(|i| {
            if !mask[i] {
                return false;
            }
            let c = grid.coords(i);
            (0..d).any(|a| {
                c[a] == 0 || c[a] + 1 == dims[a] || !mask[i - strides[a]] || !mask[i + strides[a]]
            })
        })
        .collect()
}

/// Symmetric mean distance (mm) between the boundaries of the two masks.
pub fn average_surface_distance(a: &LabelField, b: &LabelField, label: u32) -> Result<f64> {
    a.grid().check_same(b.grid(), "surface distance")?;
    let grid = a.grid();
    let ma = a.mask(label);
    let mb = b.mask(label);
    if !ma.iter().any(|&x| x) || !mb.iter().any(|&x| x) {
        return Err(Error::InvalidArgument(format!("label {label} is empty in one of the masks")));
    }
    let ba = boundary(grid, &ma);
    let bb = boundary(grid, &mb);
    let da = edt::squared_distance(grid, &ba);
    let db = edt::squared_distance(grid, &bb);
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..ba.len() {
        if ba[i] {
            total += db[i].sqrt();
            count += 1;
        }
        if bb[i] {
            total += da[i].sqrt();
            count += 1;
        }
    }
    Ok(total / count as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleSource {
    Vi,
    Sgld,
}

/// Posterior samples of the inverse displacement.
#[derive(Clone, Debug)]
pub struct SampleSet {
    pub displacements: Vec<VectorField>,
    pub source: SampleSource,
}

impl SampleSet {
    pub fn new(displacements: Vec<VectorField>, source: SampleSource) -> Result<Self> {
        if let Some(first) = displacements.first() {
            for d in &displacements[1..] {
                first.grid().check_same(d.grid(), "sample set")?;
            }
        }
        Ok(Self { displacements, source })
    }

    pub fn len(&self) -> usize {
        self.displacements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.displacements.is_empty()
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (m, 0.0);
    }
    let v = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

/// Per-voxel standard deviation (n - 1) of the displacement magnitude in mm.
pub fn displacement_uncertainty(samples: &SampleSet) -> Result<ScalarField> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("uncertainty needs at least two samples".into()));
    }
    let grid = samples.displacements[0].grid().clone();
    let mags: Vec<ScalarField> = samples.displacements.iter().map(|d| d.magnitude_mm()).collect();
    let mut buf = vec![0.0; mags.len()];
    let out = (0..grid.num_voxels())
        .map(|i| {
            for (b, m) in buf.iter_mut().zip(&mags) {
                *b = m.values()[i];
            }
            mean_std(&buf).1
        })
        .collect();
    ScalarField::new(grid, out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct JacobianReport {
    pub counts: Vec<usize>,
    pub mean_count: f64,
    pub std_count: f64,
    pub percentage: f64,
}

/// Voxels with a non-positive Jacobian determinant, per sample.
pub fn jacobian_report(samples: &SampleSet) -> Result<JacobianReport> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("jacobian report needs a sample".into()));
    }
    let counts: Vec<usize> = samples
        .displacements
        .iter()
        .map(|d| jacobian_determinant(d).values().iter().filter(|&&j| j <= 0.0).count())
        .collect();
    let as_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let (mean_count, std_count) = mean_std(&as_f);
    let n = samples.displacements[0].grid().num_voxels() as f64;
    Ok(JacobianReport {
        counts,
        mean_count,
        std_count,
        percentage: 100.0 * mean_count / n,
    })
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("pearson needs two equal-length series".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::Numerical("pearson correlation of a constant series".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizeGroup {
    Small,
    Medium,
    Large,
}

impl SizeGroup {
    pub fn name(self) -> &'static str {
        match self {
            SizeGroup::Small => "small",
            SizeGroup::Medium => "medium",
            SizeGroup::Large => "large",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructureRow {
    pub label: u32,
    pub voxels: usize,
    pub size_group: SizeGroup,
    pub dice_mean: f64,
    pub dice_std: f64,
    pub asd_mean: f64,
    pub asd_std: f64,
    /// Mean displacement uncertainty (mm) inside the structure.
    pub u_d: f64,
    /// Standard deviation of the per-sample Dice.
    pub u_l: f64,
}

/// Warp `moving_labels` by each sample and score it against `fixed_labels`.
pub fn structure_report(
    samples: &SampleSet,
    fixed_labels: &LabelField,
    moving_labels: &LabelField,
) -> Result<Vec<StructureRow>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("structure report needs a sample".into()));
    }
    let uncertainty = if samples.len() >= 2 {
        Some(displacement_uncertainty(samples)?)
    } else {
        None
    };
    let warped: Vec<LabelField> = samples
        .displacements
        .iter()
        .map(|d| warp_labels(moving_labels, d))
        .collect::<Result<_>>()?;
    let ids = fixed_labels.label_ids();
    let ids: Vec<u32> = ids.into_iter().filter(|&l| l != 0).collect();
    let sizes: Vec<usize> = ids
        .iter()
        .map(|&l| fixed_labels.labels().iter().filter(|&&x| x == l).count())
        .collect();
    let mut sorted = sizes.clone();
    sorted.sort_unstable();
    let cut = |q: usize| sorted[(q * sorted.len() / 3).min(sorted.len() - 1)];
    let (t1, t2) = (cut(1), cut(2));
    let mut rows = Vec::with_capacity(ids.len());
    for (&label, &voxels) in ids.iter().zip(&sizes) {
        let dices: Vec<f64> = warped.iter().map(|w| dice(w, fixed_labels, label)).collect::<Result<_>>()?;
        let asds: Vec<f64> = warped
            .iter()
            .map(|w| average_surface_distance(w, fixed_labels, label).unwrap_or(f64::NAN))
            .collect();
        let asds: Vec<f64> = asds.into_iter().filter(|v| v.is_finite()).collect();
        let (dice_mean, dice_std) = mean_std(&dices);
        let (asd_mean, asd_std) = if asds.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&asds) };
        let u_d = match &uncertainty {
            Some(u) => {
                let (s, n) = fixed_labels
                    .labels()
                    .iter()
                    .zip(u.values())
                    .filter(|(l, _)| **l == label)
                    .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
                s / n as f64
            }
            None => 0.0,
        };
        let size_group = if voxels < t1 {
            SizeGroup::Small
        } else if voxels < t2 {
            SizeGroup::Medium
        } else {
            SizeGroup::Large
        };
        rows.push(StructureRow {
            label,
            voxels,
            size_group,
            dice_mean,
            dice_std,
            asd_mean,
            asd_std,
            u_d,
            u_l: dice_std,
        });
    }
    Ok(rows)
}

/// Correlation between displacement and label uncertainty across structures.
pub fn pearson_udul(rows: &[StructureRow]) -> Result<f64> {
    if rows.len() < 3 {
        return Err(Error::InvalidArgument("pearson_udul needs at least three structures".into()));
    }
    let ud: Vec<f64> = rows.iter().map(|r| r.u_d).collect();
    let ul: Vec<f64> = rows.iter().map(|r| r.u_l).collect();
    pearson(&ud, &ul)
}

/// Mean Dice over all non-background labels of `fixed_labels`.
pub fn mean_dice(a: &LabelField, fixed_labels: &LabelField) -> Result<f64> {
    let ids: Vec<u32> = fixed_labels.label_ids().into_iter().filter(|&l| l != 0).collect();
    if ids.is_empty() {
        return Err(Error::InvalidArgument("no foreground labels".into()));
    }
    let mut s = 0.0;
    for &l in &ids {
        s += dice(a, fixed_labels, l)?;
    }
    Ok(s / ids.len() as f64)
}
