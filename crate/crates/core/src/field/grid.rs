use crate::error::{ensure_finite, Error, Result};

/// Voxel lattice geometry. Row-major, last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    dims: Vec<usize>,
    spacing: Vec<f64>,
}

impl GridSpec {
    pub fn new(dims: &[usize], spacing: &[f64]) -> Result<Self> {
        if !(2..=3).contains(&dims.len()) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 2 or 3, got {}",
                dims.len()
            )));
        }
        if spacing.len() != dims.len() {
            return Err(Error::InvalidGrid(format!(
                "{} spacings for {} axes",
                spacing.len(),
                dims.len()
            )));
        }
        if let Some(n) = dims.iter().find(|&&n| n < 4) {
            return Err(Error::InvalidGrid(format!("axis length {n} < 4")));
        }
        if let Some(s) = spacing.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidGrid(format!("spacing {s} is not positive")));
        }
        Ok(Self {
            dims: dims.to_vec(),
            spacing: spacing.to_vec(),
        })
    }

    /// Unit-spacing grid.
    pub fn unit(dims: &[usize]) -> Result<Self> {
        Self::new(dims, &vec![1.0; dims.len()])
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn num_voxels(&self) -> usize {
        self.dims.iter().product()
    }

    /// Element stride of each axis in a single-channel buffer.
    pub fn strides(&self) -> Vec<usize> {
        let d = self.ndim();
        let mut strides = vec![1; d];
        for a in (0..d.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.dims[a + 1];
        }
        strides
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&c, &n)| acc * n + c)
    }

    /// Multi-index of a flat voxel index (unused trailing entries are zero).
    pub fn coords(&self, mut index: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for a in (0..self.ndim()).rev() {
            out[a] = index % self.dims[a];
            index /= self.dims[a];
        }
        out
    }

    /// Same grid with every axis length and spacing permuted by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let spacing: Vec<f64> = perm.iter().map(|&p| self.spacing[p]).collect();
        Self::new(&dims, &spacing)
    }

    pub(crate) fn check_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::GridMismatch(format!(
                "{what}: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }
}

/// One value per voxel.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_voxels() {
            return Err(Error::InvalidArgument(format!(
                "scalar field needs {} values, got {}",
                grid.num_voxels(),
                values.len()
            )));
        }
        ensure_finite(&values, "scalar field")?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.num_voxels();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let d = grid.ndim();
        let values = (0..grid.num_voxels())
            .map(|i| f(&grid.coords(i)[..d]))
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, coords: &[usize]) -> f64 {
        self.values[self.grid.index(coords)]
    }

    pub(crate) fn from_parts_unchecked(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.num_voxels());
        Self { grid, values }
    }
}

/// `ndim` components per voxel, interleaved (component index fastest).
/// Components are in voxel units.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        let expected = grid.num_voxels() * grid.ndim();
        if values.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "vector field needs {expected} values, got {}",
                values.len()
            )));
        }
        ensure_finite(&values, "vector field")?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.num_voxels() * grid.ndim();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(&[usize], usize) -> f64) -> Result<Self> {
        let d = grid.ndim();
        let mut values = Vec::with_capacity(grid.num_voxels() * d);
        for i in 0..grid.num_voxels() {
            let c = grid.coords(i);
            for comp in 0..d {
                values.push(f(&c[..d], comp));
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn ndim(&self) -> usize {
        self.grid.ndim()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn vector(&self, voxel: usize) -> &[f64] {
        let d = self.ndim();
        &self.values[voxel * d..(voxel + 1) * d]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Euclidean norm per voxel in physical units (components scaled by spacing).
    pub fn magnitude_mm(&self) -> ScalarField {
        let d = self.ndim();
        let spacing = self.grid.spacing();
        let values = self
            .values
            .chunks_exact(d)
            .map(|v| {
                v.iter()
                    .zip(spacing)
                    .map(|(c, s)| (c * s) * (c * s))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        ScalarField::from_parts_unchecked(self.grid.clone(), values)
    }

    /// Permute grid axes and vector components together.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<Self> {
        let d = self.ndim();
        if perm.len() != d {
            return Err(Error::InvalidArgument("permutation length".into()));
        }
        let grid = self.grid.permuted(perm)?;
        let mut out = vec![0.0; self.values.len()];
        for i in 0..self.grid.num_voxels() {
            let c = self.grid.coords(i);
            let mut pc = [0usize; 3];
            for (new_axis, &old_axis) in perm.iter().enumerate() {
                pc[new_axis] = c[old_axis];
            }
            let j = grid.index(&pc[..d]);
            for (new_axis, &old_axis) in perm.iter().enumerate() {
                out[j * d + new_axis] = self.values[i * d + old_axis];
            }
        }
        Ok(Self { grid, values: out })
    }

    pub(crate) fn from_parts_unchecked(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.num_voxels() * grid.ndim());
        Self { grid, values }
    }
}

/// Integer segmentation, 0 = background.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelField {
    grid: GridSpec,
    labels: Vec<u32>,
}

impl LabelField {
    pub fn new(grid: GridSpec, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != grid.num_voxels() {
            return Err(Error::InvalidArgument(format!(
                "label field needs {} labels, got {}",
                grid.num_voxels(),
                labels.len()
            )));
        }
        Ok(Self { grid, labels })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Sorted non-background label ids.
    pub fn label_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.labels.iter().copied().filter(|&l| l != 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn mask(&self, label: u32) -> Vec<bool> {
        self.labels.iter().map(|&l| l == label).collect()
    }
}
