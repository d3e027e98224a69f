//! MVF1 field files.
//!
//! Layout, all little-endian: the magic `MVF1`, `u8` number of axes, `u8`
//! channel count, one `u32` size per axis, one `f32` spacing per axis, then
//! the `f32` payload with channels interleaved per voxel, last axis fastest.

use crate::error::{Error, Result};
use crate::field::{GridSpec, LabelField, ScalarField, VectorField};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"MVF1";

/// Raw contents of an MVF1 file.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub dims: Vec<u32>,
    pub spacing: Vec<f32>,
    pub channels: u8,
    pub data: Vec<f32>,
}

impl FieldFile {
    pub fn new(dims: Vec<u32>, spacing: Vec<f32>, channels: u8, data: Vec<f32>) -> Result<Self> {
        let f = Self { dims, spacing, channels, data };
        f.check()?;
        Ok(f)
    }

    fn check(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.len() > u8::MAX as usize || self.dims.len() != self.spacing.len() {
            return Err(Error::Format(format!(
                "{} dims and {} spacings",
                self.dims.len(),
                self.spacing.len()
            )));
        }
        if self.channels == 0 {
            return Err(Error::Format("zero channels".into()));
        }
        let expected = self
            .dims
            .iter()
            .try_fold(self.channels as usize, |acc, &n| acc.checked_mul(n as usize))
            .ok_or_else(|| Error::Format("payload size overflows".into()))?;
        if expected != self.data.len() {
            return Err(Error::Format(format!(
                "payload has {} values, header implies {expected}",
                self.data.len()
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + 8 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.push(self.dims.len() as u8);
        out.push(self.channels);
        for n in &self.dims {
            out.extend_from_slice(&n.to_le_bytes());
        }
        for s in &self.spacing {
            out.extend_from_slice(&s.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        let mut take = |n: usize| -> Result<&[u8]> {
            if cur.len() < n {
                return Err(Error::Format("truncated MVF1 file".into()));
            }
            let (head, tail) = cur.split_at(n);
            cur = tail;
            Ok(head)
        };
        if take(4)? != MAGIC {
            return Err(Error::Format("bad magic, expected MVF1".into()));
        }
        let ndim = take(1)?[0] as usize;
        let channels = take(1)?[0];
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(u32::from_le_bytes(take(4)?.try_into().unwrap()));
        }
        let mut spacing = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            spacing.push(f32::from_le_bytes(take(4)?.try_into().unwrap()));
        }
        if cur.len() % 4 != 0 {
            return Err(Error::Format("payload length is not a multiple of 4".into()));
        }
        let data = cur
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(dims, spacing, channels, data)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&self.to_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let dims: Vec<usize> = self.dims.iter().map(|&n| n as usize).collect();
        let spacing: Vec<f64> = self.spacing.iter().map(|&s| s as f64).collect();
        GridSpec::new(&dims, &spacing)
    }

    fn values_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    pub fn from_scalar(f: &ScalarField) -> Self {
        Self::from_parts(f.grid(), 1, f.values())
    }

    pub fn from_vector(f: &VectorField) -> Self {
        Self::from_parts(f.grid(), f.ndim() as u8, f.values())
    }

    pub fn from_labels(f: &LabelField) -> Self {
        let vals: Vec<f64> = f.labels().iter().map(|&l| l as f64).collect();
        Self::from_parts(f.grid(), 1, &vals)
    }

    fn from_parts(grid: &GridSpec, channels: u8, values: &[f64]) -> Self {
        Self {
            dims: grid.dims().iter().map(|&n| n as u32).collect(),
            spacing: grid.spacing().iter().map(|&s| s as f32).collect(),
            channels,
            data: values.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_scalar(&self) -> Result<ScalarField> {
        if self.channels != 1 {
            return Err(Error::Format(format!("expected 1 channel, found {}", self.channels)));
        }
        ScalarField::new(self.grid()?, self.values_f64())
    }

    pub fn to_vector(&self) -> Result<VectorField> {
        if self.channels as usize != self.dims.len() {
            return Err(Error::Format(format!(
                "expected {} channels, found {}",
                self.dims.len(),
                self.channels
            )));
        }
        VectorField::new(self.grid()?, self.values_f64())
    }

    pub fn to_labels(&self) -> Result<LabelField> {
        if self.channels != 1 {
            return Err(Error::Format(format!("expected 1 channel, found {}", self.channels)));
        }
        let labels = self
            .data
            .iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 && v < 16_777_216.0 {
                    Ok(v as u32)
                } else {
                    Err(Error::Format(format!("label value {v} is not a non-negative integer")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        LabelField::new(self.grid()?, labels)
    }
}

pub fn write_scalar(path: &Path, f: &ScalarField) -> Result<()> {
    FieldFile::from_scalar(f).write(path)
}

pub fn write_vector(path: &Path, f: &VectorField) -> Result<()> {
    FieldFile::from_vector(f).write(path)
}

pub fn write_labels(path: &Path, f: &LabelField) -> Result<()> {
    FieldFile::from_labels(f).write(path)
}

pub fn read_scalar(path: &Path) -> Result<ScalarField> {
    FieldFile::read(path)?.to_scalar()
}

pub fn read_vector(path: &Path) -> Result<VectorField> {
    FieldFile::read(path)?.to_vector()
}

pub fn read_labels(path: &Path) -> Result<LabelField> {
    FieldFile::read(path)?.to_labels()
}
