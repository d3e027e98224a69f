//! 8-bit PGM heatmaps of field slices.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

/// The 2D plane `axis = index` of a 3D field, or the whole of a 2D field.
/// Rows run along the lower remaining axis.
pub fn extract_slice(field: &ScalarField, axis: usize, index: usize) -> Result<Slice> {
    let grid = field.grid();
    let dims = grid.dims();
    if grid.ndim() == 2 {
        return Ok(Slice {
            rows: dims[0],
            cols: dims[1],
            values: field.values().to_vec(),
        });
    }
    if axis >= 3 || index >= dims[axis] {
        return Err(Error::InvalidArgument(format!(
            "slice {axis}:{index} outside dims {dims:?}"
        )));
    }
    let rest: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
    let (rows, cols) = (dims[rest[0]], dims[rest[1]]);
    let mut values = Vec::with_capacity(rows * cols);
    let mut c = [0usize; 3];
    c[axis] = index;
    for r in 0..rows {
        for k in 0..cols {
            c[rest[0]] = r;
            c[rest[1]] = k;
            values.push(field.get(&c));
        }
    }
    Ok(Slice { rows, cols, values })
}

/// Binary P5 image scaled linearly from `min` (0) to `max` (255), plus the range.
pub fn encode_pgm(slice: &Slice) -> (Vec<u8>, f64, f64) {
    let min = slice.values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = slice.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let mut out = format!("P5\n{} {}\n255\n", slice.cols, slice.rows).into_bytes();
    out.extend(slice.values.iter().map(|&v| {
        if range > 0.0 {
            (255.0 * (v - min) / range).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    }));
    (out, min, max)
}

/// Writes `path` and a sidecar `path.txt` with the intensity range.
pub fn write_slice(path: &Path, field: &ScalarField, axis: usize, index: usize) -> Result<()> {
    let slice = extract_slice(field, axis, index)?;
    let (bytes, min, max) = encode_pgm(&slice);
    std::fs::write(path, bytes)?;
    let mut side = path.as_os_str().to_owned();
    side.push(".txt");
    std::fs::write(side, format!("min = {min:?}\nmax = {max:?}\n"))?;
    Ok(())
}
