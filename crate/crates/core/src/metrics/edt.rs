//! Exact squared Euclidean distance transform (lower envelope of parabolas).

use crate::field::filter::for_each_line;
use crate::field::GridSpec;

/// 1D transform of `f` with squared axis spacing `w2`; `f` may hold infinities.
fn transform_line(f: &[f64], w2: f64, out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    for q in 0..n {
        if f[q].is_infinite() {
            continue;
        }
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let s = ((f[q] + w2 * (q * q) as f64) - (f[p] + w2 * (p * p) as f64))
                        / (2.0 * w2 * (q as f64 - p as f64));
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        *o = w2 * dq * dq + f[v[k]];
    }
}

/// Squared distance (mm^2) from every voxel to the nearest `true` voxel.
pub(crate) fn squared_distance(grid: &GridSpec, seeds: &[bool]) -> Vec<f64> {
    let mut cur: Vec<f64> = seeds.iter().map(|&s| if s { 0.0 } else { f64::INFINITY }).collect();
    let (mut line, mut out, mut v, mut z) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for axis in 0..grid.ndim() {
        let w2 = grid.spacing()[axis] * grid.spacing()[axis];
        let mut next = cur.clone();
        for_each_line(grid, 1, axis, |base, stride, n| {
            line.clear();
            line.extend((0..n).map(|i| cur[base + i * stride]));
            out.resize(n, 0.0);
            transform_line(&line, w2, &mut out, &mut v, &mut z);
            for i in 0..n {
                next[base + i * stride] = out[i];
            }
        });
        cur = next;
    }
    cur
}
