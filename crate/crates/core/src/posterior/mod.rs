//! Diagonal plus low-rank Gaussian, `N(mu, diag(sigma^2) + U U^T)`.
//!
//! `U` is stored row-major as `P x R`. Determinants and solves go through
//! the `R x R` capacitance matrix `K = I + U^T diag(sigma^-2) U`.

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

pub const MAX_RANK: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct LowRankGaussian {
    mu: Vec<f64>,
    sigma: Vec<f64>,
    u: Vec<f64>,
    rank: usize,
}

/// One antithetic draw: `w = mu +/- (sigma * eps + U x)`.
#[derive(Clone, Debug)]
pub struct SamplePair {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    pub eps: Vec<f64>,
    pub x: Vec<f64>,
}

impl LowRankGaussian {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>, u: Vec<f64>, rank: usize) -> Result<Self> {
        let p = mu.len();
        if sigma.len() != p || u.len() != p * rank {
            return Err(Error::InvalidArgument(format!(
                "posterior shapes disagree: mu {p}, sigma {}, u {} for rank {rank}",
                sigma.len(),
                u.len()
            )));
        }
        if rank > MAX_RANK {
            return Err(Error::InvalidArgument(format!("rank {rank} exceeds {MAX_RANK}")));
        }
        if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidArgument("sigma must be positive".into()));
        }
        if mu.iter().chain(&u).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("posterior parameters must be finite".into()));
        }
        Ok(Self { mu, sigma, u, rank })
    }

    /// Zero mean, constant `sigma`, every entry of `U` equal to `u0`.
    pub fn isotropic(dim: usize, rank: usize, sigma0: f64, u0: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![sigma0; dim], vec![u0; dim * rank], rank)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// Variances `sigma^2`, the diagonal preconditioner used by the sampler.
    pub fn diag_variance(&self) -> Vec<f64> {
        self.sigma.iter().map(|s| s * s).collect()
    }

    /// Marginal variances `sigma_p^2 + sum_r U_pr^2`.
    pub fn marginal_variance(&self) -> Vec<f64> {
        let r = self.rank;
        (0..self.dim())
            .map(|p| self.sigma[p] * self.sigma[p] + self.u[p * r..(p + 1) * r].iter().map(|v| v * v).sum::<f64>())
            .collect()
    }

    pub fn sample_pair<G: Rng + ?Sized>(&self, rng: &mut G) -> SamplePair {
        let eps: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let x: Vec<f64> = (0..self.rank).map(|_| rng.sample(StandardNormal)).collect();
        let r = self.rank;
        let mut plus = Vec::with_capacity(self.dim());
        let mut minus = Vec::with_capacity(self.dim());
        for p in 0..self.dim() {
            let mut d = self.sigma[p] * eps[p];
            for k in 0..r {
                d += self.u[p * r + k] * x[k];
            }
            plus.push(self.mu[p] + d);
            minus.push(self.mu[p] - d);
        }
        SamplePair { plus, minus, eps, x }
    }

    /// `D^-1 U` with `D = diag(sigma^2)`.
    fn scaled_u(&self) -> Vec<f64> {
        let r = self.rank;
        let mut out = self.u.clone();
        for p in 0..self.dim() {
            let inv = 1.0 / (self.sigma[p] * self.sigma[p]);
            out[p * r..(p + 1) * r].iter_mut().for_each(|v| *v *= inv);
        }
        out
    }

    fn capacitance(&self) -> Result<Cholesky<f64, Dyn>> {
        let r = self.rank;
        let du = self.scaled_u();
        let mut k = DMatrix::<f64>::identity(r, r);
        for p in 0..self.dim() {
            for a in 0..r {
                for b in 0..r {
                    k[(a, b)] += self.u[p * r + a] * du[p * r + b];
                }
            }
        }
        Cholesky::new(k).ok_or_else(|| Error::Numerical("capacitance matrix not positive definite".into()))
    }

    pub fn log_det_cov(&self) -> Result<f64> {
        let diag: f64 = self.sigma.iter().map(|s| 2.0 * s.ln()).sum();
        if self.rank == 0 {
            return Ok(diag);
        }
        let chol = self.capacitance()?;
        let l = chol.l_dirty();
        let lk: f64 = (0..self.rank).map(|i| 2.0 * l[(i, i)].ln()).sum();
        Ok(diag + lk)
    }

    pub fn apply_precision(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::InvalidArgument(format!("vector length {} != {}", v.len(), self.dim())));
        }
        let mut out: Vec<f64> = v.iter().zip(&self.sigma).map(|(x, s)| x / (s * s)).collect();
        if self.rank == 0 {
            return Ok(out);
        }
        let r = self.rank;
        let chol = self.capacitance()?;
        let mut t = nalgebra::DVector::<f64>::zeros(r);
        for p in 0..self.dim() {
            for a in 0..r {
                t[a] += self.u[p * r + a] * out[p];
            }
        }
        let z = chol.solve(&t);
        let du = self.scaled_u();
        for p in 0..self.dim() {
            for a in 0..r {
                out[p] -= du[p * r + a] * z[a];
            }
        }
        Ok(out)
    }

    pub fn entropy(&self) -> Result<f64> {
        Ok(0.5 * self.log_det_cov()? + 0.5 * self.dim() as f64 * (1.0 + (2.0 * PI).ln()))
    }

    /// Diagonal of the precision and `Sigma^-1 U = D^-1 U K^-1`, the pieces of
    /// the entropy gradient.
    pub(crate) fn entropy_pieces(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let r = self.rank;
        let p_dim = self.dim();
        let mut diag: Vec<f64> = self.sigma.iter().map(|s| 1.0 / (s * s)).collect();
        if r == 0 {
            return Ok((diag, Vec::new()));
        }
        let chol = self.capacitance()?;
        let kinv = chol.inverse();
        let du = self.scaled_u();
        let mut su = vec![0.0; p_dim * r];
        for p in 0..p_dim {
            let row = &du[p * r..(p + 1) * r];
            for a in 0..r {
                let mut acc = 0.0;
                for b in 0..r {
                    acc += row[b] * kinv[(b, a)];
                }
                su[p * r + a] = acc;
            }
            diag[p] -= (0..r).map(|a| su[p * r + a] * row[a]).sum::<f64>();
        }
        Ok((diag, su))
    }

    pub(crate) fn set_params(&mut self, mu: &[f64], log_var: &[f64], u: &[f64]) {
        self.mu.copy_from_slice(mu);
        for (s, lv) in self.sigma.iter_mut().zip(log_var) {
            *s = (0.5 * lv).exp();
        }
        self.u.copy_from_slice(u);
    }
}
