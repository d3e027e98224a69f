//! Gaussian-mixture data term over locally standardised residuals.

mod standardise;

pub use standardise::{local_standardise, residuals, VARIANCE_FLOOR};
pub(crate) use standardise::standardise_forward;

use crate::error::{ensure_finite, Error, Result};
use crate::field::ScalarField;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

pub const ALPHA_FLOOR: f64 = 1e-3;
const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureParams {
    beta: Vec<f64>,
    rho: Vec<f64>,
}

impl MixtureParams {
    pub fn new(beta: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        if beta.is_empty() || beta.len() != rho.len() {
            return Err(Error::InvalidArgument(format!(
                "mixture needs matching non-empty beta/rho, got {} and {}",
                beta.len(),
                rho.len()
            )));
        }
        if beta.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::InvalidArgument(format!("precisions must be positive: {beta:?}")));
        }
        check_simplex(&rho)?;
        Ok(Self { beta, rho })
    }

    /// Precisions spread geometrically by factors of 4 around `exp(mu_beta)`,
    /// equal proportions.
    pub fn initial(components: usize, mu_beta: f64) -> Result<Self> {
        if components == 0 {
            return Err(Error::InvalidArgument("mixture needs at least one component".into()));
        }
        let l = components as f64;
        let beta = (0..components)
            .map(|k| 2f64.powf(2.0 * k as f64 - (l - 1.0)) * mu_beta.exp())
            .collect();
        Self::new(beta, vec![1.0 / l; components])
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }
}

fn check_simplex(rho: &[f64]) -> Result<()> {
    let s: f64 = rho.iter().sum();
    if rho.iter().any(|p| !(p.is_finite() && *p > 0.0)) || (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Numerical(format!("proportions off the simplex: {rho:?}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LikelihoodState {
    pub mixture: MixtureParams,
    pub alpha: f64,
    pub window: usize,
}

impl LikelihoodState {
    pub fn new(mixture: MixtureParams, alpha: f64, window: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1]")));
        }
        if window % 2 == 0 {
            return Err(Error::InvalidArgument(format!("window {window} must be odd")));
        }
        Ok(Self { mixture, alpha, window })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LikelihoodHyperpriors {
    /// Symmetric Dirichlet concentration.
    pub kappa: f64,
    pub mu_beta: f64,
    pub sigma_beta: f64,
}

impl Default for LikelihoodHyperpriors {
    fn default() -> Self {
        Self {
            kappa: 0.5,
            mu_beta: 0.0,
            sigma_beta: 2.3,
        }
    }
}

/// Per-component log weights `log rho_l + 0.5 log(beta_l / 2 pi)`.
fn log_weights(m: &MixtureParams) -> Vec<f64> {
    m.beta
        .iter()
        .zip(&m.rho)
        .map(|(b, p)| p.ln() + 0.5 * (b / (2.0 * PI)).ln())
        .collect()
}

/// Log mixture density at `r`; fills `resp` with responsibilities.
#[inline]
fn log_density(r: f64, m: &MixtureParams, lw: &[f64], resp: &mut [f64]) -> f64 {
    let mut top = f64::NEG_INFINITY;
    for l in 0..lw.len() {
        resp[l] = lw[l] - 0.5 * m.beta[l] * r * r;
        top = top.max(resp[l]);
    }
    let mut s = 0.0;
    for v in resp.iter_mut() {
        *v = (*v - top).exp();
        s += *v;
    }
    resp.iter_mut().for_each(|v| *v /= s);
    top + s.ln()
}

/// Posterior component responsibilities, voxel-major (`N x L`).
pub fn responsibilities(r: &[f64], mixture: &MixtureParams) -> Vec<f64> {
    let l = mixture.len();
    let lw = log_weights(mixture);
    let mut out = vec![0.0; r.len() * l];
    for (i, &ri) in r.iter().enumerate() {
        log_density(ri, mixture, &lw, &mut out[i * l..(i + 1) * l]);
    }
    out
}

/// `-alpha * sum_i log sum_l rho_l N(r_i; 0, 1/beta_l)`.
pub fn data_energy(r: &ScalarField, state: &LikelihoodState) -> Result<f64> {
    Ok(data_energy_grad(r.values(), state)?.0)
}

/// Energy and its gradient with respect to each residual.
pub fn data_energy_grad(r: &[f64], state: &LikelihoodState) -> Result<(f64, Vec<f64>)> {
    let m = &state.mixture;
    let lw = log_weights(m);
    let mut resp = vec![0.0; m.len()];
    let mut energy = 0.0;
    let mut grad = vec![0.0; r.len()];
    for (i, &ri) in r.iter().enumerate() {
        energy -= log_density(ri, m, &lw, &mut resp);
        let score: f64 = resp.iter().zip(&m.beta).map(|(g, b)| g * b).sum();
        grad[i] = state.alpha * score * ri;
    }
    energy *= state.alpha;
    if !energy.is_finite() {
        return Err(Error::NonFinite {
            stage: "data energy",
            index: 0,
        });
    }
    ensure_finite(&grad, "data energy gradient")?;
    Ok((energy, grad))
}

fn lag_one_correlation(r: &ScalarField, axis: usize) -> Option<f64> {
    let grid = r.grid();
    let stride = grid.strides()[axis];
    let v = r.values();
    let (mut n, mut sa, mut sb) = (0.0, 0.0, 0.0);
    let pairs: Vec<(f64, f64)> = (0..v.len())
        .filter(|&i| grid.coords(i)[axis] + 1 < grid.dims()[axis])
        .map(|i| (v[i], v[i + stride]))
        .collect();
    for &(a, b) in &pairs {
        n += 1.0;
        sa += a;
        sb += b;
    }
    let (ma, mb) = (sa / n, sb / n);
    let (mut cab, mut caa, mut cbb) = (0.0, 0.0, 0.0);
    for &(a, b) in &pairs {
        cab += (a - ma) * (b - mb);
        caa += (a - ma) * (a - ma);
        cbb += (b - mb) * (b - mb);
    }
    if caa <= 0.0 || cbb <= 0.0 {
        return None;
    }
    Some(cab / (caa * cbb).sqrt())
}

/// Effective-sample fraction of a residual map from per-axis lag-one
/// autocorrelations, in `(0, 1]`.
pub fn virtual_decimation(r: &ScalarField) -> f64 {
    let mut alpha = 1.0;
    for axis in 0..r.grid().ndim() {
        let factor = match lag_one_correlation(r, axis) {
            Some(rho) => ((1.0 - rho) / (1.0 + rho)).max(ALPHA_FLOOR),
            None => ALPHA_FLOOR,
        };
        alpha *= factor;
    }
    alpha.min(1.0)
}

/// Log-normal log-density of every precision plus the Dirichlet log-density
/// of the proportions, normalising constants included.
pub fn log_hyperprior(mixture: &MixtureParams, hp: &LikelihoodHyperpriors) -> Result<f64> {
    check_simplex(&mixture.rho)?;
    let s2 = hp.sigma_beta * hp.sigma_beta;
    let mut lp = 0.0;
    for &b in &mixture.beta {
        let z = b.ln() - hp.mu_beta;
        lp += -b.ln() - hp.sigma_beta.ln() - 0.5 * (2.0 * PI).ln() - z * z / (2.0 * s2);
    }
    let l = mixture.len() as f64;
    lp += ln_gamma(hp.kappa * l) - l * ln_gamma(hp.kappa);
    lp += mixture.rho.iter().map(|p| (hp.kappa - 1.0) * p.ln()).sum::<f64>();
    Ok(lp)
}
