//! Transformation prior on the squared gradient energy of the velocity.

mod digamma;

pub use digamma::digamma;

use crate::error::{Error, Result};
use crate::field::{squared_gradient_norm_and_normal, VectorField};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

pub const CHI2_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RegMode {
    /// Log-normal prior on `chi2` with learnt location and scale.
    LogNormal,
    /// `0.5 * lambda * chi2`.
    FixedL2 { lambda: f64 },
    /// Gamma prior on the precision, marginalised; equal to `FixedL2` up to a constant.
    GammaPrior { lambda: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegulariserHyperpriors {
    pub lambda_init: f64,
    pub eta: f64,
    pub varsigma: f64,
}

impl Default for RegulariserHyperpriors {
    fn default() -> Self {
        Self {
            lambda_init: 1.2,
            eta: 2.8,
            varsigma: 5.0,
        }
    }
}

impl RegulariserHyperpriors {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_init", self.lambda_init), ("eta", self.eta), ("varsigma", self.varsigma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegulariserState {
    pub mu_chi2: f64,
    /// Scale of `log chi2` (a standard deviation).
    pub sigma_chi2: f64,
    /// Degrees of freedom.
    pub nu: f64,
    pub mode: RegMode,
}

impl RegulariserState {
    /// Location at the hyperprior mean, `sigma_chi2^2 = exp(eta)`.
    pub fn initial(nu: f64, mode: RegMode, hp: &RegulariserHyperpriors) -> Result<Self> {
        hp.validate()?;
        let state = Self {
            mu_chi2: init_mu_chi2(nu, hp.lambda_init)?,
            sigma_chi2: (0.5 * hp.eta).exp(),
            nu,
            mode,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_chi2.is_finite() && self.sigma_chi2 > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma_chi2 {} must be positive", self.sigma_chi2)));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) || !self.mu_chi2.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid nu {} / mu_chi2 {}", self.nu, self.mu_chi2)));
        }
        match self.mode {
            RegMode::FixedL2 { lambda } | RegMode::GammaPrior { lambda } if !(lambda > 0.0 && lambda.is_finite()) => {
                Err(Error::InvalidArgument(format!("lambda_reg {lambda} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

/// Sum of squared forward differences over all components and axes.
pub fn chi_squared(w: &VectorField) -> f64 {
    squared_gradient_norm_and_normal(w).0
}

/// Energy as a function of `chi2` and its derivative with respect to `chi2`.
pub fn reg_energy_of_chi2(chi2: f64, state: &RegulariserState) -> (f64, f64) {
    match state.mode {
        RegMode::FixedL2 { lambda } => (0.5 * lambda * chi2, 0.5 * lambda),
        RegMode::LogNormal => {
            let (c, active) = if chi2 <= CHI2_FLOOR {
                log::debug!("chi2 {chi2:e} at or below floor, evaluating at {CHI2_FLOOR:e}");
                (CHI2_FLOOR, false)
            } else {
                (chi2, true)
            };
            let lc = c.ln();
            let s2 = state.sigma_chi2 * state.sigma_chi2;
            let d = lc - state.mu_chi2;
            let e = 0.5 * state.nu * lc + state.sigma_chi2.ln() + d * d / (2.0 * s2);
            let de = if active { (0.5 * state.nu + d / s2) / c } else { 0.0 };
            (e, de)
        }
        RegMode::GammaPrior { lambda } => {
            let c = chi2.max(CHI2_FLOOR);
            let h = 0.5 * state.nu;
            // marginal of the gamma-distributed precision, written out term by term
            let log_joint = (h - 1.0) * c.ln() - 0.5 * lambda * c + h * (0.5 * lambda).ln() - ln_gamma(h);
            let e = (h - 1.0) * c.ln() - log_joint;
            (e, 0.5 * lambda)
        }
    }
}

pub fn reg_energy(w: &VectorField, state: &RegulariserState) -> f64 {
    reg_energy_of_chi2(chi_squared(w), state).0
}

/// Energy and gradient with respect to the field values.
pub fn reg_energy_grad(w: &VectorField, state: &RegulariserState) -> (f64, Vec<f64>) {
    let (chi2, normal) = squared_gradient_norm_and_normal(w);
    let (e, de) = reg_energy_of_chi2(chi2, state);
    (e, normal.iter().map(|v| 2.0 * de * v).collect())
}

/// Mean of `log X` for `X ~ Gamma(nu / 2, rate = lambda_init / 2)`.
pub fn init_mu_chi2(nu: f64, lambda_init: f64) -> Result<f64> {
    if !(nu >= 2.0 && nu.is_finite()) || !(lambda_init > 0.0 && lambda_init.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "init_mu_chi2 needs nu >= 2 and lambda_init > 0, got {nu}, {lambda_init}"
        )));
    }
    Ok(digamma(0.5 * nu)? - (0.5 * lambda_init).ln())
}

/// Gamma log-density of `exp(mu_chi2)` including the `d exp(mu)/d mu`
/// Jacobian, plus the log-normal log-density of `sigma_chi2^2`.
pub fn reg_hyper_logprior(state: &RegulariserState, hp: &RegulariserHyperpriors) -> f64 {
    let a = 0.5 * state.nu;
    let b = 0.5 * hp.lambda_init;
    let gamma = a * b.ln() - ln_gamma(a) + a * state.mu_chi2 - b * state.mu_chi2.exp();
    let v = state.sigma_chi2 * state.sigma_chi2;
    let z = v.ln() - hp.eta;
    let lognormal = -v.ln() - hp.varsigma.ln() - 0.5 * (2.0 * PI).ln() - z * z / (2.0 * hp.varsigma * hp.varsigma);
    gamma + lognormal
}
