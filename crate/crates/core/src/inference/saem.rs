//! Stochastic-approximation updates of the mixture and regulariser hyperparameters.

use super::adam::{decayed, Adam};
use crate::error::Result;
use crate::likelihood::{responsibilities, LikelihoodHyperpriors, LikelihoodState, MixtureParams};
use crate::regulariser::{RegMode, RegulariserHyperpriors, RegulariserState};

/// Largest allowed gap between proportion logits, keeping every proportion positive.
pub const MAX_LOGIT_GAP: f64 = 500.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SaemConfig {
    pub lr_gmm: f64,
    pub lr_reg: f64,
    pub lr_decay: f64,
}

impl Default for SaemConfig {
    fn default() -> Self {
        Self {
            lr_gmm: 2e-1,
            lr_reg: 1e-2,
            lr_decay: 1e-3,
        }
    }
}

/// Statistics of one posterior sample needed by the update.
#[derive(Clone, Debug)]
pub struct SaemSample {
    pub residual: Vec<f64>,
    pub chi2: f64,
}

/// Ascent direction for `(-0.5 log beta, logits)` and `(mu_chi2, log sigma_chi2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SaemGradient {
    pub theta: Vec<f64>,
    pub logits: Vec<f64>,
    pub reg: [f64; 2],
}

pub fn saem_gradient(
    samples: &[SaemSample],
    like: &LikelihoodState,
    reg: &RegulariserState,
    lhp: &LikelihoodHyperpriors,
    rhp: &RegulariserHyperpriors,
) -> SaemGradient {
    let mix = &like.mixture;
    let l = mix.len();
    let ns = samples.len().max(1) as f64;
    let mut theta = vec![0.0; l];
    let mut logits = vec![0.0; l];
    for s in samples {
        let gamma = responsibilities(&s.residual, mix);
        for (i, &r) in s.residual.iter().enumerate() {
            for c in 0..l {
                let g = gamma[i * l + c];
                theta[c] -= like.alpha * g * (1.0 - mix.beta()[c] * r * r);
                logits[c] += like.alpha * (g - mix.rho()[c]);
            }
        }
    }
    let s2b = lhp.sigma_beta * lhp.sigma_beta;
    for c in 0..l {
        theta[c] = theta[c] / ns + 2.0 * (mix.beta()[c].ln() - lhp.mu_beta) / s2b;
        logits[c] = logits[c] / ns + (lhp.kappa - 1.0) * (1.0 - l as f64 * mix.rho()[c]);
    }

    let mut rg = [0.0; 2];
    if reg.mode == RegMode::LogNormal {
        let s2 = reg.sigma_chi2 * reg.sigma_chi2;
        let log_s = reg.sigma_chi2.ln();
        let vs2 = rhp.varsigma * rhp.varsigma;
        for s in samples {
            let dev = s.chi2.max(crate::regulariser::CHI2_FLOOR).ln() - reg.mu_chi2;
            rg[0] += dev / s2;
            rg[1] += -1.0 + dev * dev / s2;
        }
        rg[0] = rg[0] / ns + 0.5 * reg.nu - 0.5 * rhp.lambda_init * reg.mu_chi2.exp();
        rg[1] = rg[1] / ns - 2.0 * (2.0 * log_s - rhp.eta) / vs2;
    }
    SaemGradient { theta, logits, reg: rg }
}

#[derive(Clone, Debug)]
pub struct SaemOptimiser {
    cfg: SaemConfig,
    gmm: Adam,
    reg: Adam,
}

impl SaemOptimiser {
    pub fn new(cfg: SaemConfig, components: usize) -> Self {
        Self {
            cfg,
            gmm: Adam::new(2 * components),
            reg: Adam::new(2),
        }
    }

    pub fn config(&self) -> SaemConfig {
        self.cfg
    }

    /// One ascent step at outer iteration `k` on the frozen `samples`.
    pub fn step(
        &mut self,
        samples: &[SaemSample],
        like: &mut LikelihoodState,
        reg: &mut RegulariserState,
        lhp: &LikelihoodHyperpriors,
        rhp: &RegulariserHyperpriors,
        k: usize,
    ) -> Result<()> {
        let g = saem_gradient(samples, like, reg, lhp, rhp);
        let l = like.mixture.len();
        let mut params: Vec<f64> = like
            .mixture
            .beta()
            .iter()
            .map(|b| -0.5 * b.ln())
            .chain(like.mixture.rho().iter().map(|p| p.ln()))
            .collect();
        let descent: Vec<f64> = g.theta.iter().chain(&g.logits).map(|v| -v).collect();
        self.gmm.step(&mut params, &descent, decayed(self.cfg.lr_gmm, self.cfg.lr_decay, k));

        let beta: Vec<f64> = params[..l].iter().map(|t| (-2.0 * t).exp()).collect();
        let logits = &mut params[l..];
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        logits.iter_mut().for_each(|a| *a = a.max(top - MAX_LOGIT_GAP));
        let z: f64 = logits.iter().map(|a| (a - top).exp()).sum();
        let rho: Vec<f64> = logits.iter().map(|a| (a - top).exp() / z).collect();
        like.mixture = MixtureParams::new(beta, rho)?;

        if reg.mode == RegMode::LogNormal {
            let mut p = [reg.mu_chi2, reg.sigma_chi2.ln()];
            self.reg
                .step(&mut p, &[-g.reg[0], -g.reg[1]], decayed(self.cfg.lr_reg, self.cfg.lr_decay, k));
            reg.mu_chi2 = p[0];
            reg.sigma_chi2 = p[1].exp();
            reg.validate()?;
        }
        Ok(())
    }
}

/// Single update with a caller-owned optimiser.
pub fn saem_step(
    opt: &mut SaemOptimiser,
    samples: &[SaemSample],
    like: &mut LikelihoodState,
    reg: &mut RegulariserState,
    lhp: &LikelihoodHyperpriors,
    rhp: &RegulariserHyperpriors,
    k: usize,
) -> Result<()> {
    opt.step(samples, like, reg, lhp, rhp, k)
}
