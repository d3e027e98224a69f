//! Variational inference with a diagonal plus low-rank Gaussian.

use super::adam::{decayed, Adam};
use super::model::PosteriorModel;
use crate::error::{Error, Result};
use crate::posterior::LowRankGaussian;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViConfig {
    pub iters: usize,
    pub lr_posterior: f64,
    pub lr_decay: f64,
    pub rank: usize,
    pub sigma_init: f64,
    pub u_init: f64,
    /// Iterations in the moving average and in the patience window.
    pub plateau_window: usize,
    pub plateau_tol: f64,
    pub seed: u64,
}

impl Default for ViConfig {
    fn default() -> Self {
        Self {
            iters: 1024,
            lr_posterior: 1e-2,
            lr_decay: 1e-3,
            rank: 1,
            sigma_init: 0.5,
            u_init: 0.1,
            plateau_window: 50,
            plateau_tol: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViTraceRow {
    pub iteration: usize,
    pub elbo: f64,
    pub expected_energy: f64,
    pub entropy: f64,
}

#[derive(Clone, Debug)]
pub struct ViResult {
    pub q: LowRankGaussian,
    pub trace: Vec<ViTraceRow>,
    pub plateaued: bool,
}

/// Stops once the moving-average ELBO has not beaten its best by more than
/// `tol` for `window` iterations.
#[derive(Clone, Debug)]
struct Plateau {
    window: usize,
    tol: f64,
    sum: f64,
    best: f64,
    best_at: usize,
}

impl Plateau {
    fn update(&mut self, trace: &[ViTraceRow]) -> bool {
        let k = trace.len() - 1;
        self.sum += trace[k].elbo;
        if trace.len() > self.window {
            self.sum -= trace[k - self.window].elbo;
        }
        if trace.len() < self.window {
            return false;
        }
        let avg = self.sum / self.window as f64;
        if avg > self.best + self.tol {
            self.best = avg;
            self.best_at = k;
        }
        k - self.best_at >= self.window
    }
}

pub fn run_vi<M: PosteriorModel>(model: &mut M, cfg: &ViConfig) -> Result<ViResult> {
    let q = LowRankGaussian::isotropic(model.dim(), cfg.rank, cfg.sigma_init, cfg.u_init)?;
    run_vi_from(model, q, cfg)
}

/// Maximise the ELBO starting from `q`.
pub fn run_vi_from<M: PosteriorModel>(model: &mut M, mut q: LowRankGaussian, cfg: &ViConfig) -> Result<ViResult> {
    if !(cfg.lr_posterior > 0.0) || cfg.lr_decay < 0.0 {
        return Err(Error::InvalidArgument("VI step size must be positive and decay non-negative".into()));
    }
    let p = q.dim();
    let r = q.rank();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut mu = q.mu().to_vec();
    let mut log_var: Vec<f64> = q.sigma().iter().map(|s| 2.0 * s.ln()).collect();
    let mut u = q.u().to_vec();
    let mut adam = [Adam::new(p), Adam::new(p), Adam::new(p * r)];
    let mut trace = Vec::with_capacity(cfg.iters);
    let mut plateau = Plateau {
        window: cfg.plateau_window.max(1),
        tol: cfg.plateau_tol,
        sum: 0.0,
        best: f64::NEG_INFINITY,
        best_at: 0,
    };
    let mut plateaued = false;
    for k in 0..cfg.iters {
        let pair = q.sample_pair(&mut rng);
        let (e_plus, g_plus) = model.energy_grad(&pair.plus)?;
        let (e_minus, g_minus) = model.energy_grad(&pair.minus)?;
        let entropy = q.entropy()?;
        let expected = 0.5 * (e_plus + e_minus);
        let elbo = entropy - expected;
        if !elbo.is_finite() {
            return Err(Error::Diverged {
                iteration: k,
                reason: "ELBO is not finite".into(),
            });
        }
        let (prec_diag, prec_u) = q.entropy_pieces()?;
        let mut g_mu = vec![0.0; p];
        let mut g_lv = vec![0.0; p];
        let mut g_u = vec![0.0; p * r];
        for i in 0..p {
            let gd = 0.5 * (g_plus[i] - g_minus[i]);
            g_mu[i] = 0.5 * (g_plus[i] + g_minus[i]);
            let s = q.sigma()[i];
            g_lv[i] = 0.5 * gd * pair.eps[i] * s - 0.5 * s * s * prec_diag[i];
            for a in 0..r {
                g_u[i * r + a] = gd * pair.x[a] - prec_u[i * r + a];
            }
        }
        let lr = decayed(cfg.lr_posterior, cfg.lr_decay, k);
        adam[0].step(&mut mu, &g_mu, lr);
        adam[1].step(&mut log_var, &g_lv, lr);
        adam[2].step(&mut u, &g_u, lr);
        q.set_params(&mu, &log_var, &u);
        model.end_iteration(k)?;

        trace.push(ViTraceRow {
            iteration: k,
            elbo,
            expected_energy: expected,
            entropy,
        });
        if plateau.update(&trace) {
            log::info!("ELBO plateau after {} iterations", k + 1);
            plateaued = true;
            break;
        }
    }
    Ok(ViResult { q, trace, plateaued })
}
