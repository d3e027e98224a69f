//! Targets the VI and SGLD drivers operate on.

use super::energy::{EnergyGradient, RegistrationProblem};
use super::saem::{SaemConfig, SaemOptimiser, SaemSample};
use crate::error::{Error, Result};
use crate::likelihood::{virtual_decimation, LikelihoodHyperpriors, LikelihoodState};
use crate::regulariser::{RegulariserHyperpriors, RegulariserState};
use std::sync::Arc;

/// A negative log density known up to a constant.
pub trait PosteriorModel {
    fn dim(&self) -> usize;

    /// Energy and its gradient at `w`.
    fn energy_grad(&mut self, w: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// Called once per outer iteration after all evaluations of that iteration.
    fn end_iteration(&mut self, _k: usize) -> Result<()> {
        Ok(())
    }
}

/// `0.5 (w - mean)^T precision (w - mean)` with a dense precision.
#[derive(Clone, Debug)]
pub struct GaussianTarget {
    pub mean: Vec<f64>,
    /// Row-major `P x P`.
    pub precision: Vec<f64>,
}

impl GaussianTarget {
    pub fn new(mean: Vec<f64>, precision: Vec<f64>) -> Result<Self> {
        if precision.len() != mean.len() * mean.len() {
            return Err(Error::InvalidArgument("precision must be P x P".into()));
        }
        Ok(Self { mean, precision })
    }

    pub fn standard(dim: usize) -> Self {
        let mut precision = vec![0.0; dim * dim];
        for i in 0..dim {
            precision[i * dim + i] = 1.0;
        }
        Self {
            mean: vec![0.0; dim],
            precision,
        }
    }
}

impl PosteriorModel for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn energy_grad(&mut self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        let p = self.mean.len();
        let d: Vec<f64> = w.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let g: Vec<f64> = (0..p)
            .map(|i| (0..p).map(|j| self.precision[i * p + j] * d[j]).sum())
            .collect();
        let e = 0.5 * d.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        Ok((e, g))
    }
}

/// Hyperparameters after an outer iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperTraceRow {
    pub iteration: usize,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub rho: Vec<f64>,
    pub mu_chi2: f64,
    pub sigma_chi2: f64,
    pub chi2: f64,
    pub energy_data: f64,
    pub energy_reg: f64,
}

/// Registration posterior with hyperparameters updated between iterations.
#[derive(Clone, Debug)]
pub struct RegistrationModel {
    problem: Arc<RegistrationProblem>,
    pub like: LikelihoodState,
    pub reg: RegulariserState,
    pub lhp: LikelihoodHyperpriors,
    pub rhp: RegulariserHyperpriors,
    saem: SaemOptimiser,
    /// Hyperparameter updates on or off.
    pub learn: bool,
    /// Keep one trace row every this many iterations.
    pub trace_every: usize,
    stash: Vec<EnergyGradient>,
    trace: Vec<HyperTraceRow>,
}

impl RegistrationModel {
    /// Sets `alpha` from the residual of the identity transformation.
    pub fn new(
        problem: Arc<RegistrationProblem>,
        mut like: LikelihoodState,
        reg: RegulariserState,
        lhp: LikelihoodHyperpriors,
        rhp: RegulariserHyperpriors,
        saem: SaemConfig,
    ) -> Result<Self> {
        let zero = vec![0.0; problem.num_params()];
        let eval = problem.evaluate(&zero, &like, &reg)?;
        like.alpha = virtual_decimation(&eval.residual);
        let components = like.mixture.len();
        Ok(Self {
            problem,
            like,
            reg,
            lhp,
            rhp,
            saem: SaemOptimiser::new(saem, components),
            learn: true,
            trace_every: 1,
            stash: Vec::new(),
            trace: Vec::new(),
        })
    }

    pub fn problem(&self) -> &Arc<RegistrationProblem> {
        &self.problem
    }

    pub fn trace(&self) -> &[HyperTraceRow] {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Vec<HyperTraceRow> {
        std::mem::take(&mut self.trace)
    }

    /// Restart the optimiser moments, keeping the current hyperparameters.
    pub fn reset_optimiser(&mut self, saem: SaemConfig) {
        self.saem = SaemOptimiser::new(saem, self.like.mixture.len());
    }
}

impl PosteriorModel for RegistrationModel {
    fn dim(&self) -> usize {
        self.problem.num_params()
    }

    fn energy_grad(&mut self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut eval = self.problem.evaluate(w, &self.like, &self.reg)?;
        let out = (eval.energy(), std::mem::take(&mut eval.d_w));
        self.stash.push(eval);
        Ok(out)
    }

    fn end_iteration(&mut self, k: usize) -> Result<()> {
        if self.stash.is_empty() {
            return Ok(());
        }
        let n = self.stash.len() as f64;
        let mut row = HyperTraceRow {
            iteration: k,
            alpha: self.like.alpha,
            beta: Vec::new(),
            rho: Vec::new(),
            mu_chi2: 0.0,
            sigma_chi2: 0.0,
            chi2: self.stash.iter().map(|e| e.chi2).sum::<f64>() / n,
            energy_data: self.stash.iter().map(|e| e.energy_data).sum::<f64>() / n,
            energy_reg: self.stash.iter().map(|e| e.energy_reg).sum::<f64>() / n,
        };
        if self.learn {
            let samples: Vec<SaemSample> = self
                .stash
                .iter()
                .map(|e| SaemSample {
                    residual: e.residual.values().to_vec(),
                    chi2: e.chi2,
                })
                .collect();
            self.saem
                .step(&samples, &mut self.like, &mut self.reg, &self.lhp, &self.rhp, k)?;
            self.like.alpha = virtual_decimation(&self.stash[0].residual);
        }
        row.alpha = self.like.alpha;
        row.beta = self.like.mixture.beta().to_vec();
        row.rho = self.like.mixture.rho().to_vec();
        row.mu_chi2 = self.reg.mu_chi2;
        row.sigma_chi2 = self.reg.sigma_chi2;
        if k % self.trace_every.max(1) == 0 {
            self.trace.push(row);
        }
        self.stash.clear();
        Ok(())
    }
}
