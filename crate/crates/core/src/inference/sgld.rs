//! Preconditioned Langevin dynamics.

use super::model::PosteriorModel;
use crate::error::{ensure_finite, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgldConfig {
    pub tau: f64,
    /// Total number of updates, burn-in included.
    pub n_steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Off: plain preconditioned gradient descent.
    pub noise: bool,
    pub seed: u64,
}

impl SgldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau {} must be positive", self.tau)));
        }
        if self.thin == 0 {
            return Err(Error::InvalidArgument("thin must be >= 1".into()));
        }
        Ok(())
    }

    /// Steps needed for `retained` samples after burn-in.
    pub fn steps_for(burn_in: usize, thin: usize, retained: usize) -> usize {
        burn_in + thin * retained
    }
}

#[derive(Clone, Debug)]
pub struct SamplerState {
    pub w: Vec<f64>,
    pub tau: f64,
    pub precond: Vec<f64>,
    pub rng: ChaCha8Rng,
    pub k: usize,
}

impl SamplerState {
    /// Chain `stream` of the generator seeded by `seed`.
    pub fn new(w: Vec<f64>, tau: f64, precond: Vec<f64>, seed: u64, stream: u64) -> Result<Self> {
        if precond.len() != w.len() || precond.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidArgument("preconditioner must be positive and match w".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(Self { w, tau, precond, rng, k: 0 })
    }
}

#[derive(Clone, Debug)]
pub struct SgldResult {
    pub samples: Vec<Vec<f64>>,
    /// Energy at every update.
    pub energies: Vec<f64>,
    pub state: SamplerState,
}

/// `w += -tau A grad E + sqrt(2 tau A) xi`, one chain.
pub fn run_sgld<M: PosteriorModel>(model: &mut M, mut state: SamplerState, cfg: &SgldConfig) -> Result<SgldResult> {
    cfg.validate()?;
    let p = state.w.len();
    if p != model.dim() {
        return Err(Error::InvalidArgument(format!("state has {p} entries, model {}", model.dim())));
    }
    let drift: Vec<f64> = state.precond.iter().map(|a| cfg.tau * a).collect();
    let diffusion: Vec<f64> = state.precond.iter().map(|a| (2.0 * cfg.tau * a).sqrt()).collect();
    let mut samples = Vec::new();
    let mut energies = Vec::with_capacity(cfg.n_steps);
    for k in 0..cfg.n_steps {
        let (e, g) = model.energy_grad(&state.w)?;
        energies.push(e);
        for i in 0..p {
            state.w[i] -= drift[i] * g[i];
        }
        if cfg.noise {
            for i in 0..p {
                let xi: f64 = state.rng.sample(StandardNormal);
                state.w[i] += diffusion[i] * xi;
            }
        }
        if ensure_finite(&state.w, "sampler state").is_err() {
            return Err(Error::Diverged {
                iteration: k,
                reason: "non-finite sampler state".into(),
            });
        }
        model.end_iteration(k)?;
        state.k = k + 1;
        if k >= cfg.burn_in && (k + 1 - cfg.burn_in) % cfg.thin == 0 {
            samples.push(state.w.clone());
        }
    }
    Ok(SgldResult { samples, energies, state })
}

/// Independent chains on separate threads, each with its own model copy and
/// random stream.
pub fn run_chains<M: PosteriorModel + Send>(
    chains: Vec<(M, SamplerState)>,
    cfg: &SgldConfig,
) -> Vec<Result<(M, SgldResult)>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = chains
            .into_iter()
            .map(|(mut model, state)| {
                scope.spawn(move || run_sgld(&mut model, state, cfg).map(|r| (model, r)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    })
}
