//! Gradients of the registration energy, variational inference, hyperparameter
//! updates and Langevin sampling.

mod adam;
mod energy;
mod model;
mod saem;
mod sgld;
mod vi;

pub use adam::{decayed, Adam};
pub use energy::{energy_and_grad, EnergyGradient, Parametrisation, RegistrationProblem};
pub use model::{GaussianTarget, HyperTraceRow, PosteriorModel, RegistrationModel};
pub use saem::{saem_gradient, saem_step, SaemConfig, SaemGradient, SaemOptimiser, SaemSample, MAX_LOGIT_GAP};
pub use sgld::{run_chains, run_sgld, SamplerState, SgldConfig, SgldResult};
pub use vi::{run_vi, run_vi_from, ViConfig, ViResult, ViTraceRow};
