//! Run directories for the command-line drivers.
//!
//! A data directory holds `fixed.mvf`, `moving.mvf` and optionally the label
//! maps `fixed_labels.mvf` / `moving_labels.mvf`. Every run directory holds
//! the resolved `config.txt` and a `samples/` directory of inverse
//! displacements that `metrics` consumes.

use crate::error::{Error, Result};
use crate::field::{LabelField, ScalarField, VectorField};
use crate::inference::{
    run_chains, run_vi, HyperTraceRow, RegistrationModel, RegistrationProblem, SamplerState,
    ViTraceRow,
};
use crate::io::csv::{fmt_f64, write_elbo_trace, write_hyper_trace, write_structures, write_table};
use crate::io::mvf::{read_labels, read_scalar, read_vector, write_labels, write_scalar, write_vector};
use crate::io::synth::{generate, SynthConfig, SynthPair};
use crate::io::RunConfig;
use crate::likelihood::{LikelihoodState, MixtureParams};
use crate::metrics::{jacobian_report, mean_dice, pearson_udul, structure_report, SampleSet, SampleSource};
use crate::posterior::LowRankGaussian;
use crate::regulariser::RegulariserState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub fn write_synth(dir: &Path, cfg: &SynthConfig) -> Result<SynthPair> {
    std::fs::create_dir_all(dir)?;
    let pair = generate(cfg)?;
    write_scalar(&dir.join("fixed.mvf"), &pair.fixed)?;
    write_scalar(&dir.join("moving.mvf"), &pair.moving)?;
    write_labels(&dir.join("fixed_labels.mvf"), &pair.fixed_labels)?;
    write_labels(&dir.join("moving_labels.mvf"), &pair.moving_labels)?;
    write_vector(&dir.join("velocity.mvf"), &pair.velocity)?;
    write_vector(&dir.join("displacement.mvf"), &pair.displacement)?;
    let dims: Vec<String> = cfg.dims.iter().map(|d| d.to_string()).collect();
    std::fs::write(
        dir.join("synth.txt"),
        format!(
            "dims = {}\nlabels = {}\namplitude = {:?}\nsmoothness = {:?}\nnoise = {:?}\ntexture = {:?}\ntexture_scale = {:?}\nseed = {}\n",
            dims.join("x"),
            cfg.labels,
            cfg.amplitude,
            cfg.smoothness,
            cfg.noise,
            cfg.texture,
            cfg.texture_scale,
            cfg.seed
        ),
    )?;
    Ok(pair)
}

pub fn load_images(dir: &Path) -> Result<(ScalarField, ScalarField)> {
    Ok((read_scalar(&dir.join("fixed.mvf"))?, read_scalar(&dir.join("moving.mvf"))?))
}

pub fn load_labels(dir: &Path) -> Result<(LabelField, LabelField)> {
    Ok((
        read_labels(&dir.join("fixed_labels.mvf"))?,
        read_labels(&dir.join("moving_labels.mvf"))?,
    ))
}

pub fn build_problem(fixed: ScalarField, moving: ScalarField, cfg: &RunConfig) -> Result<Arc<RegistrationProblem>> {
    Ok(Arc::new(RegistrationProblem::new(
        fixed,
        moving,
        cfg.svf_config(),
        cfg.parametrisation(),
    )?))
}

/// Model with the initial hyperparameters of `cfg`.
pub fn initial_model(problem: Arc<RegistrationProblem>, cfg: &RunConfig) -> Result<RegistrationModel> {
    let like = LikelihoodState::new(MixtureParams::initial(cfg.components, cfg.mu_beta)?, 1.0, cfg.window)?;
    let rhp = cfg.regulariser_hyperpriors();
    let reg = RegulariserState::initial(problem.nu(), cfg.reg_mode(), &rhp)?;
    let mut model = RegistrationModel::new(
        problem,
        like,
        reg,
        cfg.likelihood_hyperpriors(),
        rhp,
        cfg.saem_config(),
    )?;
    model.trace_every = 1;
    Ok(model)
}

/// Hyperparameter state carried from VI into SGLD.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperState {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub rho: Vec<f64>,
    pub mu_chi2: f64,
    pub sigma_chi2: f64,
}

impl HyperState {
    pub fn of(model: &RegistrationModel) -> Self {
        Self {
            alpha: model.like.alpha,
            beta: model.like.mixture.beta().to_vec(),
            rho: model.like.mixture.rho().to_vec(),
            mu_chi2: model.reg.mu_chi2,
            sigma_chi2: model.reg.sigma_chi2,
        }
    }

    pub fn apply(&self, model: &mut RegistrationModel) -> Result<()> {
        model.like.mixture = MixtureParams::new(self.beta.clone(), self.rho.clone())?;
        model.like.alpha = self.alpha;
        model.reg.mu_chi2 = self.mu_chi2;
        model.reg.sigma_chi2 = self.sigma_chi2;
        model.reg.validate()
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ");
        format!(
            "alpha = {}\nbeta = {}\nrho = {}\nmu_chi2 = {}\nsigma_chi2 = {}\n",
            fmt_f64(self.alpha),
            join(&self.beta),
            join(&self.rho),
            fmt_f64(self.mu_chi2),
            fmt_f64(self.sigma_chi2)
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut alpha = None;
        let mut beta = None;
        let mut rho = None;
        let mut mu = None;
        let mut sigma = None;
        let nums = |v: &str| -> Result<Vec<f64>> {
            v.split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Format(format!("bad number {t:?} in state"))))
                .collect()
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad state line {line:?}")))?;
            let one = |v: &str| -> Result<f64> {
                match nums(v)?.as_slice() {
                    [x] => Ok(*x),
                    _ => Err(Error::Format(format!("expected one value for {}", k.trim()))),
                }
            };
            match k.trim() {
                "alpha" => alpha = Some(one(v)?),
                "beta" => beta = Some(nums(v)?),
                "rho" => rho = Some(nums(v)?),
                "mu_chi2" => mu = Some(one(v)?),
                "sigma_chi2" => sigma = Some(one(v)?),
                other => return Err(Error::Format(format!("unknown state key {other:?}"))),
            }
        }
        let missing = |name: &str| Error::Format(format!("state is missing {name}"));
        Ok(Self {
            alpha: alpha.ok_or_else(|| missing("alpha"))?,
            beta: beta.ok_or_else(|| missing("beta"))?,
            rho: rho.ok_or_else(|| missing("rho"))?,
            mu_chi2: mu.ok_or_else(|| missing("mu_chi2"))?,
            sigma_chi2: sigma.ok_or_else(|| missing("sigma_chi2"))?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ViRun {
    pub q: LowRankGaussian,
    pub state: HyperState,
    pub elbo: Vec<ViTraceRow>,
    pub hyper: Vec<HyperTraceRow>,
    pub plateaued: bool,
}

pub fn vi(problem: &Arc<RegistrationProblem>, cfg: &RunConfig) -> Result<ViRun> {
    let mut model = initial_model(problem.clone(), cfg)?;
    let res = run_vi(&mut model, &cfg.vi_config())?;
    Ok(ViRun {
        q: res.q,
        state: HyperState::of(&model),
        elbo: res.trace,
        hyper: model.take_trace(),
        plateaued: res.plateaued,
    })
}

fn param_field(problem: &RegistrationProblem, values: &[f64]) -> Result<VectorField> {
    VectorField::new(problem.param_grid().clone(), values.to_vec())
}

fn sample_path(dir: &Path, k: usize) -> PathBuf {
    dir.join("samples").join(format!("sample_{k:04}.mvf"))
}

fn write_samples(dir: &Path, problem: &RegistrationProblem, params: &[Vec<f64>], source: SampleSource) -> Result<()> {
    let sdir = dir.join("samples");
    if sdir.exists() {
        std::fs::remove_dir_all(&sdir)?;
    }
    std::fs::create_dir_all(&sdir)?;
    for (k, w) in params.iter().enumerate() {
        write_vector(&sample_path(dir, k), &problem.inverse_displacement(w)?)?;
    }
    let name = match source {
        SampleSource::Vi => "vi",
        SampleSource::Sgld => "sgld",
    };
    std::fs::write(sdir.join("source.txt"), format!("{name}\n"))?;
    Ok(())
}

/// Writes `config.txt`, the posterior parameters, both traces, the final
/// hyperparameters and `cfg.samples` draws from `q`.
pub fn write_vi(dir: &Path, problem: &RegistrationProblem, run: &ViRun, cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.txt"), cfg.echo())?;
    write_vector(&dir.join("q_mu.mvf"), &param_field(problem, run.q.mu())?)?;
    write_vector(&dir.join("q_sigma.mvf"), &param_field(problem, run.q.sigma())?)?;
    let (p, r) = (run.q.dim(), run.q.rank());
    for a in 0..r {
        let col: Vec<f64> = (0..p).map(|i| run.q.u()[i * r + a]).collect();
        write_vector(&dir.join(format!("q_u_{a}.mvf")), &param_field(problem, &col)?)?;
    }
    std::fs::write(dir.join("state.txt"), run.state.to_text())?;
    write_elbo_trace(&dir.join("elbo_trace.csv"), &run.elbo)?;
    write_hyper_trace(&dir.join("hyper_trace.csv"), &run.hyper)?;
    write_vector(&dir.join("mean_displacement.mvf"), &problem.inverse_displacement(run.q.mu())?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    let draws: Vec<Vec<f64>> = (0..cfg.samples).map(|_| run.q.sample_pair(&mut rng).plus).collect();
    write_samples(dir, problem, &draws, SampleSource::Vi)
}

/// Reads back what [`write_vi`] wrote, up to f32 rounding.
pub fn read_vi(dir: &Path) -> Result<(LowRankGaussian, HyperState)> {
    let mu = read_vector(&dir.join("q_mu.mvf"))?.into_values();
    let sigma = read_vector(&dir.join("q_sigma.mvf"))?.into_values();
    let mut cols = Vec::new();
    while dir.join(format!("q_u_{}.mvf", cols.len())).exists() {
        cols.push(read_vector(&dir.join(format!("q_u_{}.mvf", cols.len())))?.into_values());
    }
    let r = cols.len();
    let p = mu.len();
    let mut u = vec![0.0; p * r];
    for (a, c) in cols.iter().enumerate() {
        if c.len() != p {
            return Err(Error::Format("low-rank factor size mismatch".into()));
        }
        for i in 0..p {
            u[i * r + a] = c[i];
        }
    }
    let q = LowRankGaussian::new(mu, sigma, u, r)?;
    let state = HyperState::parse(&std::fs::read_to_string(dir.join("state.txt"))?)?;
    Ok((q, state))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// A draw from the variational posterior.
    Vi,
    Zero,
    /// Standard normal parameters.
    Randn,
}

impl std::str::FromStr for Init {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vi" => Ok(Init::Vi),
            "zero" => Ok(Init::Zero),
            "randn" => Ok(Init::Randn),
            _ => Err(Error::InvalidArgument(format!("unknown init {s:?}, expected vi, zero or randn"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SgldRun {
    /// Retained parameter vectors, chain after chain.
    pub samples: Vec<Vec<f64>>,
    pub hyper: Vec<Vec<HyperTraceRow>>,
    /// Energy every `trace_every` steps, per chain.
    pub energies: Vec<Vec<f64>>,
}

/// Starting point of chain `chain`.
pub fn initial_state(q: &LowRankGaussian, init: Init, seed: u64, chain: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 << 32 | chain as u64);
    match init {
        Init::Vi => q.sample_pair(&mut rng).plus,
        Init::Zero => vec![0.0; q.dim()],
        Init::Randn => (0..q.dim()).map(|_| rng.sample(StandardNormal)).collect(),
    }
}

/// Preconditioned Langevin chains started from `init`, preconditioned by the
/// VI variances and continuing from the VI hyperparameters.
pub fn sgld(
    problem: &Arc<RegistrationProblem>,
    q: &LowRankGaussian,
    state: &HyperState,
    cfg: &RunConfig,
    init: Init,
) -> Result<SgldRun> {
    let scfg = cfg.sgld_config();
    let precond = q.diag_variance();
    let mut chains = Vec::with_capacity(cfg.chains);
    for c in 0..cfg.chains {
        let mut model = initial_model(problem.clone(), cfg)?;
        state.apply(&mut model)?;
        model.trace_every = cfg.trace_every;
        let w0 = initial_state(q, init, cfg.seed, c);
        let st = SamplerState::new(w0, scfg.tau, precond.clone(), cfg.seed, c as u64)?;
        chains.push((model, st));
    }
    let mut out = SgldRun {
        samples: Vec::new(),
        hyper: Vec::new(),
        energies: Vec::new(),
    };
    for res in run_chains(chains, &scfg) {
        let (mut model, r) = res?;
        out.samples.extend(r.samples);
        out.hyper.push(model.take_trace());
        out.energies
            .push(r.energies.iter().step_by(cfg.trace_every).copied().collect());
    }
    Ok(out)
}

pub fn write_sgld(dir: &Path, problem: &RegistrationProblem, run: &SgldRun, cfg: &RunConfig, init: Init) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.txt"), cfg.echo())?;
    let name = match init {
        Init::Vi => "vi",
        Init::Zero => "zero",
        Init::Randn => "randn",
    };
    std::fs::write(dir.join("init.txt"), format!("{name}\n"))?;
    for (c, rows) in run.hyper.iter().enumerate() {
        write_hyper_trace(&dir.join(format!("hyper_trace_{c}.csv")), rows)?;
    }
    for (c, e) in run.energies.iter().enumerate() {
        let rows: Vec<Vec<String>> = e
            .iter()
            .enumerate()
            .map(|(i, v)| vec![(i * cfg.trace_every).to_string(), fmt_f64(*v)])
            .collect();
        write_table(&dir.join(format!("energy_{c}.csv")), &["step", "energy"], &rows)?;
    }
    write_samples(dir, problem, &run.samples, SampleSource::Sgld)
}

pub fn read_samples(dir: &Path) -> Result<SampleSet> {
    let source = match std::fs::read_to_string(dir.join("samples").join("source.txt"))?.trim() {
        "vi" => SampleSource::Vi,
        "sgld" => SampleSource::Sgld,
        other => return Err(Error::Format(format!("unknown sample source {other:?}"))),
    };
    let mut fields = Vec::new();
    while sample_path(dir, fields.len()).exists() {
        fields.push(read_vector(&sample_path(dir, fields.len()))?);
    }
    if fields.is_empty() {
        return Err(Error::Format(format!("no samples in {}", dir.display())));
    }
    SampleSet::new(fields, source)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsSummary {
    pub baseline_dice: f64,
    /// Mean over samples of the mean Dice over labels.
    pub mean_dice: f64,
    pub jacobian_mean: f64,
    pub jacobian_std: f64,
    pub jacobian_percentage: f64,
    pub pearson: Option<f64>,
}

/// Structure table, Jacobian report, Pearson r and the uncertainty map.
pub fn metrics(data_dir: &Path, run_dir: &Path, out: &Path) -> Result<MetricsSummary> {
    let (fixed_labels, moving_labels) = load_labels(data_dir)?;
    let samples = read_samples(run_dir)?;
    std::fs::create_dir_all(out)?;
    let rows = structure_report(&samples, &fixed_labels, &moving_labels)?;
    write_structures(&out.join("structures.csv"), &rows)?;
    let jac = jacobian_report(&samples)?;
    let jrows: Vec<Vec<String>> = jac
        .counts
        .iter()
        .enumerate()
        .map(|(k, c)| vec![k.to_string(), c.to_string()])
        .collect();
    write_table(&out.join("jacobian.csv"), &["sample", "nonpositive_voxels"], &jrows)?;
    if samples.len() >= 2 {
        write_scalar(
            &out.join("uncertainty.mvf"),
            &crate::metrics::displacement_uncertainty(&samples)?,
        )?;
    }
    let per_sample: Vec<f64> = samples
        .displacements
        .iter()
        .map(|d| mean_dice(&crate::field::warp_labels(&moving_labels, d)?, &fixed_labels))
        .collect::<Result<_>>()?;
    let summary = MetricsSummary {
        baseline_dice: mean_dice(&moving_labels, &fixed_labels)?,
        mean_dice: per_sample.iter().sum::<f64>() / per_sample.len() as f64,
        jacobian_mean: jac.mean_count,
        jacobian_std: jac.std_count,
        jacobian_percentage: jac.percentage,
        pearson: pearson_udul(&rows).ok(),
    };
    std::fs::write(
        out.join("summary.txt"),
        format!(
            "samples = {}\nbaseline_dice = {}\nmean_dice = {}\njacobian_mean = {}\njacobian_std = {}\njacobian_percentage = {}\npearson_udul = {}\n",
            samples.len(),
            fmt_f64(summary.baseline_dice),
            fmt_f64(summary.mean_dice),
            fmt_f64(summary.jacobian_mean),
            fmt_f64(summary.jacobian_std),
            fmt_f64(summary.jacobian_percentage),
            summary.pearson.map_or("nan".to_string(), fmt_f64)
        ),
    )?;
    Ok(summary)
}
