//! `key = value` run configuration.

use crate::error::{Error, Result};
use crate::inference::{Parametrisation, SaemConfig, SgldConfig, ViConfig};
use crate::likelihood::LikelihoodHyperpriors;
use crate::regulariser::{RegMode, RegulariserHyperpriors};
use crate::svf::{SobolevConfig, SvfConfig};
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegKind {
    LogNormal,
    FixedL2,
    GammaPrior,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Dense,
    BSpline,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub num_squarings: u32,
    pub window: usize,
    pub components: usize,
    pub kappa: f64,
    pub mu_beta: f64,
    pub sigma_beta: f64,
    pub eta: f64,
    pub varsigma: f64,
    pub lambda_init: f64,
    pub reg_mode: RegKind,
    /// Weight for the fixed and gamma-prior modes.
    pub lambda_reg: f64,
    pub rank: usize,
    pub lr_posterior: f64,
    pub lr_gmm: f64,
    pub lr_reg: f64,
    pub lr_decay: f64,
    pub vi_iters: usize,
    pub plateau_window: usize,
    pub plateau_tol: f64,
    pub sigma_init: f64,
    pub u_init: f64,
    pub sobolev_width: usize,
    pub sobolev_lambda: f64,
    /// Sobolev smoothing on or off.
    pub sobolev: bool,
    pub parametrisation: ParamKind,
    pub bspline_spacing: usize,
    pub tau: f64,
    pub tau_bspline: f64,
    pub burn_in: usize,
    pub chains: usize,
    /// Retained samples over all chains.
    pub samples: usize,
    pub thin: usize,
    pub sgld_noise: bool,
    /// Keep one hyperparameter trace row every this many SGLD steps.
    pub trace_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_squarings: 12,
            window: 5,
            components: 4,
            kappa: 0.5,
            mu_beta: 0.0,
            sigma_beta: 2.3,
            eta: 2.8,
            varsigma: 5.0,
            lambda_init: 1.2,
            reg_mode: RegKind::LogNormal,
            lambda_reg: 1.2,
            rank: 1,
            lr_posterior: 1e-2,
            lr_gmm: 2e-1,
            lr_reg: 1e-2,
            lr_decay: 1e-3,
            vi_iters: 1024,
            plateau_window: 50,
            plateau_tol: 1e-3,
            sigma_init: 0.5,
            u_init: 0.1,
            sobolev_width: 7,
            sobolev_lambda: 0.5,
            sobolev: true,
            parametrisation: ParamKind::Dense,
            bspline_spacing: 4,
            tau: 0.4,
            tau_bspline: 0.05,
            burn_in: 100_000,
            chains: 2,
            samples: 500,
            thin: 40,
            sgld_noise: true,
            trace_every: 100,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_num(key, value)?,
            "num_squarings" => self.num_squarings = parse_num(key, value)?,
            "window" => self.window = parse_num(key, value)?,
            "components" => self.components = parse_num(key, value)?,
            "kappa" => self.kappa = parse_num(key, value)?,
            "mu_beta" => self.mu_beta = parse_num(key, value)?,
            "sigma_beta" => self.sigma_beta = parse_num(key, value)?,
            "eta" => self.eta = parse_num(key, value)?,
            "varsigma" => self.varsigma = parse_num(key, value)?,
            "lambda_init" => self.lambda_init = parse_num(key, value)?,
            "reg_mode" => {
                self.reg_mode = match value {
                    "lognormal" => RegKind::LogNormal,
                    "l2" => RegKind::FixedL2,
                    "gamma" => RegKind::GammaPrior,
                    _ => return Err(Error::Config(format!("reg_mode: unknown mode {value:?}"))),
                }
            }
            "lambda_reg" => self.lambda_reg = parse_num(key, value)?,
            "rank" => self.rank = parse_num(key, value)?,
            "lr_posterior" => self.lr_posterior = parse_num(key, value)?,
            "lr_gmm" => self.lr_gmm = parse_num(key, value)?,
            "lr_reg" => self.lr_reg = parse_num(key, value)?,
            "lr_decay" => self.lr_decay = parse_num(key, value)?,
            "vi_iters" => self.vi_iters = parse_num(key, value)?,
            "plateau_window" => self.plateau_window = parse_num(key, value)?,
            "plateau_tol" => self.plateau_tol = parse_num(key, value)?,
            "sigma_init" => self.sigma_init = parse_num(key, value)?,
            "u_init" => self.u_init = parse_num(key, value)?,
            "sobolev_width" => self.sobolev_width = parse_num(key, value)?,
            "sobolev_lambda" => self.sobolev_lambda = parse_num(key, value)?,
            "sobolev" => self.sobolev = parse_bool(key, value)?,
            "parametrisation" => {
                self.parametrisation = match value {
                    "dense" => ParamKind::Dense,
                    "bspline" => ParamKind::BSpline,
                    _ => return Err(Error::Config(format!("parametrisation: unknown value {value:?}"))),
                }
            }
            "bspline_spacing" => self.bspline_spacing = parse_num(key, value)?,
            "tau" => self.tau = parse_num(key, value)?,
            "tau_bspline" => self.tau_bspline = parse_num(key, value)?,
            "burn_in" => self.burn_in = parse_num(key, value)?,
            "chains" => self.chains = parse_num(key, value)?,
            "samples" => self.samples = parse_num(key, value)?,
            "thin" => self.thin = parse_num(key, value)?,
            "sgld_noise" => self.sgld_noise = parse_bool(key, value)?,
            "trace_every" => self.trace_every = parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("kappa", self.kappa),
            ("sigma_beta", self.sigma_beta),
            ("eta", self.eta),
            ("varsigma", self.varsigma),
            ("lambda_init", self.lambda_init),
            ("lambda_reg", self.lambda_reg),
            ("lr_posterior", self.lr_posterior),
            ("lr_gmm", self.lr_gmm),
            ("lr_reg", self.lr_reg),
            ("sigma_init", self.sigma_init),
            ("sobolev_lambda", self.sobolev_lambda),
            ("tau", self.tau),
            ("tau_bspline", self.tau_bspline),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let finite = [
            ("mu_beta", self.mu_beta),
            ("u_init", self.u_init),
            ("lr_decay", self.lr_decay),
            ("plateau_tol", self.plateau_tol),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
        }
        if self.lr_decay < 0.0 || self.plateau_tol < 0.0 {
            return Err(Error::Config("lr_decay and plateau_tol must be non-negative".into()));
        }
        let counts = [
            ("components", self.components),
            ("rank", self.rank),
            ("chains", self.chains),
            ("samples", self.samples),
            ("thin", self.thin),
            ("bspline_spacing", self.bspline_spacing),
            ("plateau_window", self.plateau_window),
            ("trace_every", self.trace_every),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.rank > crate::posterior::MAX_RANK {
            return Err(Error::Config(format!("rank must be at most {}", crate::posterior::MAX_RANK)));
        }
        if self.samples % self.chains != 0 {
            return Err(Error::Config(format!(
                "samples ({}) must be divisible by chains ({})",
                self.samples, self.chains
            )));
        }
        SvfConfig::new(self.num_squarings).map_err(|e| Error::Config(e.to_string()))?;
        self.sobolev_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.window % 2 == 0 || self.window < 3 {
            return Err(Error::Config(format!("window {} must be odd and >= 3", self.window)));
        }
        Ok(())
    }

    /// Fully resolved configuration, one `key = value` per line.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let reg_mode = match self.reg_mode {
            RegKind::LogNormal => "lognormal",
            RegKind::FixedL2 => "l2",
            RegKind::GammaPrior => "gamma",
        };
        let param = match self.parametrisation {
            ParamKind::Dense => "dense",
            ParamKind::BSpline => "bspline",
        };
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("seed", self.seed.to_string());
        kv("num_squarings", self.num_squarings.to_string());
        kv("window", self.window.to_string());
        kv("components", self.components.to_string());
        kv("kappa", format!("{:?}", self.kappa));
        kv("mu_beta", format!("{:?}", self.mu_beta));
        kv("sigma_beta", format!("{:?}", self.sigma_beta));
        kv("eta", format!("{:?}", self.eta));
        kv("varsigma", format!("{:?}", self.varsigma));
        kv("lambda_init", format!("{:?}", self.lambda_init));
        kv("reg_mode", reg_mode.to_string());
        kv("lambda_reg", format!("{:?}", self.lambda_reg));
        kv("rank", self.rank.to_string());
        kv("lr_posterior", format!("{:?}", self.lr_posterior));
        kv("lr_gmm", format!("{:?}", self.lr_gmm));
        kv("lr_reg", format!("{:?}", self.lr_reg));
        kv("lr_decay", format!("{:?}", self.lr_decay));
        kv("vi_iters", self.vi_iters.to_string());
        kv("plateau_window", self.plateau_window.to_string());
        kv("plateau_tol", format!("{:?}", self.plateau_tol));
        kv("sigma_init", format!("{:?}", self.sigma_init));
        kv("u_init", format!("{:?}", self.u_init));
        kv("sobolev_width", self.sobolev_width.to_string());
        kv("sobolev_lambda", format!("{:?}", self.sobolev_lambda));
        kv("sobolev", self.sobolev.to_string());
        kv("parametrisation", param.to_string());
        kv("bspline_spacing", self.bspline_spacing.to_string());
        kv("tau", format!("{:?}", self.tau));
        kv("tau_bspline", format!("{:?}", self.tau_bspline));
        kv("burn_in", self.burn_in.to_string());
        kv("chains", self.chains.to_string());
        kv("samples", self.samples.to_string());
        kv("thin", self.thin.to_string());
        kv("sgld_noise", self.sgld_noise.to_string());
        kv("trace_every", self.trace_every.to_string());
        s
    }

    pub fn svf_config(&self) -> SvfConfig {
        SvfConfig {
            num_squarings: self.num_squarings,
        }
    }

    pub fn sobolev_config(&self) -> SobolevConfig {
        SobolevConfig {
            width: self.sobolev_width,
            lambda: self.sobolev_lambda,
        }
    }

    pub fn parametrisation(&self) -> Parametrisation {
        match self.parametrisation {
            ParamKind::Dense => Parametrisation::Dense {
                sobolev: self.sobolev.then(|| self.sobolev_config()),
            },
            ParamKind::BSpline => Parametrisation::BSpline {
                spacing: self.bspline_spacing,
            },
        }
    }

    pub fn reg_mode(&self) -> RegMode {
        match self.reg_mode {
            RegKind::LogNormal => RegMode::LogNormal,
            RegKind::FixedL2 => RegMode::FixedL2 { lambda: self.lambda_reg },
            RegKind::GammaPrior => RegMode::GammaPrior { lambda: self.lambda_reg },
        }
    }

    pub fn likelihood_hyperpriors(&self) -> LikelihoodHyperpriors {
        LikelihoodHyperpriors {
            kappa: self.kappa,
            mu_beta: self.mu_beta,
            sigma_beta: self.sigma_beta,
        }
    }

    pub fn regulariser_hyperpriors(&self) -> RegulariserHyperpriors {
        RegulariserHyperpriors {
            lambda_init: self.lambda_init,
            eta: self.eta,
            varsigma: self.varsigma,
        }
    }

    pub fn saem_config(&self) -> SaemConfig {
        SaemConfig {
            lr_gmm: self.lr_gmm,
            lr_reg: self.lr_reg,
            lr_decay: self.lr_decay,
        }
    }

    pub fn vi_config(&self) -> ViConfig {
        ViConfig {
            iters: self.vi_iters,
            lr_posterior: self.lr_posterior,
            lr_decay: self.lr_decay,
            rank: self.rank,
            sigma_init: self.sigma_init,
            u_init: self.u_init,
            plateau_window: self.plateau_window,
            plateau_tol: self.plateau_tol,
            seed: self.seed,
        }
    }

    /// Step size for the configured parametrisation.
    pub fn step_size(&self) -> f64 {
        match self.parametrisation {
            ParamKind::Dense => self.tau,
            ParamKind::BSpline => self.tau_bspline,
        }
    }

    pub fn sgld_config(&self) -> SgldConfig {
        let per_chain = self.samples / self.chains;
        SgldConfig {
            tau: self.step_size(),
            n_steps: SgldConfig::steps_for(self.burn_in, self.thin, per_chain),
            burn_in: self.burn_in,
            thin: self.thin,
            noise: self.sgld_noise,
            seed: self.seed,
        }
    }
}
