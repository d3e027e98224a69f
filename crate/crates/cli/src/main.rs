use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use svfreg::io::mvf::FieldFile;
use svfreg::io::pgm::write_slice;
use svfreg::io::synth::SynthConfig;
use svfreg::io::RunConfig;
use svfreg::pipeline::{self, Init};

#[derive(Parser)]
#[command(name = "svfreg", version, about = "Bayesian diffeomorphic registration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic pair with a known transformation.
    Synth(SynthArgs),
    /// Fit the variational posterior.
    Vi(ViArgs),
    /// Draw Langevin samples, preconditioned by a VI run.
    Sgld(SgldArgs),
    /// Dice, surface distance, Jacobian and uncertainty reports.
    Metrics(MetricsArgs),
    /// Write one slice of a field as an 8-bit PGM.
    ExportSlice(SliceArgs),
    /// Run the oracle checks.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// e.g. 64x64 or 32x32x32
    #[arg(long, default_value = "64x64")]
    dims: String,
    #[arg(long, default_value_t = 6)]
    labels: usize,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    smoothness: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    texture: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    /// Directory with fixed.mvf and moving.mvf.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct ViArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct SgldArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Output directory of a previous `vi` run.
    #[arg(long)]
    vi: PathBuf,
    #[arg(long, default_value = "vi")]
    init: String,
    #[arg(long)]
    chains: Option<usize>,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    data: PathBuf,
    /// A `vi` or `sgld` output directory.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SliceArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    axis: usize,
    #[arg(long, default_value_t = 0)]
    index: usize,
}

fn parse_dims(s: &str) -> Result<Vec<usize>> {
    s.split('x')
        .map(|p| p.trim().parse::<usize>().with_context(|| format!("bad dims {s:?}")))
        .collect()
}

fn resolve_config(run: &RunArgs, extra: &[(&str, String)]) -> Result<RunConfig> {
    let mut cfg = match &run.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = run.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(n) = run.samples {
        cfg.set("samples", &n.to_string())?;
    }
    for (k, v) in extra {
        cfg.set(k, v)?;
    }
    for kv in &run.set {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("override {kv:?} is not key=value");
        };
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn synth(a: &SynthArgs) -> Result<()> {
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        dims: parse_dims(&a.dims)?,
        labels: a.labels,
        amplitude: a.amplitude.unwrap_or(d.amplitude),
        smoothness: a.smoothness.unwrap_or(d.smoothness),
        noise: a.noise.unwrap_or(d.noise),
        texture: a.texture.unwrap_or(d.texture),
        seed: a.seed,
        ..d
    };
    pipeline::write_synth(&a.out, &cfg)?;
    println!("wrote synthetic pair to {}", a.out.display());
    Ok(())
}

fn vi(a: &ViArgs) -> Result<()> {
    let cfg = resolve_config(&a.run, &[])?;
    let (fixed, moving) = pipeline::load_images(&a.run.data)?;
    let problem = pipeline::build_problem(fixed, moving, &cfg)?;
    let run = pipeline::vi(&problem, &cfg)?;
    pipeline::write_vi(&a.run.out, &problem, &run, &cfg)?;
    let last = run.elbo.last().map_or(f64::NAN, |r| r.elbo);
    println!(
        "vi: {} iterations{}, final elbo {last:.4}",
        run.elbo.len(),
        if run.plateaued { " (plateau)" } else { "" }
    );
    Ok(())
}

fn sgld(a: &SgldArgs) -> Result<()> {
    let init: Init = a.init.parse()?;
    let extra: Vec<(&str, String)> = a.chains.iter().map(|c| ("chains", c.to_string())).collect();
    let cfg = resolve_config(&a.run, &extra)?;
    let (fixed, moving) = pipeline::load_images(&a.run.data)?;
    let problem = pipeline::build_problem(fixed, moving, &cfg)?;
    let (q, state) = pipeline::read_vi(&a.vi)?;
    if q.dim() != problem.num_params() {
        bail!(
            "vi run has {} parameters, this configuration needs {}",
            q.dim(),
            problem.num_params()
        );
    }
    let run = pipeline::sgld(&problem, &q, &state, &cfg, init)?;
    pipeline::write_sgld(&a.run.out, &problem, &run, &cfg, init)?;
    println!("sgld: {} samples from {} chains", run.samples.len(), cfg.chains);
    Ok(())
}

fn metrics(a: &MetricsArgs) -> Result<()> {
    let s = pipeline::metrics(&a.data, &a.run, &a.out)?;
    println!("baseline dice {:.4}", s.baseline_dice);
    println!("mean dice     {:.4}", s.mean_dice);
    println!(
        "det J <= 0    {:.2} ({:.2}) voxels, {:.4}%",
        s.jacobian_mean, s.jacobian_std, s.jacobian_percentage
    );
    match s.pearson {
        Some(r) => println!("pearson u_d/u_l {r:.4}"),
        None => println!("pearson u_d/u_l undefined"),
    }
    Ok(())
}

fn export_slice(a: &SliceArgs) -> Result<()> {
    let file = FieldFile::read(&a.input)?;
    let field = if file.channels == 1 {
        file.to_scalar()?
    } else {
        file.to_vector()?.magnitude_mm()
    };
    write_slice(&a.out, &field, a.axis, a.index)?;
    Ok(())
}

fn selftest(seed: u64) -> Result<()> {
    let checks = svfreg::selftest::run_all(seed);
    let mut failures = 0;
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!("{tag} [{}] {}: {}", c.suite, c.name, c.detail);
        failures += usize::from(!c.passed);
    }
    println!("{} of {} checks passed", checks.len() - failures, checks.len());
    if failures > 0 {
        bail!("{failures} checks failed");
    }
    Ok(())
}

fn ensure_dir(p: &Path) -> Result<()> {
    if !p.is_dir() {
        bail!("{} is not a directory", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Vi(a) => {
            ensure_dir(&a.run.data)?;
            vi(a)
        }
        Command::Sgld(a) => {
            ensure_dir(&a.run.data)?;
            ensure_dir(&a.vi)?;
            sgld(a)
        }
        Command::Metrics(a) => metrics(a),
        Command::ExportSlice(a) => export_slice(a),
        Command::Selftest { seed } => selftest(*seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
