//! Small oracle suites run by `svfreg selftest`.

use crate::field::{GridSpec, ScalarField, VectorField};
use crate::inference::{Parametrisation, RegistrationProblem};
use crate::likelihood::{LikelihoodState, MixtureParams};
use crate::posterior::LowRankGaussian;
use crate::regulariser::{digamma, RegMode, RegulariserHyperpriors, RegulariserState};
use crate::svf::{exponentiate, SobolevConfig, SvfConfig};
use nalgebra::{DMatrix, DVector, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

#[derive(Clone, Debug)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(suite: &'static str, name: impl Into<String>, err: f64, tol: f64) -> Check {
    Check {
        suite,
        name: name.into(),
        passed: err.is_finite() && err <= tol,
        detail: format!("error {err:.3e} (tolerance {tol:.1e})"),
    }
}

fn failed(suite: &'static str, name: impl Into<String>, e: crate::Error) -> Check {
    Check {
        suite,
        name: name.into(),
        passed: false,
        detail: e.to_string(),
    }
}

pub fn run_all(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = linear_algebra(&mut rng);
    out.extend(finite_differences(&mut rng));
    out.extend(matrix_exponential());
    out.extend(log_gamma(&mut rng));
    out
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

pub fn linear_algebra<G: Rng>(rng: &mut G) -> Vec<Check> {
    const SUITE: &str = "dense linear algebra";
    let mut out = Vec::new();
    for (p, r) in [(40, 1), (120, 3)] {
        let sigma: Vec<f64> = (0..p).map(|_| rng.random_range(0.2..1.5)).collect();
        let u: Vec<f64> = (0..p * r).map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
        let q = LowRankGaussian::new(vec![0.0; p], sigma.clone(), u.clone(), r).unwrap();
        let um = DMatrix::from_row_slice(p, r, &u);
        let cov = DMatrix::from_diagonal(&DVector::from_iterator(p, sigma.iter().map(|s| s * s))) + &um * um.transpose();
        let chol = cov.clone().cholesky().expect("covariance is positive definite");
        let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let tag = format!("P={p} R={r}");
        out.push(match q.log_det_cov() {
            Ok(v) => check(SUITE, format!("log-det {tag}"), rel(v, logdet), 1e-8),
            Err(e) => failed(SUITE, format!("log-det {tag}"), e),
        });
        let v: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let dense = chol.solve(&DVector::from_column_slice(&v));
        out.push(match q.apply_precision(&v) {
            Ok(x) => {
                let err = x.iter().zip(dense.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
                    / dense.amax().max(1.0);
                check(SUITE, format!("precision {tag}"), err, 1e-8)
            }
            Err(e) => failed(SUITE, format!("precision {tag}"), e),
        });
        let h = 0.5 * (p as f64 * (1.0 + (2.0 * std::f64::consts::PI).ln()) + logdet);
        out.push(match q.entropy() {
            Ok(v) => check(SUITE, format!("entropy {tag}"), rel(v, h), 1e-8),
            Err(e) => failed(SUITE, format!("entropy {tag}"), e),
        });
    }
    out
}

fn fd_pair() -> (ScalarField, ScalarField) {
    let g = GridSpec::unit(&[8, 8]).unwrap();
    let img = |dx: f64| {
        ScalarField::from_fn(g.clone(), |c| {
            let (x, y) = (c[0] as f64 - 3.5 - dx, c[1] as f64 - 3.5);
            (-(x * x + 0.6 * y * y) / 6.0).exp() + 0.2 * (0.9 * x + 0.4 * y).sin()
        })
        .unwrap()
    };
    (img(0.0), img(0.7))
}

pub fn finite_differences<G: Rng>(rng: &mut G) -> Vec<Check> {
    const SUITE: &str = "finite differences";
    let (fixed, moving) = fd_pair();
    let svf = SvfConfig::new(4).unwrap();
    let params = [
        ("dense", Parametrisation::Dense { sobolev: Some(SobolevConfig::default()) }),
        ("bspline", Parametrisation::BSpline { spacing: 2 }),
    ];
    let modes = [
        ("lognormal", RegMode::LogNormal),
        ("l2", RegMode::FixedL2 { lambda: 1.2 }),
        ("gamma", RegMode::GammaPrior { lambda: 1.2 }),
    ];
    let like = LikelihoodState::new(MixtureParams::initial(4, 0.0).unwrap(), 0.7, 5).unwrap();
    let mut out = Vec::new();
    for (pname, param) in &params {
        let problem = match RegistrationProblem::new(fixed.clone(), moving.clone(), svf, param.clone()) {
            Ok(p) => p,
            Err(e) => {
                out.push(failed(SUITE, *pname, e));
                continue;
            }
        };
        for (mname, mode) in modes {
            let name = format!("{pname} {mname}");
            let reg = RegulariserState::initial(problem.nu(), mode, &RegulariserHyperpriors::default()).unwrap();
            let w: Vec<f64> = (0..problem.num_params()).map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
            let energy = |w: &[f64]| problem.evaluate(w, &like, &reg).map(|e| e.energy());
            let grad = match problem.evaluate(&w, &like, &reg) {
                Ok(g) => g.d_w,
                Err(e) => {
                    out.push(failed(SUITE, name, e));
                    continue;
                }
            };
            let h = 1e-5;
            let mut worst: f64 = 0.0;
            for _ in 0..12 {
                let k = rng.random_range(0..w.len());
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[k] += h;
                wm[k] -= h;
                let fd = match (energy(&wp), energy(&wm)) {
                    (Ok(a), Ok(b)) => (a - b) / (2.0 * h),
                    _ => f64::NAN,
                };
                worst = worst.max((grad[k] - fd).abs() / fd.abs().max(grad[k].abs()).max(1e-2));
            }
            out.push(check(SUITE, name, worst, 1e-4));
        }
    }
    out
}

pub fn matrix_exponential() -> Vec<Check> {
    const SUITE: &str = "matrix exponential";
    let n = 32;
    let g = GridSpec::unit(&[n, n]).unwrap();
    let c = (n as f64 - 1.0) / 2.0;
    let mut out = Vec::new();
    for (i, a) in [[0.05, -0.08, 0.06, 0.02], [-0.04, 0.03, -0.05, 0.07]].iter().enumerate() {
        let m = Matrix2::new(a[0], a[1], a[2], a[3]);
        let w = VectorField::from_fn(g.clone(), |x, k| {
            m[(k, 0)] * (x[0] as f64 - c) + m[(k, 1)] * (x[1] as f64 - c)
        })
        .unwrap();
        let e = m.exp() - Matrix2::identity();
        let name = format!("linear velocity {}", i + 1);
        let u = match exponentiate(&w, SvfConfig::default()) {
            Ok(u) => u,
            Err(err) => {
                out.push(failed(SUITE, name, err));
                continue;
            }
        };
        let mut worst: f64 = 0.0;
        for x in 6..n - 6 {
            for y in 6..n - 6 {
                let p = [x as f64 - c, y as f64 - c];
                let v = u.vector(x * n + y);
                for k in 0..2 {
                    worst = worst.max((v[k] - (e[(k, 0)] * p[0] + e[(k, 1)] * p[1])).abs());
                }
            }
        }
        out.push(check(SUITE, name, worst, 1e-3));
    }
    out
}

pub fn log_gamma<G: Rng>(rng: &mut G) -> Vec<Check> {
    const SUITE: &str = "log-gamma Monte Carlo";
    let draws = 200_000;
    let mut out = Vec::new();
    for (alpha, beta) in [(0.7, 2.0), (3.0, 0.5), (25.0, 4.0)] {
        let name = format!("alpha={alpha} beta={beta}");
        let dist = Gamma::<f64>::new(alpha, 1.0 / beta).unwrap();
        let logs: Vec<f64> = (0..draws).map(|_| dist.sample(rng).ln()).collect();
        let mean = logs.iter().sum::<f64>() / draws as f64;
        let var = logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        out.push(match digamma(alpha) {
            Ok(psi) => Check {
                suite: SUITE,
                name,
                passed: ((psi - beta.ln()) - mean).abs() <= 3.0 * se,
                detail: format!("expected {:.6}, sample mean {mean:.6}, se {se:.2e}", psi - beta.ln()),
            },
            Err(e) => failed(SUITE, name, e),
        });
    }
    out
}
