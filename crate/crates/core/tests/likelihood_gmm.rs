use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use svfreg::field::{gaussian_blur, GridSpec, ScalarField};
use svfreg::likelihood::*;

fn g2(n: usize) -> GridSpec {
    GridSpec::unit(&[n, n]).unwrap()
}

fn noise(g: &GridSpec, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::from_fn(g.clone(), |_| rng.sample(StandardNormal)).unwrap()
}

fn state(beta: Vec<f64>, rho: Vec<f64>, alpha: f64) -> LikelihoodState {
    LikelihoodState::new(MixtureParams::new(beta, rho).unwrap(), alpha, 5).unwrap()
}

#[test]
fn constant_image_standardises_to_zero() {
    let f = ScalarField::from_fn(g2(9), |_| 4.2).unwrap();
    let s = local_standardise(&f, 5).unwrap();
    assert!(s.values().iter().all(|&v| v == 0.0));
}

#[test]
fn standardisation_is_affine_invariant() {
    let f = noise(&g2(16), 1);
    let h = ScalarField::new(f.grid().clone(), f.values().iter().map(|v| 3.0 * v + 7.0).collect()).unwrap();
    let a = local_standardise(&f, 5).unwrap();
    let b = local_standardise(&h, 5).unwrap();
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!((x - y).abs() <= 1e-8);
    }
}

#[test]
fn checkerboard_matches_brute_force_window() {
    let n = 11;
    let f = ScalarField::from_fn(g2(n), |c| if (c[0] + c[1]) % 2 == 0 { 1.0 } else { -1.0 }).unwrap();
    let s = local_standardise(&f, 5).unwrap();
    for (i, j) in [(5usize, 5usize), (4, 6), (2, 2), (0, 0), (10, 3)] {
        let mut vals = Vec::new();
        for a in i.saturating_sub(2)..(i + 3).min(n) {
            for b in j.saturating_sub(2)..(j + 3).min(n) {
                vals.push(f.get(&[a, b]));
            }
        }
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64;
        let expect = (f.get(&[i, j]) - m) / var.max(VARIANCE_FLOOR).sqrt();
        assert!((s.get(&[i, j]) - expect).abs() < 1e-12, "({i},{j})");
    }
}

#[test]
fn residual_examples() {
    let g = g2(12);
    let f = noise(&g, 2);
    assert!(residuals(&f, &f, 5).unwrap().values().iter().all(|&v| v == 0.0));
    let m = ScalarField::new(g.clone(), f.values().iter().map(|v| 2.5 * v - 1.0).collect()).unwrap();
    assert!(residuals(&f, &m, 5).unwrap().values().iter().all(|v| v.abs() <= 1e-6));
    let flat = ScalarField::from_fn(g.clone(), |_| 3.0).unwrap();
    let ramp = ScalarField::from_fn(g.clone(), |c| c[0] as f64 + 0.3 * c[1] as f64).unwrap();
    let r = residuals(&flat, &ramp, 5).unwrap();
    let s = local_standardise(&ramp, 5).unwrap();
    for (a, b) in r.values().iter().zip(s.values()) {
        assert_eq!(*a, -b);
    }
    assert!(residuals(&f, &noise(&g2(10), 0), 5).is_err());
}

#[test]
fn standard_normal_energy_at_zero() {
    let g = g2(8);
    let r = ScalarField::zeros(g.clone());
    let e = data_energy(&r, &state(vec![1.0], vec![1.0], 1.0)).unwrap();
    let expect = 64.0 * 0.5 * (2.0 * PI).ln();
    assert!((e - expect).abs() < 1e-10);
    let half = data_energy(&r, &state(vec![1.0], vec![1.0], 0.5)).unwrap();
    assert!((half - 0.5 * expect).abs() < 1e-10);
}

#[test]
fn two_component_energy_by_hand() {
    let r = ScalarField::new(GridSpec::unit(&[4, 4]).unwrap(), {
        let mut v = vec![0.0; 16];
        v[5] = 1.0;
        v
    })
    .unwrap();
    let st = state(vec![1.0, 4.0], vec![0.5, 0.5], 1.0);
    let density = |x: f64| 0.5 * (1.0 / (2.0 * PI)).sqrt() * (-0.5 * x * x).exp() + 0.5 * (4.0 / (2.0 * PI)).sqrt() * (-2.0 * x * x).exp();
    let expect = -(density(1.0).ln() + 15.0 * density(0.0).ln());
    assert!((data_energy(&r, &st).unwrap() - expect).abs() < 1e-10);
}

#[test]
fn energy_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let r: Vec<f64> = (0..100).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
    let st = state(vec![0.2, 1.0, 3.0, 9.0], vec![0.1, 0.3, 0.4, 0.2], 0.37);
    let (_, grad) = data_energy_grad(&r, &st).unwrap();
    let h = 1e-6;
    for i in 0..r.len() {
        let (mut p, mut m) = (r.clone(), r.clone());
        p[i] += h;
        m[i] -= h;
        let fd = (data_energy_grad(&p, &st).unwrap().0 - data_energy_grad(&m, &st).unwrap().0) / (2.0 * h);
        assert!((grad[i] - fd).abs() <= 1e-6 * fd.abs().max(1e-2), "voxel {i}: {} vs {fd}", grad[i]);
    }
}

#[test]
fn energy_invariant_to_shared_affine_map() {
    let g = g2(16);
    let f = noise(&g, 5);
    let m = gaussian_blur(&noise(&g, 6), 1.0);
    let map = |s: &ScalarField| ScalarField::new(g.clone(), s.values().iter().map(|v| 0.3 * v + 11.0).collect()).unwrap();
    let st = state(vec![0.5, 2.0], vec![0.4, 0.6], 1.0);
    let e1 = data_energy(&residuals(&f, &m, 5).unwrap(), &st).unwrap();
    let e2 = data_energy(&residuals(&map(&f), &map(&m), 5).unwrap(), &st).unwrap();
    assert!((e1 - e2).abs() <= 1e-6 * e1.abs());
}

#[test]
fn large_precisions_stay_finite() {
    let st = state(vec![1e-3, 1e4], vec![0.5, 0.5], 1.0);
    let (e, g) = data_energy_grad(&[0.0, 30.0, -1e3], &st).unwrap();
    assert!(e.is_finite() && g.iter().all(|v| v.is_finite()));
}

#[test]
fn white_noise_has_alpha_near_one() {
    for seed in 0..10 {
        let a = virtual_decimation(&noise(&g2(64), seed));
        assert!(a >= 0.8 && a <= 1.0, "seed {seed}: {a}");
    }
}

#[test]
fn smoothing_lowers_alpha() {
    for seed in 0..3 {
        let n = noise(&g2(64), 100 + seed);
        let alphas: Vec<f64> = [1.0, 2.0, 4.0].iter().map(|&s| virtual_decimation(&gaussian_blur(&n, s))).collect();
        assert!(alphas[0] > alphas[1] && alphas[1] > alphas[2], "{alphas:?}");
    }
}

#[test]
fn constant_residual_takes_the_clamp() {
    let a = virtual_decimation(&ScalarField::from_fn(g2(8), |_| 0.5).unwrap());
    assert!((a - ALPHA_FLOOR * ALPHA_FLOOR).abs() < 1e-18);
    let a3 = virtual_decimation(&ScalarField::zeros(GridSpec::unit(&[5, 5, 5]).unwrap()));
    assert!((a3 - ALPHA_FLOOR.powi(3)).abs() < 1e-20);
}

#[test]
fn alpha_matches_direct_autocorrelation() {
    let r = gaussian_blur(&noise(&g2(20), 9), 1.5);
    let n = 20;
    let lag = |axis: usize| {
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let (a, b) = if axis == 0 { (i + 1, j) } else { (i, j + 1) };
                if a < n && b < n {
                    pairs.push((r.get(&[i, j]), r.get(&[a, b])));
                }
            }
        }
        let k = pairs.len() as f64;
        let ma = pairs.iter().map(|p| p.0).sum::<f64>() / k;
        let mb = pairs.iter().map(|p| p.1).sum::<f64>() / k;
        let cab: f64 = pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum();
        let caa: f64 = pairs.iter().map(|p| (p.0 - ma).powi(2)).sum();
        let cbb: f64 = pairs.iter().map(|p| (p.1 - mb).powi(2)).sum();
        cab / (caa * cbb).sqrt()
    };
    let expect: f64 = (0..2).map(|a| ((1.0 - lag(a)) / (1.0 + lag(a))).max(ALPHA_FLOOR)).product();
    assert!((virtual_decimation(&r) - expect).abs() < 1e-12);
}

#[test]
fn hyperprior_examples() {
    let hp = LikelihoodHyperpriors::default();
    // at the mode in log space only the normalising terms remain
    let m = MixtureParams::new(vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
    let lp = log_hyperprior(&m, &hp).unwrap();
    let norm = 2.0 * (-(hp.sigma_beta).ln() - 0.5 * (2.0 * PI).ln());
    let dirichlet = statrs::function::gamma::ln_gamma(1.0) - 2.0 * statrs::function::gamma::ln_gamma(0.5) - 0.5 * 0.5f64.ln() - 0.5 * 0.5f64.ln();
    assert!((lp - norm - dirichlet).abs() < 1e-12);

    let off = MixtureParams::new(vec![5.0, 0.1], vec![0.5, 0.5]).unwrap();
    let quad = |sigma_beta: f64| {
        let h = LikelihoodHyperpriors { sigma_beta, ..hp };
        let base = MixtureParams::new(vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
        log_hyperprior(&base, &h).unwrap() - log_hyperprior(&off, &h).unwrap() - (5.0f64.ln() + 0.1f64.ln())
    };
    assert!(quad(4.6) < quad(2.3));
}

#[test]
fn hyperprior_rejects_off_simplex() {
    assert!(MixtureParams::new(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
    assert!(MixtureParams::new(vec![1.0, -2.0], vec![0.5, 0.5]).is_err());
    assert!(LikelihoodState::new(MixtureParams::initial(4, 0.0).unwrap(), 1.5, 5).is_err());
    assert!(LikelihoodState::new(MixtureParams::initial(4, 0.0).unwrap(), 0.5, 4).is_err());
}

#[test]
fn initial_mixture_spreads_precisions() {
    let m = MixtureParams::initial(4, 0.0).unwrap();
    let expect = [1.0 / 8.0, 0.5, 2.0, 8.0];
    for (b, e) in m.beta().iter().zip(expect) {
        assert!((b - e).abs() < 1e-15);
    }
    assert!(m.rho().iter().all(|&p| p == 0.25));
}

proptest! {
    #[test]
    fn responsibilities_sum_to_one(
        r in prop::collection::vec(-50.0f64..50.0, 1..40),
        logb in prop::collection::vec(-6.0f64..6.0, 3),
        w in prop::collection::vec(0.05f64..1.0, 3),
    ) {
        let s: f64 = w.iter().sum();
        let m = MixtureParams::new(logb.iter().map(|v| v.exp()).collect(), w.iter().map(|v| v / s).collect()).unwrap();
        let g = responsibilities(&r, &m);
        for row in g.chunks(3) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn alpha_in_unit_interval(seed in 0u64..1000, sigma in 0.0f64..6.0) {
        let a = virtual_decimation(&gaussian_blur(&noise(&g2(16), seed), sigma));
        prop_assert!(a > 0.0 && a <= 1.0);
    }
}
