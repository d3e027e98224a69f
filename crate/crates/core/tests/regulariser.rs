use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use svfreg::field::{GridSpec, VectorField};
use svfreg::regulariser::*;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn random_field(dims: &[usize], seed: u64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    VectorField::from_fn(GridSpec::unit(dims).unwrap(), |_, _| rng.sample(StandardNormal)).unwrap()
}

fn state(mode: RegMode, nu: f64) -> RegulariserState {
    RegulariserState::initial(nu, mode, &RegulariserHyperpriors::default()).unwrap()
}

#[test]
fn chi2_of_constant_and_ramp() {
    let g = GridSpec::unit(&[6, 5]).unwrap();
    assert_eq!(chi_squared(&VectorField::from_fn(g.clone(), |_, c| 3.0 + c as f64).unwrap()), 0.0);
    // one component ramps along axis 1 over 5 voxels: 4 unit differences per row, 6 rows
    let ramp = VectorField::from_fn(g, |x, c| if c == 0 { x[1] as f64 } else { 0.0 }).unwrap();
    assert_eq!(chi_squared(&ramp), 24.0);
}

#[test]
fn chi2_matches_direct_summation() {
    let w = random_field(&[5, 4, 6], 1);
    let g = w.grid().clone();
    let mut s = 0.0;
    for i in 0..g.num_voxels() {
        let c = g.coords(i);
        for a in 0..3 {
            if c[a] + 1 < g.dims()[a] {
                let mut n = c;
                n[a] += 1;
                let j = g.index(&n[..3]);
                for k in 0..3 {
                    s += (w.vector(j)[k] - w.vector(i)[k]).powi(2);
                }
            }
        }
    }
    assert!((chi_squared(&w) - s).abs() <= 1e-12 * s);
}

#[test]
fn fixed_l2_energy() {
    // ten unit steps along axis 0 in one column
    let ramp = VectorField::from_fn(GridSpec::unit(&[11, 4]).unwrap(), |x, c| {
        if c == 0 && x[1] == 0 { x[0] as f64 } else { 0.0 }
    })
    .unwrap();
    let chi2 = chi_squared(&ramp);
    let st = state(RegMode::FixedL2 { lambda: 1.2 }, 88.0);
    assert!((reg_energy(&ramp, &st) - 0.5 * 1.2 * chi2).abs() < 1e-12);
    // the column also steps against its zero neighbour along axis 1
    assert_eq!(chi2, 10.0 + (0..11).map(|i| (i * i) as f64).sum::<f64>());
    assert!((reg_energy_of_chi2(10.0, &st).0 - 6.0).abs() < 1e-12);
}

#[test]
fn lognormal_centred_case() {
    let mut st = state(RegMode::LogNormal, 200.0);
    st.mu_chi2 = 3.7;
    st.sigma_chi2 = 1.3;
    let (e, _) = reg_energy_of_chi2(3.7f64.exp(), &st);
    assert!((e - (100.0 * 3.7 + 1.3f64.ln())).abs() < 1e-10);
}

#[test]
fn lognormal_floor_at_zero_field() {
    let st = state(RegMode::LogNormal, 128.0);
    let w = VectorField::zeros(GridSpec::unit(&[8, 8]).unwrap());
    let (e, g) = reg_energy_grad(&w, &st);
    assert!(e.is_finite());
    assert!(g.iter().all(|&v| v == 0.0));
    assert_eq!(e, reg_energy_of_chi2(CHI2_FLOOR, &st).0);
}

#[test]
fn gamma_prior_differences_are_half_lambda_chi2() {
    for lambda in [0.3, 1.2, 2.0] {
        let st = state(RegMode::GammaPrior { lambda }, 2.0 * 144.0);
        for seed in 0..10 {
            let w1 = random_field(&[12, 12], 2 * seed);
            let w2 = random_field(&[12, 12], 2 * seed + 1).scaled(0.3);
            let de = reg_energy(&w1, &st) - reg_energy(&w2, &st);
            let dc = 0.5 * lambda * (chi_squared(&w1) - chi_squared(&w2));
            assert!((de - dc).abs() <= 1e-8, "{de} vs {dc}");
        }
    }
}

#[test]
fn gamma_prior_and_l2_differ_by_constant() {
    let g = state(RegMode::GammaPrior { lambda: 1.2 }, 288.0);
    let l = state(RegMode::FixedL2 { lambda: 1.2 }, 288.0);
    let offsets: Vec<f64> = (0..5)
        .map(|s| {
            let w = random_field(&[12, 12], 40 + s).scaled(0.1 * (s + 1) as f64);
            reg_energy(&w, &g) - reg_energy(&w, &l)
        })
        .collect();
    for o in &offsets {
        assert!((o - offsets[0]).abs() <= 1e-8);
    }
}

#[test]
fn energy_gradient_matches_finite_differences() {
    for mode in [RegMode::LogNormal, RegMode::FixedL2 { lambda: 1.2 }, RegMode::GammaPrior { lambda: 0.7 }] {
        let w = random_field(&[7, 6], 3);
        let st = state(mode, 84.0);
        let (_, grad) = reg_energy_grad(&w, &st);
        let h = 1e-5;
        for k in (0..w.values().len()).step_by(5) {
            let (mut p, mut m) = (w.values().to_vec(), w.values().to_vec());
            p[k] += h;
            m[k] -= h;
            let f = |v: Vec<f64>| reg_energy(&VectorField::new(w.grid().clone(), v).unwrap(), &st);
            let fd = (f(p) - f(m)) / (2.0 * h);
            assert!((grad[k] - fd).abs() <= 1e-5 * fd.abs().max(1e-2), "{mode:?} {k}: {} vs {fd}", grad[k]);
        }
    }
}

#[test]
fn lognormal_energy_is_permutation_invariant() {
    let w = random_field(&[5, 6, 7], 8);
    let st = state(RegMode::LogNormal, w.values().len() as f64);
    let a = reg_energy(&w, &st);
    let b = reg_energy(&w.permute_axes(&[1, 2, 0]).unwrap(), &st);
    assert!((a - b).abs() <= 1e-10 * a.abs());
}

#[test]
fn digamma_values() {
    assert!((digamma(1.0).unwrap() + EULER_GAMMA).abs() <= 1e-9);
    assert!((digamma(2.0).unwrap() - digamma(1.0).unwrap() - 1.0).abs() <= 1e-10);
    assert!((digamma(0.5).unwrap() - (-EULER_GAMMA - 2.0 * 2f64.ln())).abs() <= 1e-10);
    assert!(digamma(0.0).is_err() && digamma(-1.0).is_err());
    let mut x: f64 = 1e-3;
    while x < 1e6 {
        let oracle = statrs::function::gamma::digamma(x);
        assert!((digamma(x).unwrap() - oracle).abs() <= 1e-10 * oracle.abs().max(1.0), "x = {x}");
        x *= 1.7;
    }
}

#[test]
fn log_gamma_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let draws = 1_000_000;
    for (alpha, beta) in [(1.0, 1.0), (2.5, 0.5), (50.0, 2.0)] {
        let dist = Gamma::<f64>::new(alpha, 1.0 / beta).unwrap();
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..draws {
            let v = dist.sample(&mut rng).ln();
            s += v;
            s2 += v * v;
        }
        let mean = s / draws as f64;
        let se = ((s2 / draws as f64 - mean * mean) / draws as f64).sqrt();
        let expect = digamma(alpha).unwrap() - beta.ln();
        assert!((mean - expect).abs() <= 3.0 * se, "({alpha},{beta}): {mean} vs {expect}");
    }
}

#[test]
fn init_mu_examples() {
    assert!((init_mu_chi2(2.0, 2.0).unwrap() + EULER_GAMMA).abs() < 1e-9);
    let nu = 2.0 * 64.0 * 64.0;
    assert!((init_mu_chi2(nu, 1.2).unwrap() - (nu / 1.2).ln()).abs() <= 1e-3);
    let d = init_mu_chi2(300.0, 1.2).unwrap() - init_mu_chi2(300.0, 2.4).unwrap();
    assert!((d - 2f64.ln()).abs() < 1e-14);
    assert!(init_mu_chi2(1.0, 1.0).is_err());
    assert!(init_mu_chi2(10.0, 0.0).is_err());
}

#[test]
fn init_mu_is_near_the_prior_mode() {
    let hp = RegulariserHyperpriors::default();
    for nu in [100.0, 1000.0, 8192.0] {
        let mut st = state(RegMode::LogNormal, nu);
        let f = |mu: f64, st: &mut RegulariserState| {
            st.mu_chi2 = mu;
            reg_hyper_logprior(st, &hp)
        };
        // golden-section search for the maximiser
        let (mut lo, mut hi) = (0.0, 20.0);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - r * (hi - lo);
            let b = lo + r * (hi - lo);
            if f(a, &mut st) > f(b, &mut st) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let init = init_mu_chi2(nu, hp.lambda_init).unwrap();
        assert!((init - 0.5 * (lo + hi)).abs() <= 0.51);
    }
}

#[test]
fn sigma_hyperprior_examples() {
    let hp = RegulariserHyperpriors::default();
    let mut st = state(RegMode::LogNormal, 100.0);
    st.sigma_chi2 = (0.5 * hp.eta).exp();
    let at = reg_hyper_logprior(&st, &hp);
    let v = st.sigma_chi2.powi(2);
    st.sigma_chi2 = 1.0;
    let gamma_part = reg_hyper_logprior(&st, &hp) - (-(hp.varsigma.ln()) - 0.5 * (2.0 * std::f64::consts::PI).ln() - hp.eta * hp.eta / (2.0 * hp.varsigma * hp.varsigma));
    let expect = gamma_part - v.ln() - hp.varsigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
    assert!((at - expect).abs() < 1e-10);

    // wider varsigma flattens the penalty away from the centre
    let penalty = |varsigma: f64| {
        let h = RegulariserHyperpriors { varsigma, ..hp };
        let mut s = st;
        s.sigma_chi2 = (0.5 * hp.eta).exp();
        let centre = reg_hyper_logprior(&s, &h) + (s.sigma_chi2.powi(2)).ln();
        s.sigma_chi2 = 0.2;
        centre - (reg_hyper_logprior(&s, &h) + (s.sigma_chi2.powi(2)).ln())
    };
    assert!(penalty(2.0) > penalty(5.0) && penalty(5.0) > penalty(10.0));
}

#[test]
fn state_validation() {
    let hp = RegulariserHyperpriors::default();
    assert!(RegulariserState::initial(10.0, RegMode::FixedL2 { lambda: -1.0 }, &hp).is_err());
    assert!(RegulariserHyperpriors { eta: 0.0, ..hp }.validate().is_err());
    let st = state(RegMode::LogNormal, 10.0);
    assert!(RegulariserState { sigma_chi2: 0.0, ..st }.validate().is_err());
}

proptest! {
    #[test]
    fn chi2_is_quadratic(seed in 0u64..500, scale in -3.0f64..3.0) {
        let w = random_field(&[6, 7], seed);
        let a = chi_squared(&w.scaled(scale));
        let b = scale * scale * chi_squared(&w);
        prop_assert!((a - b).abs() <= 1e-10 * b.max(1.0));
    }

    #[test]
    fn digamma_recurrence(x in 0.1f64..100.0) {
        let lhs = digamma(x + 1.0).unwrap();
        let rhs = digamma(x).unwrap() + 1.0 / x;
        prop_assert!((lhs - rhs).abs() <= 1e-10);
    }
}
