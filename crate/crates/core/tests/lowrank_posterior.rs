use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use svfreg::posterior::*;

fn random_q(p: usize, r: usize, seed: u64) -> LowRankGaussian {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let sigma = (0..p).map(|_| rng.random_range(0.1..2.0)).collect();
    let u = (0..p * r).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
    LowRankGaussian::new(mu, sigma, u, r).unwrap()
}

fn dense_cov(q: &LowRankGaussian) -> DMatrix<f64> {
    let p = q.dim();
    let u = DMatrix::from_row_slice(p, q.rank(), q.u());
    DMatrix::from_diagonal(&DVector::from_iterator(p, q.sigma().iter().map(|s| s * s))) + &u * u.transpose()
}

fn dense_logdet(q: &LowRankGaussian) -> f64 {
    // LU determinant, independent of any Cholesky path
    dense_cov(q).lu().determinant().ln()
}

#[test]
fn identity_covariance_has_zero_logdet() {
    let q = LowRankGaussian::new(vec![0.0; 7], vec![1.0; 7], vec![], 0).unwrap();
    assert_eq!(q.log_det_cov().unwrap(), 0.0);
    let q1 = LowRankGaussian::new(vec![0.0; 7], vec![1.0; 7], vec![0.0; 7], 1).unwrap();
    assert!(q1.log_det_cov().unwrap().abs() < 1e-15);
}

#[test]
fn logdet_scales_with_sigma() {
    let p = 12;
    let base = LowRankGaussian::new(vec![0.0; p], (1..=p).map(|i| i as f64 * 0.1).collect(), vec![0.0; p], 1).unwrap();
    let c: f64 = 3.7;
    let scaled = LowRankGaussian::new(vec![0.0; p], base.sigma().iter().map(|s| c * s).collect(), vec![0.0; p], 1).unwrap();
    let d = scaled.log_det_cov().unwrap() - base.log_det_cov().unwrap();
    assert!((d - 2.0 * p as f64 * c.ln()).abs() < 1e-12);
}

#[test]
fn logdet_and_entropy_match_dense() {
    for (p, r, seed) in [(50, 2, 1), (300, 3, 2), (120, 1, 3), (10, 0, 4)] {
        let q = random_q(p, r, seed);
        let ld = dense_logdet(&q);
        assert!((q.log_det_cov().unwrap() - ld).abs() <= 1e-8 * ld.abs().max(1.0));
        let h = 0.5 * ld + 0.5 * p as f64 * (1.0 + (2.0 * PI).ln());
        assert!((q.entropy().unwrap() - h).abs() <= 1e-8 * h.abs().max(1.0));
    }
}

#[test]
fn precision_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for seed in 0..5 {
        for (p, r) in [(50, 2), (300, 3)] {
            let q = random_q(p, r, 100 + seed);
            let v: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
            let x = DVector::from_vec(q.apply_precision(&v).unwrap());
            let back = dense_cov(&q) * x;
            for (a, b) in back.iter().zip(&v) {
                assert!((a - b).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn precision_diagonal_and_rank_one_forms() {
    let q = LowRankGaussian::new(vec![0.0; 4], vec![0.5, 1.0, 2.0, 4.0], vec![0.0; 4], 1).unwrap();
    let v = [1.0, 2.0, 3.0, 4.0];
    let out = q.apply_precision(&v).unwrap();
    for i in 0..4 {
        assert!((out[i] - v[i] / q.sigma()[i].powi(2)).abs() < 1e-15);
    }
    // (D + u u^T)^-1 v = D^-1 v - D^-1 u (u^T D^-1 v) / (1 + u^T D^-1 u)
    let q = random_q(30, 1, 17);
    let v: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
    let dinv: Vec<f64> = q.sigma().iter().map(|s| 1.0 / (s * s)).collect();
    let u = q.u();
    let utdv: f64 = (0..30).map(|i| u[i] * dinv[i] * v[i]).sum();
    let utdu: f64 = (0..30).map(|i| u[i] * dinv[i] * u[i]).sum();
    let out = q.apply_precision(&v).unwrap();
    for i in 0..30 {
        let expect = dinv[i] * v[i] - dinv[i] * u[i] * utdv / (1.0 + utdu);
        assert!((out[i] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
    }
}

#[test]
fn univariate_entropy() {
    let q = LowRankGaussian::new(vec![0.0], vec![1.0], vec![], 0).unwrap();
    assert!((q.entropy().unwrap() - 1.418_938_533_204_672_7).abs() < 1e-12);
}

#[test]
fn entropy_grows_with_each_sigma() {
    let q = random_q(20, 2, 5);
    let h0 = q.entropy().unwrap();
    for p in [0, 7, 19] {
        let mut s = q.sigma().to_vec();
        s[p] *= 1.3;
        let q2 = LowRankGaussian::new(q.mu().to_vec(), s, q.u().to_vec(), 2).unwrap();
        assert!(q2.entropy().unwrap() > h0);
    }
}

#[test]
fn degenerate_samples_equal_mean() {
    let q = LowRankGaussian::new(vec![1.5, -2.0, 0.25], vec![1e-20; 3], vec![0.0; 3], 1).unwrap();
    let s = q.sample_pair(&mut ChaCha8Rng::seed_from_u64(0));
    for i in 0..3 {
        assert!((s.plus[i] - q.mu()[i]).abs() <= 1e-12 && (s.minus[i] - q.mu()[i]).abs() <= 1e-12);
    }
}

#[test]
fn samples_are_antithetic_and_seeded() {
    let q = random_q(25, 2, 6);
    let a = q.sample_pair(&mut ChaCha8Rng::seed_from_u64(3));
    let b = q.sample_pair(&mut ChaCha8Rng::seed_from_u64(3));
    assert_eq!(a.plus, b.plus);
    for i in 0..25 {
        assert!((0.5 * (a.plus[i] + a.minus[i]) - q.mu()[i]).abs() <= 4.0 * f64::EPSILON * q.mu()[i].abs().max(1.0));
    }
}

#[test]
fn sample_moments_match_covariance() {
    let (p, r, n) = (20, 2, 100_000);
    let q = random_q(p, r, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut sum = DVector::<f64>::zeros(p);
    let mut outer = DMatrix::<f64>::zeros(p, p);
    for _ in 0..n {
        let s = q.sample_pair(&mut rng);
        let d = DVector::from_iterator(p, s.plus.iter().zip(q.mu()).map(|(a, m)| a - m));
        sum += &d;
        outer += &d * d.transpose();
    }
    let cov = dense_cov(&q);
    let emp = outer / n as f64;
    assert!((&emp - &cov).norm() / cov.norm() <= 0.05);
    let diag = cov.diagonal();
    for i in 0..p {
        let se = (diag[i] / n as f64).sqrt();
        assert!((sum[i] / n as f64).abs() <= 3.0 * se, "component {i}");
    }
}

#[test]
fn invalid_parameters_rejected() {
    assert!(LowRankGaussian::new(vec![0.0; 3], vec![1.0, 0.0, 1.0], vec![0.0; 3], 1).is_err());
    assert!(LowRankGaussian::new(vec![0.0; 3], vec![1.0; 3], vec![0.0; 4], 1).is_err());
    assert!(LowRankGaussian::new(vec![0.0; 3], vec![1.0; 3], vec![0.0; 27], 9).is_err());
    assert!(random_q(4, 1, 0).apply_precision(&[1.0; 3]).is_err());
}

proptest! {
    #[test]
    fn entropy_permutation_invariant(seed in 0u64..1000, shift in 1usize..15) {
        let (p, r) = (16, 2);
        let q = random_q(p, r, seed);
        let perm: Vec<usize> = (0..p).map(|i| (i + shift) % p).collect();
        let mu = perm.iter().map(|&i| q.mu()[i]).collect();
        let sigma = perm.iter().map(|&i| q.sigma()[i]).collect();
        let u = perm.iter().flat_map(|&i| q.u()[i * r..(i + 1) * r].to_vec()).collect();
        let q2 = LowRankGaussian::new(mu, sigma, u, r).unwrap();
        prop_assert!((q.entropy().unwrap() - q2.entropy().unwrap()).abs() <= 1e-10);
    }
}
