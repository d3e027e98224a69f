use proptest::prelude::*;
use svfreg::field::{GridSpec, LabelField, ScalarField, VectorField};
use svfreg::io::csv::{fmt_f64, read_table, write_table};
use svfreg::io::mvf::{self, FieldFile};
use svfreg::io::pgm::{encode_pgm, extract_slice, write_slice};
use svfreg::io::synth::{generate, SynthConfig};
use svfreg::io::RunConfig;
use svfreg::metrics::mean_dice;
use svfreg::pipeline;

#[test]
fn mvf_header_layout() {
    let f = FieldFile::new(vec![2, 3], vec![1.0, 0.5], 1, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
    let b = f.to_bytes();
    assert_eq!(&b[..4], b"MVF1");
    assert_eq!(b[4], 2);
    assert_eq!(b[5], 1);
    assert_eq!(&b[6..10], &2u32.to_le_bytes());
    assert_eq!(&b[10..14], &3u32.to_le_bytes());
    assert_eq!(&b[14..18], &1.0f32.to_le_bytes());
    assert_eq!(&b[18..22], &0.5f32.to_le_bytes());
    assert_eq!(&b[22..26], &0.0f32.to_le_bytes());
    assert_eq!(&b[42..46], &5.0f32.to_le_bytes());
    assert_eq!(b.len(), 22 + 24);
}

#[test]
fn mvf_rejects_malformed_input() {
    let good = FieldFile::new(vec![2, 2], vec![1.0, 1.0], 1, vec![0.0; 4]).unwrap().to_bytes();
    let mut bad_magic = good.clone();
    bad_magic[3] = b'2';
    assert!(FieldFile::from_bytes(&bad_magic).is_err());
    assert!(FieldFile::from_bytes(&good[..good.len() - 4]).is_err());
    assert!(FieldFile::from_bytes(&good[..good.len() - 1]).is_err());
    assert!(FieldFile::from_bytes(&good[..7]).is_err());
    let mut extra = good.clone();
    extra.extend_from_slice(&[0; 4]);
    assert!(FieldFile::from_bytes(&extra).is_err());
    assert!(FieldFile::new(vec![2], vec![1.0, 1.0], 1, vec![0.0; 2]).is_err());
    assert!(FieldFile::new(vec![2], vec![1.0], 0, vec![]).is_err());
    let two = FieldFile::new(vec![4, 4], vec![1.0, 1.0], 2, vec![0.5; 32]).unwrap();
    assert!(two.to_scalar().is_err());
    assert!(two.to_vector().is_ok());
    let frac = FieldFile::new(vec![4, 4], vec![1.0, 1.0], 1, vec![0.5; 16]).unwrap();
    assert!(frac.to_labels().is_err());
}

#[test]
fn mvf_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = GridSpec::new(&[5, 4, 6], &[1.0, 1.5, 0.75]).unwrap();
    let s = ScalarField::from_fn(g.clone(), |c| (c[0] * 7 + c[1]) as f64 * 0.125 - c[2] as f64).unwrap();
    let v = VectorField::from_fn(g.clone(), |c, k| (c[0] + 2 * c[1] + 3 * c[2] + k) as f64 / 4.0).unwrap();
    let l = LabelField::new(g.clone(), (0..g.num_voxels()).map(|i| (i % 5) as u32).collect()).unwrap();
    mvf::write_scalar(&dir.path().join("s.mvf"), &s).unwrap();
    mvf::write_vector(&dir.path().join("v.mvf"), &v).unwrap();
    mvf::write_labels(&dir.path().join("l.mvf"), &l).unwrap();
    assert_eq!(mvf::read_scalar(&dir.path().join("s.mvf")).unwrap(), s);
    assert_eq!(mvf::read_vector(&dir.path().join("v.mvf")).unwrap(), v);
    assert_eq!(mvf::read_labels(&dir.path().join("l.mvf")).unwrap(), l);
    assert!(mvf::read_vector(&dir.path().join("s.mvf")).is_err());
    assert!(mvf::read_scalar(&dir.path().join("missing.mvf")).is_err());
}

proptest! {
    #[test]
    fn random_mvf_is_bit_identical(dims in proptest::collection::vec(1u32..6, 1..4), channels in 1u8..4, seed in any::<u64>()) {
        let n: usize = dims.iter().map(|&d| d as usize).product::<usize>() * channels as usize;
        let mut x = seed;
        let data: Vec<f32> = (0..n)
            .map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                f32::from_bits((x >> 32) as u32)
            })
            .collect();
        let spacing = dims.iter().map(|&d| 0.5 + d as f32).collect();
        let f = FieldFile::new(dims, spacing, channels, data).unwrap();
        let back = FieldFile::from_bytes(&f.to_bytes()).unwrap();
        prop_assert_eq!(back.to_bytes(), f.to_bytes());
        let bits = |d: &[f32]| d.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back.data), bits(&f.data));
    }
}

#[test]
fn empty_config_gives_defaults() {
    let c = RunConfig::parse("").unwrap();
    assert_eq!(c, RunConfig::default());
    assert_eq!(c.tau, 0.4);
    assert_eq!(c.num_squarings, 12);
    assert_eq!(c.components, 4);
    assert_eq!((c.window, c.kappa, c.mu_beta, c.sigma_beta, c.eta, c.varsigma), (5, 0.5, 0.0, 2.3, 2.8, 5.0));
    assert_eq!((c.rank, c.lr_posterior, c.lr_gmm, c.lr_reg, c.lr_decay), (1, 1e-2, 2e-1, 1e-2, 1e-3));
    assert_eq!((c.vi_iters, c.tau_bspline, c.burn_in, c.chains, c.samples), (1024, 5e-2, 100_000, 2, 500));
    assert_eq!((c.sobolev_width, c.sobolev_lambda, c.sigma_init, c.u_init), (7, 0.5, 0.5, 0.1));
}

#[test]
fn config_errors() {
    assert!(RunConfig::parse("tau = -1").is_err());
    assert!(RunConfig::parse("tau = 0").is_err());
    assert!(RunConfig::parse("bogus = 1").is_err());
    assert!(RunConfig::parse("tau = fast").is_err());
    assert!(RunConfig::parse("tau 0.1").is_err());
    assert!(RunConfig::parse("window = 4").is_err());
    assert!(RunConfig::parse("sobolev = maybe").is_err());
    let c = RunConfig::parse("# comment\n\n  tau = 0.25   # inline\nreg_mode = gamma\n").unwrap();
    assert_eq!(c.tau, 0.25);
}

#[test]
fn config_echo_round_trips() {
    let c = RunConfig::parse("lambda_init = 2.0\n").unwrap();
    assert_eq!(c.lambda_init, 2.0);
    let echoed = c.echo();
    assert!(echoed.lines().any(|l| l == "lambda_init = 2.0"));
    let again = RunConfig::parse(&echoed).unwrap();
    assert_eq!(again, c);
    assert_eq!(again.echo(), echoed);
    let odd = RunConfig::parse("sigma_init = 0.1\nparametrisation = bspline\nbspline_spacing = 2\nsgld_noise = false\n").unwrap();
    assert_eq!(RunConfig::parse(&odd.echo()).unwrap(), odd);
    assert_eq!(odd.step_size(), odd.tau_bspline);
}

#[test]
fn pgm_golden_bytes() {
    let g = GridSpec::unit(&[4, 4]).unwrap();
    let f = ScalarField::from_fn(g, |c| c[0] as f64 * 4.0 + c[1] as f64).unwrap();
    let (bytes, min, max) = encode_pgm(&extract_slice(&f, 2, 0).unwrap());
    let mut expect = b"P5\n4 4\n255\n".to_vec();
    expect.extend([0u8, 17, 34, 51, 68, 85, 102, 119, 136, 153, 170, 187, 204, 221, 238, 255]);
    assert_eq!(bytes, expect);
    assert_eq!((min, max), (0.0, 15.0));
    let flat = ScalarField::zeros(GridSpec::unit(&[4, 4]).unwrap());
    assert!(encode_pgm(&extract_slice(&flat, 0, 0).unwrap()).0[11..].iter().all(|&b| b == 0));
}

#[test]
fn pgm_slices_of_a_volume() {
    let g = GridSpec::unit(&[4, 5, 6]).unwrap();
    let f = ScalarField::from_fn(g, |c| (100 * c[0] + 10 * c[1] + c[2]) as f64).unwrap();
    let s = extract_slice(&f, 1, 3).unwrap();
    assert_eq!((s.rows, s.cols), (4, 6));
    assert_eq!(s.values[0], 30.0);
    assert_eq!(s.values[6 + 5], 135.0);
    let s = extract_slice(&f, 0, 2).unwrap();
    assert_eq!((s.rows, s.cols), (5, 6));
    assert_eq!(s.values[7], 211.0);
    assert!(extract_slice(&f, 2, 6).is_err());
    assert!(extract_slice(&f, 3, 0).is_err());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.pgm");
    write_slice(&path, &f, 2, 5).unwrap();
    assert_eq!(&std::fs::read(&path).unwrap()[..11], b"P5\n5 4\n255\n");
    let side = std::fs::read_to_string(dir.path().join("s.pgm.txt")).unwrap();
    assert_eq!(side, "min = 5.0\nmax = 345.0\n");
}

#[test]
fn csv_tables() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let rows = vec![vec!["1".to_string(), fmt_f64(0.1)], vec!["2".into(), fmt_f64(-2.5e-7)]];
    write_table(&path, &["k", "value"], &rows).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text, "k,value\n1,0.1\n2,-2.5e-7\n");
    let (h, r) = read_table(&path).unwrap();
    assert_eq!(h, vec!["k", "value"]);
    assert_eq!(r, rows);
    assert_eq!(r[1][1].parse::<f64>().unwrap(), -2.5e-7);
    assert!(write_table(&path, &["a"], &[vec!["1".into(), "2".into()]]).is_err());
}

#[test]
fn synth_pair_is_consistent() {
    let cfg = SynthConfig::default();
    let pair = generate(&cfg).unwrap();
    let d = mean_dice(&pair.moving_labels, &pair.fixed_labels).unwrap();
    assert!(d < 1.0 && d > 0.0, "{d}");
    let ids = pair.fixed_labels.label_ids();
    assert_eq!(ids.len(), cfg.labels);
    assert!(pair.fixed.values().iter().zip(pair.moving.values()).any(|(a, b)| (a - b).abs() > 0.1));
    let again = generate(&cfg).unwrap();
    assert_eq!(again.moving.values(), pair.moving.values());
    let other = generate(&SynthConfig { seed: 1, ..cfg.clone() }).unwrap();
    assert_ne!(other.moving.values(), pair.moving.values());
    let still = generate(&SynthConfig { amplitude: 0.0, noise: 0.0, ..cfg }).unwrap();
    assert_eq!(still.moving.values(), still.fixed.values());
}

#[test]
fn synth_then_metrics_on_identity_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let cfg = SynthConfig { dims: vec![32, 32], labels: 4, ..SynthConfig::default() };
    pipeline::write_synth(&data, &cfg).unwrap();
    for f in ["fixed.mvf", "moving.mvf", "fixed_labels.mvf", "moving_labels.mvf", "velocity.mvf", "displacement.mvf", "synth.txt"] {
        assert!(data.join(f).exists(), "{f}");
    }
    let (fl, ml) = pipeline::load_labels(&data).unwrap();
    assert!(fl.label_ids().iter().any(|&l| svfreg::metrics::dice(&fl, &ml, l).unwrap() < 1.0));
}

#[test]
fn vi_run_directory_is_complete() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    pipeline::write_synth(&data, &SynthConfig { dims: vec![16, 16], labels: 3, ..SynthConfig::default() }).unwrap();
    let cfg = RunConfig::parse("vi_iters = 20\nsamples = 4\n").unwrap();
    let (f, m) = pipeline::load_images(&data).unwrap();
    let problem = pipeline::build_problem(f, m, &cfg).unwrap();
    let run = pipeline::vi(&problem, &cfg).unwrap();
    let out = dir.path().join("vi");
    pipeline::write_vi(&out, &problem, &run, &cfg).unwrap();
    assert_eq!(RunConfig::from_file(&out.join("config.txt")).unwrap(), cfg);
    let (h, rows) = read_table(&out.join("elbo_trace.csv")).unwrap();
    assert_eq!(h, vec!["iteration", "elbo", "expected_energy", "entropy"]);
    assert_eq!(rows.len(), run.elbo.len());
    let (q, _) = pipeline::read_vi(&out).unwrap();
    assert_eq!(q.dim(), problem.num_params());
    for (a, b) in q.mu().iter().zip(run.q.mu()) {
        assert_eq!(*a, *b as f32 as f64);
    }
    let samples = pipeline::read_samples(&out).unwrap();
    assert_eq!(samples.len(), 4);
    let summary = pipeline::metrics(&data, &out, &dir.path().join("m")).unwrap();
    assert!((0.0..=1.0).contains(&summary.mean_dice));
    assert!(dir.path().join("m").join("structures.csv").exists());
}
