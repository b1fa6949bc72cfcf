//! Binned maximum likelihood and Monod least squares on synthetic data with
//! known parameters.

use incomedyn::estimate::{
    fit_ipdf, fit_monod, fit_monod_points, labour_rate_series, log_likelihood, nelder_mead, FitOptions, ScaleMode,
};
use incomedyn::survey::{synth_round, SynthSpec};
use incomedyn::Ipdf;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const N: u64 = 1_000_000;

fn twenty_bands() -> Vec<f64> {
    let mut e = vec![0.0];
    e.extend((1..20).map(|i| 0.2 + 0.16 * i as f64));
    e.push(f64::INFINITY);
    e
}

fn synth(seed: u64, monod: Option<(f64, f64)>) -> incomedyn::survey::BandedDistribution {
    let d = Ipdf::new(1.6, 1.6, 0.15).unwrap();
    let spec = SynthSpec { round_id: format!("S{seed}"), year: 2000.0, edges: twenty_bands(), n_population: N, seed, monod };
    synth_round(&d, &spec).unwrap()
}

#[test]
fn nelder_mead_finds_the_rosenbrock_minimum() {
    let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
    let s = nelder_mead(rosen, &[-1.2, 1.0], &[0.5, 0.5], 1e-10, 20_000);
    assert!(s.converged);
    assert!((s.x[0] - 1.0).abs() < 1e-6 && (s.x[1] - 1.0).abs() < 1e-6, "{:?}", s.x);
}

#[test]
fn fit_recovers_parameters() {
    for seed in 0..10 {
        let round = synth(seed, None);
        let fit = fit_ipdf(&round, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.m - 1.6).abs() < 0.05 && (fit.c0 - 1.6).abs() < 0.05, "seed {seed}: {fit:?}");
        // the maximum is at least as likely as the truth
        let truth = log_likelihood(&round, 1.6, 1.6, 0.15).unwrap();
        let lr = 2.0 * N as f64 * (fit.log_likelihood - truth);
        assert!(lr >= -1e-6, "seed {seed}: LR {lr}");
        assert!((fit.per_band_expected_shares.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn likelihood_is_the_multinomial_log_probability() {
    let round = synth(1, None);
    let d = Ipdf::new(1.7, 1.5, 0.15).unwrap();
    // oracle: direct CDF differences with the outer bands extended
    let edges = twenty_bands();
    let cdf = |x: f64| if x <= 0.15 { 0.0 } else { d.cdf(x - 0.15).unwrap() };
    let mut ll = 0.0;
    for (b, share) in round.shares().iter().enumerate() {
        let lo = if b == 0 { 0.0 } else { cdf(edges[b]) };
        let hi = if b + 2 == edges.len() { 1.0 } else { cdf(edges[b + 1]) };
        ll += share * (hi - lo).ln();
    }
    assert!((log_likelihood(&round, 1.7, 1.5, 0.15).unwrap() - ll).abs() < 1e-12);
}

#[test]
fn mean_anchored_mode_ties_the_scale_to_the_mean() {
    let round = synth(2, None);
    let opts = FitOptions { scale: ScaleMode::MeanAnchored, ..FitOptions::default() };
    let fit = fit_ipdf(&round, &opts).unwrap();
    let mean = round.estimated_mean().unwrap();
    assert!((fit.c0 - fit.m * (mean - 0.15)).abs() < 1e-9);
    assert!((fit.m - 1.6).abs() < 0.05);
}

#[test]
fn offset_can_be_fitted() {
    let round = synth(3, None);
    let opts = FitOptions { offset: None, ..FitOptions::default() };
    let fit = fit_ipdf(&round, &opts).unwrap();
    assert!(fit.offset_fitted);
    assert!((fit.offset - 0.15).abs() < 0.05, "{fit:?}");
}

#[test]
fn too_few_bands_is_a_data_error() {
    let d = Ipdf::new(1.6, 1.6, 0.15).unwrap();
    let spec = SynthSpec {
        round_id: "X".into(),
        year: 2000.0,
        edges: vec![0.0, 1.0, 2.0, f64::INFINITY],
        n_population: 1000,
        seed: 0,
        monod: None,
    };
    let round = synth_round(&d, &spec).unwrap();
    assert_eq!(fit_ipdf(&round, &FitOptions::default()).unwrap_err().kind(), incomedyn::ErrorKind::Validation);
}

/// Band means of a 15-band round, used as Monod abscissae.
fn fifteen_band_incomes() -> Vec<f64> {
    let d = Ipdf::new(1.6, 1.6, 0.15).unwrap();
    let mut edges = vec![0.0];
    edges.extend((1..15).map(|i| 0.25 + 0.22 * i as f64));
    edges.push(f64::INFINITY);
    let spec = SynthSpec { round_id: "M".into(), year: 2000.0, edges, n_population: N, seed: 5, monod: None };
    synth_round(&d, &spec).unwrap().representative_incomes().unwrap()
}

#[test]
fn monod_noiseless_fit_is_exact() {
    let y = fifteen_band_incomes();
    let s: Vec<f64> = y.iter().map(|&y| 1.0 * y / (0.5 + y)).collect();
    let fit = fit_monod_points(&y, &s).unwrap();
    assert!((fit.v - 1.0).abs() < 1e-8 && (fit.k - 0.5).abs() < 1e-8, "{fit:?}");
    assert!(!fit.at_boundary);
}

#[test]
fn monod_noisy_fit_is_close() {
    let y = fifteen_band_incomes();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<f64> = y
            .iter()
            .map(|&y| {
                let xi: f64 = StandardNormal.sample(&mut rng);
                y / (0.5 + y) * (1.0 + 0.01 * xi)
            })
            .collect();
        let fit = fit_monod_points(&y, &s).unwrap();
        assert!((fit.v - 1.0).abs() < 0.05 && (fit.k - 0.5).abs() < 0.05 * 0.5, "seed {seed}: {fit:?}");
    }
}

#[test]
fn monod_from_a_round() {
    let round = synth(4, Some((0.7, 0.5)));
    let fit = fit_monod(&round).unwrap();
    assert!((fit.v - 0.7).abs() < 1e-8 && (fit.k - 0.5).abs() < 1e-8);
    assert!(fit_monod(&synth(4, None)).is_err());
}

#[test]
fn labour_rate_follows_the_round_means() {
    let c = labour_rate_series(&[(2000.0, 1.0), (1990.0, 0.8)], 1.6).unwrap();
    assert!((c.eval(1990.0) - 1.28).abs() < 1e-12);
    assert!((c.eval(1995.0) - 1.44).abs() < 1e-12);
    assert!(labour_rate_series(&[], 1.6).is_err());
}
