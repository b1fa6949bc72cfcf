//! Steady-state law checked against composite Simpson integration written
//! here, bisection quantiles and sampling.

use incomedyn::distlib::Moment;
use incomedyn::stats::ks_distance;
use incomedyn::{Ipdf, Ipdf32};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Composite Simpson on `[a, b]` with `n` (even) panels.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// `∫ g(y) dy` over `(0, ∞)` as Simpson in `s = ln y` over a wide window.
fn over_positive_reals<F: Fn(f64) -> f64>(g: F, mean: f64, hi_factor: f64) -> f64 {
    simpson(|s| g(s.exp()) * s.exp(), (mean * 1e-4).ln(), (mean * hi_factor).ln(), 40_000)
}

fn random_params(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (rng.random_range(0.5..5.0), rng.random_range(0.2..20.0))).collect()
}

#[test]
fn density_is_normalized() {
    for (m, c0) in random_params(20, 1) {
        let d = Ipdf::unshifted(m, c0).unwrap();
        let mass = over_positive_reals(|y| d.density(y).unwrap(), d.mean(), 1e12);
        assert!((mass - 1.0).abs() < 1e-8, "M = {m}, C0 = {c0}: mass {mass}");
    }
}

#[test]
fn mean_equals_scale_over_shape() {
    for (m, c0) in random_params(20, 2) {
        let d = Ipdf::unshifted(m, c0).unwrap();
        // the y f(y) tail decays like y^-(M+1); integrate far enough out
        let hi = 10f64.powf(10.0 / m.min(2.0));
        let mean = over_positive_reals(|y| y * d.density(y).unwrap(), d.mean(), hi);
        let tail = d.sf(d.mean() * hi).unwrap() * d.mean() * hi * (m + 1.0) / m;
        assert!(((mean + tail) - c0 / m).abs() < 1e-8 * (c0 / m), "M = {m}: {mean} vs {}", c0 / m);
    }
}

#[test]
fn cdf_matches_integrated_density() {
    for (m, c0) in random_params(10, 3) {
        let d = Ipdf::unshifted(m, c0).unwrap();
        for q in [0.3, 1.0, 2.5, 8.0] {
            let y = q * d.mean();
            let integral = simpson(|s| d.density(s.exp()).unwrap() * s.exp(), (d.mean() * 1e-4).ln(), y.ln(), 20_000);
            assert!((d.cdf(y).unwrap() - integral).abs() < 1e-9);
        }
    }
}

#[test]
fn second_moment_closed_form() {
    let d = Ipdf::unshifted(3.5, 2.0).unwrap();
    let exact = 2.0f64.powi(2) / (3.5 * 2.5);
    match d.moment(2).unwrap() {
        Moment::Finite(v) => assert!((v - exact).abs() < 1e-12),
        Moment::Divergent => panic!("second moment is finite for M = 3.5"),
    }
    assert!(Ipdf::unshifted(1.6, 1.6).unwrap().moment(3).unwrap().is_divergent());
    assert!(Ipdf::unshifted(1.6, 1.6).unwrap().moment(2).unwrap().finite().is_some());
}

#[test]
fn sample_median_matches_bisection() {
    let d = Ipdf::unshifted(1.6, 1.6).unwrap();
    let (mut lo, mut hi) = (1e-6_f64, 1e6_f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if d.cdf(mid).unwrap() < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let median = 0.5 * (lo + hi);
    let mut s = d.sample(100_001, 17);
    s.sort_by(f64::total_cmp);
    let sample_median = s[50_000];
    // standard error of a median is 1 / (2 f(m) √n)
    let se = 1.0 / (2.0 * d.density(median).unwrap() * (100_001f64).sqrt());
    assert!((sample_median - median).abs() < 4.0 * se, "{sample_median} vs {median}");
}

#[test]
fn samples_pass_ks_for_random_parameters() {
    let n = 20_000;
    // 1.63 / √n is the 1% critical value; over 50 pairs allow a little slack
    let bound = 1.95 / (n as f64).sqrt();
    for (i, (m, c0)) in random_params(50, 4).into_iter().enumerate() {
        let d = Ipdf::unshifted(m, c0).unwrap();
        let s = d.sample(n, 100 + i as u64);
        let ks = ks_distance(&s, |y| d.cdf(y).unwrap());
        assert!(ks < bound, "M = {m}, C0 = {c0}: KS {ks}");
    }
}

#[test]
fn sampling_is_reproducible() {
    let d = Ipdf::unshifted(2.0, 3.0).unwrap();
    assert_eq!(d.sample(100, 9), d.sample(100, 9));
    assert_ne!(d.sample(100, 9), d.sample(100, 10));
}

#[test]
fn single_precision_agrees() {
    let d64 = Ipdf::unshifted(1.6, 1.6).unwrap();
    let d32 = Ipdf32::unshifted(1.6, 1.6).unwrap();
    for y in [0.2f32, 0.7, 1.0, 3.0, 20.0] {
        let a = d32.cdf(y).unwrap() as f64;
        let b = d64.cdf(y as f64).unwrap();
        assert!((a - b).abs() < 1e-5, "y = {y}: {a} vs {b}");
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(Ipdf::unshifted(0.0, 1.0).is_err());
    assert!(Ipdf::unshifted(1.0, -1.0).is_err());
    assert!(Ipdf::new(1.0, 1.0, -0.1).is_err());
    assert!(Ipdf::unshifted(1.0, 1.0).unwrap().density(-1.0).is_err());
}

proptest! {
    #[test]
    fn cdf_is_monotone_and_bounded(m in 0.2f64..8.0, c0 in 0.05f64..50.0, a in 1e-3f64..1e3, b in 1e-3f64..1e3) {
        let d = Ipdf::unshifted(m, c0).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (fl, fh) = (d.cdf(lo).unwrap(), d.cdf(hi).unwrap());
        prop_assert!((0.0..=1.0).contains(&fl) && (0.0..=1.0).contains(&fh));
        prop_assert!(fh >= fl);
        prop_assert!((d.cdf(hi).unwrap() + d.sf(hi).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn band_probabilities_add_up(m in 0.3f64..6.0, c0 in 0.1f64..10.0, cut in 0.05f64..20.0) {
        let d = Ipdf::unshifted(m, c0).unwrap();
        let y = cut * d.mean();
        let whole = d.interval_probability(0.0, f64::INFINITY).unwrap();
        let parts = d.interval_probability(0.0, y).unwrap() + d.interval_probability(y, f64::INFINITY).unwrap();
        prop_assert!((whole - 1.0).abs() < 1e-13);
        prop_assert!((parts - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_means_add_to_mean(m in 0.3f64..6.0, c0 in 0.1f64..10.0, cut in 0.05f64..20.0) {
        let d = Ipdf::unshifted(m, c0).unwrap();
        let y = cut * d.mean();
        let total = d.partial_first_moment(0.0, y).unwrap() + d.partial_first_moment(y, f64::INFINITY).unwrap();
        prop_assert!((total - d.mean()).abs() < 1e-11 * d.mean());
    }

    #[test]
    fn density_is_positive(m in 0.2f64..8.0, c0 in 0.05f64..50.0, q in 0.01f64..100.0) {
        let d = Ipdf::unshifted(m, c0).unwrap();
        prop_assert!(d.density(q * d.mean()).unwrap() >= 0.0);
    }
}
