//! Special functions against exact or independently computed references.

use incomedyn::quadrature::{integrate, integrate_to_infinity};
use incomedyn::special::{gamma_pq, kummer_m, lgamma};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Kummer series summed in exact rational arithmetic.
fn kummer_exact(a: BigRational, b: BigRational, z: BigRational, terms: usize) -> f64 {
    let mut term = BigRational::one();
    let mut sum = BigRational::zero();
    for k in 0..terms {
        sum += &term;
        let k = BigRational::from_integer(BigInt::from(k as i64));
        term = term * (&a + &k) / (&b + &k) * &z / (&k + BigRational::one());
    }
    sum.to_f64().unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn kummer_matches_rational_series() {
    let cases = [(13, 10, 27, 10, -4, 1), (13, 10, 27, 10, 3, 1), (-5, 2, 7, 4, -6, 1), (9, 2, 1, 3, 5, 2)];
    for &(an, ad, bn, bd, zn, zd) in &cases {
        let exact = kummer_exact(ratio(an, ad), ratio(bn, bd), ratio(zn, zd), 160);
        let got = kummer_m(an as f64 / ad as f64, bn as f64 / bd as f64, zn as f64 / zd as f64).unwrap();
        assert!(rel(got, exact) < 1e-13, "M({an}/{ad}, {bn}/{bd}, {zn}/{zd}) = {got}, exact {exact}");
    }
}

#[test]
fn kummer_poles_and_overflow_are_errors() {
    assert!(kummer_m(1.0, -2.0, 0.5).is_err());
    assert!(kummer_m(1.0, 0.0, 0.5).is_err());
    assert!(kummer_m(1.0, 2.0, 1e4).is_err());
}

#[test]
fn lgamma_matches_factorials() {
    let mut fact = BigInt::one();
    for n in 1..40u32 {
        // fact = (n-1)!
        let exact = fact.to_f64().unwrap().ln();
        let got = lgamma(n as f64).unwrap();
        assert!((got - exact).abs() < 1e-12 * exact.abs().max(1.0), "lgamma({n})");
        fact *= BigInt::from(n);
    }
    // Γ(1/2) = √π
    assert!((lgamma(0.5).unwrap() - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
}

#[test]
fn incomplete_gamma_matches_quadrature() {
    for &a in &[0.5, 1.0, 2.6, 7.3, 30.0] {
        let norm = lgamma(a).unwrap();
        let pdf = |t: f64| if t <= 0.0 { 0.0 } else { ((a - 1.0) * t.ln() - t - norm).exp() };
        for &x in &[0.05, 0.3, 2.0, 10.0, 45.0] {
            let p_ref = integrate(pdf, 0.0, x, 1e-15, 1e-13).unwrap().value;
            let q_ref = integrate_to_infinity(pdf, x, 1e-15, 1e-13).unwrap().value;
            let (p, q) = gamma_pq(a, x).unwrap();
            assert!((p - p_ref).abs() < 1e-11 * p_ref.max(1e-300) + 1e-15, "P({a}, {x})");
            assert!((q - q_ref).abs() < 1e-11 * q_ref.max(1e-300) + 1e-15, "Q({a}, {x})");
        }
    }
}

proptest! {
    #[test]
    fn kummer_with_equal_parameters_is_exponential(a in 0.1f64..12.0, z in -60.0f64..40.0) {
        let got = kummer_m(a, a, z).unwrap();
        prop_assert!(rel(got, z.exp()) < 1e-12);
    }

    #[test]
    fn kummer_transformation_holds(a in 0.1f64..6.0, b in 0.2f64..8.0, z in 0.0f64..30.0) {
        let direct = kummer_m(a, b, z).unwrap();
        let transformed = z.exp() * kummer_m(b - a, b, -z).unwrap();
        prop_assert!(rel(direct, transformed) < 1e-10);
    }

    #[test]
    fn incomplete_gamma_parts_sum_to_one(a in 0.05f64..50.0, x in 0.0f64..200.0) {
        let (p, q) = gamma_pq(a, x).unwrap();
        prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&q));
        prop_assert!((p + q - 1.0).abs() < 1e-13);
    }

    #[test]
    fn incomplete_gamma_increases_in_x(a in 0.05f64..50.0, x in 0.0f64..100.0, dx in 1e-3f64..10.0) {
        let (p0, _) = gamma_pq(a, x).unwrap();
        let (p1, _) = gamma_pq(a, x + dx).unwrap();
        prop_assert!(p1 >= p0 - 1e-15);
    }

    #[test]
    fn lgamma_recurrence(x in 0.01f64..80.0) {
        // Γ(x+1) = x Γ(x)
        let lhs = lgamma(x + 1.0).unwrap();
        let rhs = x.ln() + lgamma(x).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }
}
