//! Special functions: log-gamma, regularized incomplete gamma, Kummer's M.
//!
//! Everything is generic over [`Scalar`]. The incomplete gamma uses the usual
//! split: power series for `x < a + 1`, Lentz continued fraction otherwise.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative tolerance of the incomplete-gamma series and continued fraction.
pub const INCGAMMA_TOL: f64 = 1e-12;
/// Iteration cap of the incomplete-gamma series and continued fraction.
pub const INCGAMMA_MAX_ITER: usize = 500;
/// Relative tolerance of the Kummer series.
pub const KUMMER_TOL: f64 = 1e-14;
/// Largest |z| accepted by [`kummer_m`] after the Kummer transformation.
pub const KUMMER_MAX_ABS_Z: f64 = 700.0;
const KUMMER_MAX_TERMS: usize = 20_000;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln |Γ(x)|` by the Lanczos approximation (g = 7), with reflection below 1/2.
///
/// Non-positive integers are poles and return an error.
pub fn lgamma<T: Scalar>(x: T) -> Result<T> {
    if x.is_nan() {
        return Err(Error::domain("lgamma of NaN"));
    }
    if x <= T::zero() && x == x.floor() {
        return Err(Error::Pole(format!("lgamma at non-positive integer {x}")));
    }
    Ok(lgamma_unchecked(x))
}

fn lgamma_unchecked<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        // Γ(x)Γ(1−x) = π / sin(πx)
        let s = (T::PI() * x).sin().abs();
        return (T::PI() / s).ln() - lgamma_unchecked(T::one() - x);
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS_COEF[0]);
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (x + T::from_usize_lossy(i));
    }
    let t = x + T::lit(LANCZOS_G) + half;
    half * (T::lit(2.0) * T::PI()).ln() + (x + half) * t.ln() - t + acc.ln()
}

/// Regularized lower and upper incomplete gamma `(P(a, x), Q(a, x))`.
pub fn gamma_pq<T: Scalar>(a: T, x: T) -> Result<(T, T)> {
    if !(a > T::zero()) || !a.is_finite() {
        return Err(Error::domain(format!("incomplete gamma requires a > 0, got {a}")));
    }
    if x.is_nan() || x < T::zero() {
        return Err(Error::domain(format!("incomplete gamma requires x >= 0, got {x}")));
    }
    if x == T::zero() {
        return Ok((T::zero(), T::one()));
    }
    if x.is_infinite() {
        return Ok((T::one(), T::zero()));
    }
    let log_prefactor = a * x.ln() - x - lgamma_unchecked(a);
    if x < a + T::one() {
        let p = lower_series(a, x)? * log_prefactor.exp();
        let p = p.min(T::one());
        Ok((p, T::one() - p))
    } else {
        let q = upper_continued_fraction(a, x)? * log_prefactor.exp();
        let q = q.min(T::one());
        Ok((T::one() - q, q))
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = Γ(a, x) / Γ(a)`.
pub fn reg_upper_incomplete_gamma<T: Scalar>(a: T, x: T) -> Result<T> {
    gamma_pq(a, x).map(|(_, q)| q)
}

/// Regularized lower incomplete gamma `P(a, x) = γ(a, x) / Γ(a)`.
pub fn reg_lower_incomplete_gamma<T: Scalar>(a: T, x: T) -> Result<T> {
    gamma_pq(a, x).map(|(p, _)| p)
}

// Σ x^n / (a (a+1) ... (a+n)); multiplied by the prefactor this is P(a, x).
fn lower_series<T: Scalar>(a: T, x: T) -> Result<T> {
    let eps = T::tol(INCGAMMA_TOL);
    let mut ap = a;
    let mut term = T::one() / a;
    let mut sum = term;
    for _ in 0..INCGAMMA_MAX_ITER {
        ap = ap + T::one();
        term = term * x / ap;
        sum = sum + term;
        if term.abs() < sum.abs() * eps {
            return Ok(sum);
        }
    }
    Err(Error::NoConvergence { what: "incomplete gamma series", iterations: INCGAMMA_MAX_ITER })
}

// Modified Lentz evaluation of the continued fraction for Γ(a, x) e^x x^-a.
fn upper_continued_fraction<T: Scalar>(a: T, x: T) -> Result<T> {
    let eps = T::tol(INCGAMMA_TOL);
    let tiny = T::min_positive_value() / eps;
    let two = T::lit(2.0);
    let mut b = x + T::one() - a;
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    for i in 1..=INCGAMMA_MAX_ITER {
        let fi = T::from_usize_lossy(i);
        let an = -fi * (fi - a);
        b = b + two;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = T::one() / d;
        let delta = d * c;
        h = h * delta;
        if (delta - T::one()).abs() < eps {
            return Ok(h);
        }
    }
    Err(Error::NoConvergence { what: "incomplete gamma continued fraction", iterations: INCGAMMA_MAX_ITER })
}

/// Iterator over the terms `(a)_k z^k / ((b)_k k!)` of the Kummer series.
#[derive(Debug, Clone)]
pub struct KummerSeries<T> {
    a: T,
    b: T,
    z: T,
    k: usize,
    term: T,
}

impl<T: Scalar> KummerSeries<T> {
    pub fn new(a: T, b: T, z: T) -> Self {
        Self { a, b, z, k: 0, term: T::one() }
    }

    /// Ratio between term `k + 1` and term `k`.
    pub fn term_ratio(a: T, b: T, z: T, k: usize) -> T {
        let k = T::from_usize_lossy(k);
        (a + k) * z / ((b + k) * (k + T::one()))
    }
}

impl<T: Scalar> Iterator for KummerSeries<T> {
    type Item = T;

    fn next(&mut self) -> Option<T> {
        let out = self.term;
        self.term = out * Self::term_ratio(self.a, self.b, self.z, self.k);
        self.k += 1;
        Some(out)
    }
}

fn is_nonpositive_integer<T: Scalar>(x: T) -> bool {
    x <= T::zero() && x == x.floor()
}

/// Kummer's confluent hypergeometric function `M(a, b, z) = ₁F₁(a; b; z)`.
///
/// Negative arguments go through `M(a, b, z) = e^z M(b − a, b, −z)` so the
/// summed series has a positive argument. `b` may be negative as long as it
/// is not a non-positive integer.
pub fn kummer_m<T: Scalar>(a: T, b: T, z: T) -> Result<T> {
    if a.is_nan() || b.is_nan() || z.is_nan() {
        return Err(Error::domain("kummer_m with NaN argument"));
    }
    if is_nonpositive_integer(b) {
        return Err(Error::Pole(format!("kummer_m: b = {b} is a non-positive integer")));
    }
    if z.abs() > T::lit(KUMMER_MAX_ABS_Z) {
        return Err(Error::Overflow(format!("kummer_m: |z| = {} exceeds {KUMMER_MAX_ABS_Z}", z.abs())));
    }
    if z == T::zero() {
        return Ok(T::one());
    }
    if z < T::zero() {
        let inner = kummer_series(b - a, b, -z)?;
        let v = z.exp() * inner;
        return finite_or_overflow(v, "kummer_m");
    }
    kummer_series(a, b, z)
}

fn finite_or_overflow<T: Scalar>(v: T, what: &str) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(format!("{what} not representable")))
    }
}

fn kummer_series<T: Scalar>(a: T, b: T, z: T) -> Result<T> {
    // Terminating series when a is a non-positive integer.
    let terminates_at = if is_nonpositive_integer(a) { a.abs().to_usize() } else { None };
    let eps = T::tol(KUMMER_TOL);
    let mut sum = T::zero();
    let mut series = KummerSeries::new(a, b, z);
    for k in 0..KUMMER_MAX_TERMS {
        let term = series.next().unwrap_or_else(T::zero);
        sum = sum + term;
        if !sum.is_finite() {
            return Err(Error::Overflow("kummer_m partial sum".into()));
        }
        if let Some(n) = terminates_at {
            if k == n {
                return Ok(sum);
            }
            continue;
        }
        // Once k exceeds |z| and both b + k and a + k are positive the ratio is
        // below one and shrinking, so the tail is bounded by term / (1 - ratio).
        let fk = T::from_usize_lossy(k);
        if fk > z.abs() && b + fk > T::zero() && a + fk > T::zero() {
            let ratio = KummerSeries::term_ratio(a, b, z, k).abs();
            if ratio < T::one() {
                let tail = term.abs() * ratio / (T::one() - ratio);
                if tail <= eps * sum.abs() {
                    return Ok(sum);
                }
            }
        }
    }
    Err(Error::NoConvergence { what: "kummer series", iterations: KUMMER_MAX_TERMS })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn lgamma_integers() {
        assert!(rel(lgamma(5.0_f64).unwrap(), 24.0_f64.ln()) < 1e-14);
        assert!(lgamma(1.0_f64).unwrap().abs() < 1e-14);
        assert!(lgamma(2.0_f64).unwrap().abs() < 1e-14);
        assert!(rel(lgamma(11.0_f64).unwrap(), 3_628_800.0_f64.ln()) < 1e-14);
    }

    #[test]
    fn lgamma_half_and_reflection() {
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!(rel(lgamma(0.5_f64).unwrap(), sqrt_pi.ln()) < 1e-14);
        // Γ(-0.5) = -2 sqrt(pi)
        assert!(rel(lgamma(-0.5_f64).unwrap(), (2.0 * sqrt_pi).ln()) < 1e-13);
        assert!(lgamma(0.0_f64).is_err());
        assert!(lgamma(-3.0_f64).is_err());
    }

    #[test]
    fn incomplete_gamma_edges() {
        assert_eq!(reg_upper_incomplete_gamma(2.6_f64, 0.0).unwrap(), 1.0);
        assert_eq!(reg_upper_incomplete_gamma(2.6_f64, f64::INFINITY).unwrap(), 0.0);
        assert!(reg_upper_incomplete_gamma(0.0_f64, 1.0).is_err());
        assert!(reg_upper_incomplete_gamma(1.0_f64, -1.0).is_err());
    }

    #[test]
    fn upper_gamma_shape_one_is_exponential() {
        for &x in &[0.0, 0.01, 0.5, 1.0, 2.0, 7.5, 30.0, 100.0] {
            let q = reg_upper_incomplete_gamma(1.0_f64, x).unwrap();
            let e = (-x).exp();
            assert!(rel(q, e) < 1e-12, "x={x} q={q} e={e}");
        }
    }

    #[test]
    fn p_plus_q_is_one_across_the_split() {
        for &a in &[0.5_f64, 1.0, 2.6, 7.0, 20.0] {
            for &x in &[0.1, a, a + 0.999, a + 1.0, a + 1.001, 3.0 * a] {
                let (p, q) = gamma_pq(a, x).unwrap();
                assert!((p + q - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn kummer_closed_forms() {
        assert_eq!(kummer_m(1.3_f64, 2.7, 0.0).unwrap(), 1.0);
        for &z in &[-20.0, -3.0, -0.2, 0.4, 5.0, 30.0] {
            let e = f64::exp(z);
            assert!(rel(kummer_m(1.0, 1.0, z).unwrap(), e) < 1e-12);
            assert!(rel(kummer_m(3.6, 3.6, z).unwrap(), e) < 1e-12);
        }
        // M(1, 2, z) = (e^z - 1) / z
        for &z in &[-5.0_f64, 2.0] {
            assert!(rel(kummer_m(1.0, 2.0, z).unwrap(), z.exp_m1() / z) < 1e-12);
        }
    }

    #[test]
    fn kummer_pole_and_overflow() {
        assert!(matches!(kummer_m(1.0_f64, -2.0, 1.0), Err(Error::Pole(_))));
        assert!(matches!(kummer_m(1.0_f64, 0.0, 1.0), Err(Error::Pole(_))));
        assert!(matches!(kummer_m(1.0_f64, 2.0, 701.0), Err(Error::Overflow(_))));
    }

    #[test]
    fn kummer_polynomial_case() {
        // M(-2, b, z) = 1 - 2z/b + z^2 / (b (b+1))
        let (b, z) = (1.5_f64, 0.7_f64);
        let exact = 1.0 - 2.0 * z / b + z * z / (b * (b + 1.0));
        assert!(rel(kummer_m(-2.0, b, z).unwrap(), exact) < 1e-14);
    }

    #[test]
    fn kummer_series_term_ratio() {
        let (a, b, z) = (1.3_f64, 2.7_f64, 4.0_f64);
        let terms: Vec<f64> = KummerSeries::new(a, b, z).take(40).collect();
        for k in 0..39 {
            let r = KummerSeries::term_ratio(a, b, z, k);
            assert!(rel(terms[k + 1] / terms[k], r) < 1e-13);
        }
        // Past k > |z| the geometric remainder bound decreases monotonically.
        let mut partial = 0.0;
        let mut last_bound = f64::INFINITY;
        for (k, t) in terms.iter().enumerate() {
            partial += t;
            if k as f64 > z {
                let r = KummerSeries::term_ratio(a, b, z, k).abs();
                let bound = t.abs() * r / (1.0 - r);
                assert!(bound < last_bound);
                last_bound = bound;
            }
        }
        assert!(rel(partial, kummer_m(a, b, z).unwrap()) < 1e-12);
    }

    #[test]
    fn f32_paths_work() {
        let q = reg_upper_incomplete_gamma(2.6_f32, 1.6).unwrap();
        let q64 = reg_upper_incomplete_gamma(2.6_f64, 1.6).unwrap();
        assert!((q as f64 - q64).abs() < 1e-5);
        let m = kummer_m(1.0_f32, 1.0, -2.0).unwrap();
        assert!((m - (-2.0_f32).exp()).abs() < 1e-6);
    }
}
