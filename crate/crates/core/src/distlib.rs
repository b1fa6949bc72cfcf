//! Closed-form steady-state income density and its helpers.
//!
//! The stationary law of the income process is
//!
//! ```text
//! f(y) = C0^(M+1) / Γ(M+1) · exp(−C0 / y) · y^−(M+2),   y > 0
//! ```
//!
//! i.e. `C0 / y` is Gamma(M+1, 1) distributed. The CDF is therefore the
//! regularized upper incomplete gamma `Q(M+1, C0/y)` and the k-th moment is
//! `C0^k Γ(M+1−k) / Γ(M+1)` for `k < M+1`.
//!
//! `offset_ymin` (the starvation level) is carried along for callers that map
//! survey incomes to model incomes; nothing in this module applies it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special::{gamma_pq, lgamma};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateIpdf<T> {
    shape_m: T,
    scale_c0: T,
    offset_ymin: T,
}

/// A raw moment that may not exist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment<T> {
    Finite(T),
    Divergent,
}

impl<T: Copy> Moment<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Divergent => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, Moment::Divergent)
    }
}

impl<T: Scalar> SteadyStateIpdf<T> {
    pub fn new(shape_m: T, scale_c0: T, offset_ymin: T) -> Result<Self> {
        if !(shape_m > T::zero() && shape_m.is_finite()) {
            return Err(Error::params(format!("shape M must be positive and finite, got {shape_m}")));
        }
        if !(scale_c0 > T::zero() && scale_c0.is_finite()) {
            return Err(Error::params(format!("scale C0 must be positive and finite, got {scale_c0}")));
        }
        if !(offset_ymin >= T::zero() && offset_ymin.is_finite()) {
            return Err(Error::params(format!("offset must be non-negative, got {offset_ymin}")));
        }
        Ok(Self { shape_m, scale_c0, offset_ymin })
    }

    /// Same shape and scale, no offset.
    pub fn unshifted(shape_m: T, scale_c0: T) -> Result<Self> {
        Self::new(shape_m, scale_c0, T::zero())
    }

    /// Distribution with the given shape whose mean is `mean`.
    pub fn with_mean(shape_m: T, mean: T, offset_ymin: T) -> Result<Self> {
        Self::new(shape_m, shape_m * mean, offset_ymin)
    }

    pub fn shape_m(&self) -> T {
        self.shape_m
    }

    pub fn scale_c0(&self) -> T {
        self.scale_c0
    }

    pub fn offset_ymin(&self) -> T {
        self.offset_ymin
    }

    /// Exponent of the power-law tail of the density, `M + 2`.
    pub fn tail_exponent(&self) -> T {
        self.shape_m + T::lit(2.0)
    }

    fn log_norm(&self) -> T {
        let a = self.shape_m + T::one();
        a * self.scale_c0.ln() - lgamma(a).expect("M + 1 > 0")
    }

    fn check_y(y: T) -> Result<()> {
        if y > T::zero() && !y.is_nan() {
            Ok(())
        } else {
            Err(Error::domain(format!("income must be positive, got {y}")))
        }
    }

    pub fn ln_density(&self, y: T) -> Result<T> {
        Self::check_y(y)?;
        if y.is_infinite() {
            return Ok(T::neg_infinity());
        }
        Ok(self.log_norm() - self.scale_c0 / y - self.tail_exponent() * y.ln())
    }

    pub fn density(&self, y: T) -> Result<T> {
        self.ln_density(y).map(T::exp)
    }

    /// `P(Y ≤ y) = Q(M+1, C0/y)`.
    pub fn cdf(&self, y: T) -> Result<T> {
        Self::check_y(y)?;
        gamma_pq(self.shape_m + T::one(), self.scale_c0 / y).map(|(_, q)| q)
    }

    /// `P(Y > y) = P(M+1, C0/y)`, accurate deep in the tail.
    pub fn sf(&self, y: T) -> Result<T> {
        Self::check_y(y)?;
        gamma_pq(self.shape_m + T::one(), self.scale_c0 / y).map(|(p, _)| p)
    }

    /// `P(lo < Y ≤ hi)` for `0 ≤ lo < hi ≤ ∞`.
    pub fn interval_probability(&self, lo: T, hi: T) -> Result<T> {
        incgamma_band(self.shape_m + T::one(), self.scale_c0, lo, hi)
    }

    /// `∫_lo^hi y f(y) dy`, the unnormalized first moment over a band.
    ///
    /// `y f(y)` is `C0/M` times the density of the same family with shape
    /// `M − 1`, so this is again an incomplete-gamma difference.
    pub fn partial_first_moment(&self, lo: T, hi: T) -> Result<T> {
        Ok(self.scale_c0 / self.shape_m * incgamma_band(self.shape_m, self.scale_c0, lo, hi)?)
    }

    /// `C0 Γ(M) / Γ(M+1) = C0 / M`.
    pub fn mean(&self) -> T {
        self.scale_c0 / self.shape_m
    }

    /// Most likely income, `C0 / (M+2)`.
    pub fn mode(&self) -> T {
        self.scale_c0 / self.tail_exponent()
    }

    /// k-th raw moment `C0^k Γ(M+1−k) / Γ(M+1)`, divergent unless `k < M+1`.
    pub fn moment(&self, k: u32) -> Result<Moment<T>> {
        if k == 0 {
            return Err(Error::domain("moment order must be at least 1"));
        }
        let kf = T::from_u32(k).expect("u32 fits scalar");
        let a = self.shape_m + T::one();
        if kf >= a {
            return Ok(Moment::Divergent);
        }
        let ln = kf * self.scale_c0.ln() + lgamma(a - kf)? - lgamma(a)?;
        Ok(Moment::Finite(ln.exp()))
    }
}

/// `Q(a, c/hi) − Q(a, c/lo)` evaluated on whichever tail keeps both terms small.
fn incgamma_band<T: Scalar>(a: T, c: T, lo: T, hi: T) -> Result<T> {
    if lo.is_nan() || hi.is_nan() || lo < T::zero() || !(hi > lo) {
        return Err(Error::domain(format!("band needs 0 <= lo < hi, got [{lo}, {hi}]")));
    }
    let x_hi = if hi.is_infinite() { T::zero() } else { c / hi };
    let x_lo = if lo == T::zero() { T::infinity() } else { c / lo };
    let (p_hi, q_hi) = gamma_pq(a, x_hi)?;
    let (p_lo, q_lo) = gamma_pq(a, x_lo)?;
    let v = if q_hi < T::lit(0.5) { q_hi - q_lo } else { p_lo - p_hi };
    Ok(v.max(T::zero()))
}

impl<T> SteadyStateIpdf<T>
where
    T: Scalar,
    StandardNormal: Distribution<T>,
    Exp1: Distribution<T>,
    Open01: Distribution<T>,
{
    /// One draw, `C0 / G` with `G ~ Gamma(M+1, 1)`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let gamma = Gamma::new(self.shape_m + T::one(), T::one()).expect("validated shape");
        self.scale_c0 / gamma.sample(rng)
    }

    /// `n` i.i.d. draws, reproducible from `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gamma = Gamma::new(self.shape_m + T::one(), T::one()).expect("validated shape");
        (0..n).map(|_| self.scale_c0 / gamma.sample(&mut rng)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> SteadyStateIpdf<f64> {
        SteadyStateIpdf::unshifted(1.6, 1.6).unwrap()
    }

    #[test]
    fn rejects_bad_params() {
        assert!(SteadyStateIpdf::new(0.0, 1.0, 0.0).is_err());
        assert!(SteadyStateIpdf::new(1.0, -1.0, 0.0).is_err());
        assert!(SteadyStateIpdf::new(1.0, 1.0, -0.1).is_err());
        assert!(SteadyStateIpdf::new(f64::NAN, 1.0, 0.0).is_err());
    }

    #[test]
    fn domain_errors() {
        let d = reference();
        assert!(d.density(0.0).is_err());
        assert!(d.density(-1.0).is_err());
        assert!(d.cdf(0.0).is_err());
        assert!(d.interval_probability(2.0, 1.0).is_err());
    }

    #[test]
    fn mean_and_moment_flags() {
        let d = reference();
        assert!((d.mean() - 1.0).abs() < 1e-15);
        assert!(d.moment(2).unwrap().finite().is_some());
        assert!(d.moment(3).unwrap().is_divergent());
        assert!((d.moment(1).unwrap().finite().unwrap() - d.mean()).abs() < 1e-13);
        let d2 = SteadyStateIpdf::<f64>::unshifted(1.6, 2.0).unwrap();
        assert!((d2.mean() - 1.25).abs() < 1e-15);
        // variance C0^2 / (M^2 (M-1))
        let v = d.moment(2).unwrap().finite().unwrap() - 1.0;
        assert!((v - 1.6 * 1.6 / (1.6 * 1.6 * 0.6)).abs() < 1e-12);
    }

    #[test]
    fn mode_is_stationary_point_of_log_density() {
        let d = SteadyStateIpdf::<f64>::unshifted(2.3, 0.7).unwrap();
        let m = d.mode();
        let h = 1e-6 * m;
        let slope = (d.ln_density(m + h).unwrap() - d.ln_density(m - h).unwrap()) / (2.0 * h);
        assert!(slope.abs() < 1e-6);
        assert!(d.density(m).unwrap() > d.density(1.01 * m).unwrap());
        assert!(d.density(m).unwrap() > d.density(0.99 * m).unwrap());
    }

    #[test]
    fn cdf_limits_and_complement() {
        let d = reference();
        assert!(d.cdf(1e-3).unwrap() < 1e-300);
        assert!((d.cdf(1e12).unwrap() - 1.0).abs() < 1e-15);
        for &y in &[0.1, 0.6, 1.0, 3.0, 40.0] {
            assert!((d.cdf(y).unwrap() + d.sf(y).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn band_probabilities_sum_to_one() {
        let d = reference();
        let edges = [0.0, 0.3, 0.7, 1.0, 2.0, 5.0, 50.0, f64::INFINITY];
        let total: f64 = edges.windows(2).map(|w| d.interval_probability(w[0], w[1]).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-13);
        let first: f64 = edges.windows(2).map(|w| d.partial_first_moment(w[0], w[1]).unwrap()).sum();
        assert!((first - d.mean()).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = reference();
        assert_eq!(d.sample(100, 3), d.sample(100, 3));
        assert_ne!(d.sample(100, 3), d.sample(100, 4));
        assert!(d.sample(0, 3).is_empty());
        assert!(d.sample(1000, 1).iter().all(|&y| y > 0.0));
    }

    #[test]
    fn f32_density_tracks_f64() {
        let d32 = SteadyStateIpdf::<f32>::unshifted(1.6, 1.6).unwrap();
        let d64 = reference();
        for &y in &[0.3_f32, 1.0, 4.0] {
            let a = d32.density(y).unwrap() as f64;
            let b = d64.density(y as f64).unwrap();
            assert!(((a - b) / b).abs() < 1e-5);
        }
    }
}
