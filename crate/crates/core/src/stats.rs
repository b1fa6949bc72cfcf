//! Sample statistics shared by the simulator, the CLI and the tests.

use crate::error::{Error, Result};

/// Kolmogorov–Smirnov distance between the empirical CDF of `sample` and `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d.max((f - lo).abs()).max((hi - f).abs())
    })
}

/// Sample mean and its standard error.
pub fn mean_and_standard_error(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Hill estimate of the density tail exponent over the largest
/// `tail_fraction` of the sample.
///
/// With `k` order statistics `x(1) ≥ … ≥ x(k+1)` the CDF-tail index is
/// `k / Σ ln(x(i) / x(k+1))`; the density exponent is that plus one.
pub fn hill_tail_exponent(incomes: &[f64], tail_fraction: f64) -> Result<f64> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(Error::domain(format!("tail fraction must lie in (0, 1), got {tail_fraction}")));
    }
    let k = (incomes.len() as f64 * tail_fraction).floor() as usize;
    if k < 100 {
        return Err(Error::domain(format!(
            "Hill estimator needs at least 100 tail samples, got {k} from n = {}",
            incomes.len()
        )));
    }
    if incomes.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::domain("Hill estimator needs positive finite values"));
    }
    let mut v = incomes.to_vec();
    // largest k+1 values to the front, descending
    v.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
    let threshold = v[k];
    let sum: f64 = v[..k].iter().map(|&x| (x / threshold).ln()).sum();
    if !(sum > 0.0) {
        return Err(Error::numerical("degenerate tail: all top values equal"));
    }
    Ok(k as f64 / sum + 1.0)
}
