//! Parameter estimation from banded rounds: the steady-state IPDF by binned
//! maximum likelihood and the Monod cereal-consumption curve by least squares.

use serde::{Deserialize, Serialize};

use crate::distlib::SteadyStateIpdf;
use crate::error::{Error, Result};
use crate::labour::LabourRate;
use crate::report::Table;
use crate::survey::{band_probabilities, BandedDistribution, DEFAULT_OFFSET};

/// Shape values seeding the multi-start simplex search.
pub const START_SHAPES: [f64; 5] = [0.8, 1.2, 1.6, 2.2, 3.0];
/// Evaluation cap per start.
pub const MAX_EVALUATIONS: usize = 10_000;
/// Simplex diameter (in log-parameter space) that counts as converged.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// How the scale `C0` is determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleMode {
    /// `M` and `C0` are both free.
    Joint,
    /// `C0 = M · (mean − offset)`: only the shape is fitted, the scale follows
    /// from the round's estimated mean.
    MeanAnchored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// `Some(offset)` holds the starvation offset fixed; `None` fits it.
    pub offset: Option<f64>,
    pub scale: ScaleMode,
    pub max_evaluations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { offset: Some(DEFAULT_OFFSET), scale: ScaleMode::Joint, max_evaluations: MAX_EVALUATIONS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub m: f64,
    pub c0: f64,
    pub offset: f64,
    /// `Σ share_b ln P_b`, the per-person log-likelihood.
    pub log_likelihood: f64,
    pub converged: bool,
    pub n_evaluations: usize,
    pub per_band_expected_shares: Vec<f64>,
    pub observed_shares: Vec<f64>,
    pub scale_mode: ScaleMode,
    pub offset_fitted: bool,
}

impl FitResult {
    pub fn distribution(&self) -> Result<SteadyStateIpdf<f64>> {
        SteadyStateIpdf::new(self.m, self.c0, self.offset)
    }

    /// The same fit expressed in monetary units multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Self {
        Self { c0: self.c0 * factor, offset: self.offset * factor, ..self.clone() }
    }

    /// Expected against observed shares, one row per band.
    pub fn share_table(&self, round: &BandedDistribution) -> Table {
        let mut t = Table::new(&["band_lower", "band_upper", "observed_share", "expected_share"]);
        for (b, e) in round.bands().iter().zip(&self.per_band_expected_shares) {
            t.push_nums(&[b.lower, b.upper_or_inf(), b.population_share, *e]);
        }
        t
    }
}

/// `Σ share_b ln P_b(M, C0, offset)`; `−∞` when a populated band has zero
/// model probability. The outer bands absorb the tails.
pub fn log_likelihood(round: &BandedDistribution, m: f64, c0: f64, offset: f64) -> Result<f64> {
    let dist = SteadyStateIpdf::new(m, c0, offset)?;
    let probs = band_probabilities(&dist, &round.edges())?;
    Ok(binned_ll(&round.shares(), &probs))
}

fn binned_ll(shares: &[f64], probs: &[f64]) -> f64 {
    shares.iter().zip(probs).fold(0.0, |acc, (&s, &p)| {
        if s == 0.0 {
            acc
        } else if p > 0.0 {
            acc + s * p.ln()
        } else {
            f64::NEG_INFINITY
        }
    })
}

/// Minimization result of [`nelder_mead`].
#[derive(Debug, Clone)]
pub struct Simplex {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder–Mead downhill simplex started from `x0` with per-axis `steps`.
/// Converged when the largest vertex distance from the best vertex drops
/// below `tol`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], steps: &[f64], tol: f64, max_evals: usize) -> Simplex {
    let n = x0.len();
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut evals = 0;
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += steps[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p, &mut evals)).collect();
    let diameter = |pts: &[Vec<f64>]| {
        pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    };
    let mut converged = false;
    loop {
        // sort ascending; stable so equal values keep their order
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = idx.iter().map(|&i| pts[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        if vals[0].is_finite() && diameter(&pts) < tol {
            converged = true;
            break;
        }
        if evals >= max_evals {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&pts[n]).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let x = along(0.5);
                let v = eval(&x, &mut evals);
                (x, v)
            } else {
                let x = along(-0.5);
                let v = eval(&x, &mut evals);
                (x, v)
            };
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                // shrink toward the best vertex
                for i in 1..=n {
                    let p: Vec<f64> = pts[i].iter().zip(&pts[0]).map(|(x, b)| b + 0.5 * (x - b)).collect();
                    vals[i] = eval(&p, &mut evals);
                    pts[i] = p;
                }
            }
        }
    }
    Simplex { x: pts[0].clone(), value: vals[0], evaluations: evals, converged }
}

/// Fits the steady state to a round by binned maximum likelihood, with
/// simplex descent from each of [`START_SHAPES`].
///
/// Monetary fields should already be deflated and collapsed. Shape and
/// scale are searched in log space; a free offset is searched directly.
pub fn fit_ipdf(round: &BandedDistribution, opts: &FitOptions) -> Result<FitResult> {
    let nb = round.bands().len();
    if nb < 4 {
        return Err(Error::validation(format!(
            "round {}: {nb} bands cannot identify the distribution (need at least 4)",
            round.round_id()
        )));
    }
    if let Some(o) = opts.offset {
        if !(o >= 0.0 && o.is_finite()) {
            return Err(Error::params(format!("offset must be non-negative, got {o}")));
        }
    }
    let shares = round.shares();
    let edges = round.edges();
    let mean = round.estimated_mean()?;
    let offset0 = opts.offset.unwrap_or(DEFAULT_OFFSET.min(0.5 * mean));
    if !(mean - offset0 > 0.0) {
        return Err(Error::validation(format!(
            "round {}: estimated mean {mean} does not exceed the offset {offset0}",
            round.round_id()
        )));
    }

    // parameter vector: [ln M, (ln C0 if joint), (offset if free)]
    let joint = opts.scale == ScaleMode::Joint;
    let unpack = |x: &[f64]| -> (f64, f64, f64) {
        let m = x[0].exp();
        let mut k = 1;
        let c0_ln = if joint {
            k += 1;
            Some(x[1])
        } else {
            None
        };
        let o = match opts.offset {
            Some(o) => o,
            None => x[k],
        };
        let c0 = c0_ln.map_or(m * (mean - o), f64::exp);
        (m, c0, o)
    };
    let objective = |x: &[f64]| -> f64 {
        let (m, c0, o) = unpack(x);
        if !(o >= 0.0 && c0 > 0.0 && m.is_finite() && c0.is_finite()) {
            return f64::INFINITY;
        }
        match SteadyStateIpdf::new(m, c0, o).and_then(|d| band_probabilities(&d, &edges)) {
            Ok(p) => -binned_ll(&shares, &p),
            Err(_) => f64::INFINITY,
        }
    };

    let mut best: Option<(Simplex, f64)> = None;
    let mut total_evals = 0;
    for &m0 in &START_SHAPES {
        let mut x0 = vec![m0.ln()];
        let mut steps = vec![0.1];
        if joint {
            x0.push((m0 * (mean - offset0)).ln());
            steps.push(0.1);
        }
        if opts.offset.is_none() {
            x0.push(offset0);
            steps.push(0.1 * offset0.max(0.05 * mean));
        }
        let s = nelder_mead(&objective, &x0, &steps, SIMPLEX_TOL, opts.max_evaluations);
        total_evals += s.evaluations;
        let m = s.x[0].exp();
        let better = match &best {
            None => true,
            Some((b, bm)) => s.value < b.value || (s.value == b.value && m < *bm),
        };
        if better {
            best = Some((s, m));
        }
    }
    let (s, _) = best.expect("at least one start");
    if !s.value.is_finite() {
        return Err(Error::numerical(format!(
            "round {}: no parameter set gives every populated band positive probability",
            round.round_id()
        )));
    }
    if !s.converged {
        log::warn!("round {}: simplex search did not converge in {} evaluations", round.round_id(), opts.max_evaluations);
    }
    let (m, c0, offset) = unpack(&s.x);
    let dist = SteadyStateIpdf::new(m, c0, offset)?;
    let expected = band_probabilities(&dist, &edges)?;
    Ok(FitResult {
        m,
        c0,
        offset,
        log_likelihood: -s.value,
        converged: s.converged,
        n_evaluations: total_evals,
        per_band_expected_shares: expected,
        observed_shares: shares,
        scale_mode: opts.scale,
        offset_fitted: opts.offset.is_none(),
    })
}

/// Least-squares fit of `s = V ȳ / (K + ȳ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonodFit {
    pub v: f64,
    pub k: f64,
    pub rss: f64,
    /// `K` ended on an edge of the search interval.
    pub at_boundary: bool,
}

impl MonodFit {
    pub fn new(v: f64, k: f64) -> Result<Self> {
        if !(v > 0.0 && k > 0.0 && v.is_finite() && k.is_finite()) {
            return Err(Error::params(format!("Monod parameters must be positive, got V = {v}, K = {k}")));
        }
        Ok(Self { v, k, rss: 0.0, at_boundary: false })
    }

    /// Consumption `V y / (K + y)`.
    pub fn consumption(&self, y: f64) -> f64 {
        self.v * y / (self.k + y)
    }

    /// Deprivation `V K / (K + y)`.
    pub fn deprivation(&self, y: f64) -> f64 {
        self.v * self.k / (self.k + y)
    }
}

/// Residual sum of squares at `k` with `V` profiled out; returns `(V, rss)`.
pub fn monod_profile(incomes: &[f64], consumption: &[f64], k: f64) -> (f64, f64) {
    let (mut sp, mut pp) = (0.0, 0.0);
    for (&y, &s) in incomes.iter().zip(consumption) {
        let phi = y / (k + y);
        sp += s * phi;
        pp += phi * phi;
    }
    let v = sp / pp;
    let rss = incomes.iter().zip(consumption).map(|(&y, &s)| (s - v * y / (k + y)).powi(2)).sum();
    (v, rss)
}

const GOLDEN_TOL: f64 = 1e-13;
const BOUNDARY_TOL: f64 = 1e-6;

/// Golden-section search on `ln K` over `[min ȳ / 10, 10 max ȳ]` with `V`
/// solved in closed form at each `K`.
pub fn fit_monod_points(incomes: &[f64], consumption: &[f64]) -> Result<MonodFit> {
    if incomes.len() != consumption.len() {
        return Err(Error::params("incomes and consumption differ in length"));
    }
    if incomes.len() < 3 {
        return Err(Error::validation(format!("Monod fit needs at least 3 bands, got {}", incomes.len())));
    }
    if incomes.iter().any(|&y| !(y > 0.0 && y.is_finite())) {
        return Err(Error::validation("Monod fit needs positive band incomes"));
    }
    if consumption.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
        return Err(Error::validation("Monod fit needs non-negative consumption"));
    }
    let lo_y = incomes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_y = incomes.iter().copied().fold(0.0, f64::max);
    let (lo, hi) = ((lo_y / 10.0).ln(), (hi_y * 10.0).ln());
    let rss = |lk: f64| monod_profile(incomes, consumption, lk.exp()).1;

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (rss(c), rss(d));
    while b - a > GOLDEN_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = rss(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = rss(d);
        }
    }
    let mut lk = 0.5 * (a + b);
    // the interior search cannot land exactly on an edge; compare with both
    for edge in [lo, hi] {
        if rss(edge) < rss(lk) {
            lk = edge;
        }
    }
    let k = lk.exp();
    let (v, r) = monod_profile(incomes, consumption, k);
    if !(v > 0.0) {
        return Err(Error::numerical("Monod fit found no positive saturation level"));
    }
    let at_boundary = (lk - lo).abs() < BOUNDARY_TOL || (hi - lk).abs() < BOUNDARY_TOL;
    if at_boundary {
        log::warn!("Monod K = {k} at the search boundary");
    }
    Ok(MonodFit { v, k, rss: r, at_boundary })
}

/// Monod fit on a round's representative incomes and cereal expenditure.
pub fn fit_monod(round: &BandedDistribution) -> Result<MonodFit> {
    let cereal = round.cereal()?;
    let incomes = round.representative_incomes()?;
    fit_monod_points(&incomes, &cereal).map_err(|e| match e {
        Error::Validation(m) => Error::validation(format!("round {}: {m}", round.round_id())),
        other => other,
    })
}

/// Quasi-static labour rate `C(t) = M · mean(t)` through `(year, model mean)`
/// points, linear in between.
pub fn labour_rate_series(points: &[(f64, f64)], m: f64) -> Result<LabourRate> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::params(format!("M must be positive, got {m}")));
    }
    match points.len() {
        0 => Err(Error::params("labour rate series needs at least one round")),
        1 => {
            log::warn!("single round: labour rate is constant");
            LabourRate::constant(m * points[0].1)
        }
        _ => {
            let mut knots: Vec<(f64, f64)> = points.iter().map(|&(t, mean)| (t, m * mean)).collect();
            knots.sort_by(|a, b| a.0.total_cmp(&b.0));
            LabourRate::from_knots(knots)
        }
    }
}
