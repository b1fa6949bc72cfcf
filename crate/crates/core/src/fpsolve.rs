//! Fokker–Planck evolution of the income density and the transient
//! eigenmode expansion.
//!
//! The density obeys
//!
//! ```text
//! ∂f/∂t = ∂/∂y { [(M+2) y − C(t)] f + y² ∂f/∂y }
//! ```
//!
//! discretized by finite volumes on a log-spaced grid. The interface flux
//! uses Chang–Cooper weighting, so the scheme keeps densities non-negative and
//! reproduces the steady state to second order in the log spacing. Time
//! stepping is backward Euler on the whole operator (one tridiagonal solve
//! per step) with zero flux through both ends of the grid.

use serde::{Deserialize, Serialize};

use crate::distlib::SteadyStateIpdf;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special::kummer_m;

/// Default number of cells.
pub const DEFAULT_CELLS: usize = 2000;
/// Default grid span relative to the mean income `C0 / M`.
pub const DEFAULT_SPAN: (f64, f64) = (1e-3, 1e3);
/// Largest accepted `dt · (M + 2)`. Backward Euler is unconditionally stable;
/// this bounds the time-discretization error of the slow relaxation modes.
pub const MAX_RATE_STEP: f64 = 0.5;
/// Densities below this after a step abort the evolution.
pub const NEGATIVE_TOLERANCE: f64 = -1e-12;

/// Cell-centred log-spaced grid: `cells` cells with geometric edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogGrid<T> {
    edges: Vec<T>,
    centers: Vec<T>,
    widths: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> LogGrid<T> {
    pub fn new(lo: T, hi: T, cells: usize) -> Result<Self> {
        if !(lo > T::zero() && hi > lo && hi.is_finite()) {
            return Err(Error::params(format!("log grid needs 0 < lo < hi, got [{lo}, {hi}]")));
        }
        if cells < 3 {
            return Err(Error::params("log grid needs at least 3 cells"));
        }
        let (llo, lhi) = (lo.ln(), hi.ln());
        let step = (lhi - llo) / T::from_usize_lossy(cells);
        let mut edges: Vec<T> = (0..=cells).map(|i| (llo + step * T::from_usize_lossy(i)).exp()).collect();
        edges[0] = lo;
        edges[cells] = hi;
        let centers: Vec<T> = edges.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect();
        let widths = edges.windows(2).map(|w| w[1] - w[0]).collect();
        let weights = centers.iter().map(|&c| c * step).collect();
        Ok(Self { edges, centers, widths, weights })
    }

    /// Default grid for a steady state with shape `m` and scale `c0`.
    pub fn for_params(m: T, c0: T, cells: usize) -> Result<Self> {
        let mean = c0 / m;
        Self::new(T::lit(DEFAULT_SPAN.0) * mean, T::lit(DEFAULT_SPAN.1) * mean, cells)
    }

    pub fn cells(&self) -> usize {
        self.centers.len()
    }

    pub fn edges(&self) -> &[T] {
        &self.edges
    }

    pub fn centers(&self) -> &[T] {
        &self.centers
    }

    pub fn widths(&self) -> &[T] {
        &self.widths
    }

    /// Cell measures `y_i h`: the trapezoidal weights in `ln y`. The scheme
    /// conserves `Σ f_i y_i h`, and every mass, mean and L1 norm uses them.
    /// They differ from the widths by the constant factor `h / (2 sinh(h/2))`.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Spacing in `ln y`.
    pub fn log_step(&self) -> T {
        (self.centers[1] / self.centers[0]).ln()
    }
}

/// Density values at the cell centres of a [`LogGrid`] at time `time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity<T> {
    grid: LogGrid<T>,
    values: Vec<T>,
    time: T,
}

impl<T: Scalar> GridDensity<T> {
    pub fn new(grid: LogGrid<T>, values: Vec<T>, time: T) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::params(format!("{} values for {} cells", values.len(), grid.cells())));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= T::zero())) {
            return Err(Error::params("density values must be finite and non-negative"));
        }
        Ok(Self { grid, values, time })
    }

    pub fn from_fn<F: FnMut(T) -> T>(grid: LogGrid<T>, f: F) -> Result<Self> {
        let values = grid.centers.iter().copied().map(f).collect();
        Self::new(grid, values, T::zero())
    }

    /// Closed-form steady state sampled at the centres, rescaled to unit mass.
    pub fn steady_state(grid: LogGrid<T>, dist: &SteadyStateIpdf<T>) -> Result<Self> {
        let values = grid.centers.iter().map(|&y| dist.density(y)).collect::<Result<Vec<_>>>()?;
        Self::new(grid, values, T::zero())?.normalized()
    }

    /// Log-normal bump centred at `center` with log-width `log_width`, unit mass.
    pub fn bump(grid: LogGrid<T>, center: T, log_width: T) -> Result<Self> {
        let lc = center.ln();
        let half = T::lit(0.5);
        Self::from_fn(grid, |y| {
            let z = (y.ln() - lc) / log_width;
            (-half * z * z).exp() / y
        })?
        .normalized()
    }

    pub fn grid(&self) -> &LogGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn time(&self) -> T {
        self.time
    }

    /// Mass `Σ f_i y_i h`, the quantity the scheme conserves.
    pub fn mass(&self) -> T {
        self.values.iter().zip(&self.grid.weights).fold(T::zero(), |acc, (&f, &w)| acc + f * w)
    }

    /// Trapezoidal rule in `ln y` over the centres. It differs from
    /// [`mass`](Self::mass) only by half weights on the two end cells.
    pub fn trapezoid_mass(&self) -> T {
        let n = self.values.len();
        let g = |i: usize| self.values[i] * self.grid.weights[i];
        let half = T::lit(0.5);
        self.mass() - half * (g(0) + g(n - 1))
    }

    pub fn mean(&self) -> T {
        self.values
            .iter()
            .zip(&self.grid.weights)
            .zip(&self.grid.centers)
            .fold(T::zero(), |acc, ((&f, &w), &y)| acc + f * w * y)
    }

    pub fn normalized(mut self) -> Result<Self> {
        let mass = self.mass();
        if !(mass > T::zero()) {
            return Err(Error::numerical("cannot normalize a density with zero mass"));
        }
        for v in &mut self.values {
            *v = *v / mass;
        }
        Ok(self)
    }

    /// `Σ |f_i − g_i| y_i h` against another density on the same grid.
    pub fn l1_distance(&self, other: &GridDensity<T>) -> Result<T> {
        if self.grid != other.grid {
            return Err(Error::params("L1 distance needs identical grids"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(&self.grid.weights)
            .fold(T::zero(), |acc, ((&a, &b), &w)| acc + (a - b).abs() * w))
    }
}

/// Chang–Cooper weight `δ(w) = 1/w − 1/(e^w − 1)`.
fn chang_cooper_delta<T: Scalar>(w: T) -> T {
    if w.abs() < T::lit(1e-5) {
        T::lit(0.5) - w / T::lit(12.0)
    } else {
        T::one() / w - T::one() / w.exp_m1()
    }
}

/// Bernoulli function `w / (e^w − 1)`, positive for every finite `w`.
fn bernoulli<T: Scalar>(w: T) -> T {
    if w.abs() < T::lit(1e-5) {
        T::one() - T::lit(0.5) * w
    } else {
        w / w.exp_m1()
    }
}

/// Two-point interface fluxes `J_k = upper_k · f_{k+1} − lower_k · f_k`
/// for interfaces `k = 0 .. cells-2`, together with the advective and
/// diffusive magnitudes that make up each coefficient.
struct InterfaceStencil<T> {
    drift: Vec<T>,
    delta: Vec<T>,
    diff_over_h: Vec<T>,
    upper: Vec<T>,
    lower: Vec<T>,
}

impl<T: Scalar> InterfaceStencil<T> {
    fn new(grid: &LogGrid<T>, m: T, c: T) -> Self {
        let n = grid.cells();
        let mut drift = Vec::with_capacity(n - 1);
        let mut delta = Vec::with_capacity(n - 1);
        let mut diff_over_h = Vec::with_capacity(n - 1);
        let mut upper = Vec::with_capacity(n - 1);
        let mut lower = Vec::with_capacity(n - 1);
        let two = T::lit(2.0);
        for k in 0..n - 1 {
            let y = grid.edges[k + 1];
            let h = grid.centers[k + 1] - grid.centers[k];
            let b = (m + two) * y - c;
            let d = y * y;
            let w = h * b / d;
            drift.push(b);
            delta.push(chang_cooper_delta(w));
            diff_over_h.push(d / h);
            // B(1−δ) + D/h and D/h − Bδ, written without cancellation
            upper.push(d / h * bernoulli(-w));
            lower.push(d / h * bernoulli(w));
        }
        Self { drift, delta, diff_over_h, upper, lower }
    }

    #[inline]
    fn upper(&self, k: usize) -> T {
        self.upper[k]
    }

    #[inline]
    fn lower(&self, k: usize) -> T {
        self.lower[k]
    }

    /// `(L f)_i = (J_{i+1/2} − J_{i−1/2}) / Δy_i` with zero boundary flux.
    fn apply(&self, grid: &LogGrid<T>, f: &[T]) -> Vec<T> {
        let n = f.len();
        let flux: Vec<T> = (0..n - 1).map(|k| self.upper(k) * f[k + 1] - self.lower(k) * f[k]).collect();
        (0..n)
            .map(|i| {
                let right = if i + 1 < n { flux[i] } else { T::zero() };
                let left = if i > 0 { flux[i - 1] } else { T::zero() };
                (right - left) / grid.weights[i]
            })
            .collect()
    }
}

/// Solves a tridiagonal system in place (Thomas algorithm); `rhs` becomes the solution.
fn solve_tridiagonal<T: Scalar>(sub: &[T], diag: &[T], sup: &[T], rhs: &mut [T], scratch: &mut [T]) -> Result<()> {
    let n = diag.len();
    let mut beta = diag[0];
    if beta == T::zero() {
        return Err(Error::numerical("singular tridiagonal system"));
    }
    rhs[0] = rhs[0] / beta;
    for i in 1..n {
        scratch[i] = sup[i - 1] / beta;
        beta = diag[i] - sub[i] * scratch[i];
        if beta == T::zero() {
            return Err(Error::numerical("singular tridiagonal system"));
        }
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] = rhs[i] - scratch[i + 1] * next;
    }
    Ok(())
}

/// Result of [`evolve`].
#[derive(Debug, Clone)]
pub struct Evolution<T> {
    pub final_state: GridDensity<T>,
    /// States at the requested multiples of the step, starting with `f0`.
    pub snapshots: Vec<GridDensity<T>>,
    /// Largest |mass − initial mass| seen over the run.
    pub max_mass_drift: T,
    pub steps: usize,
}

/// Backward-Euler evolution of `f0` to `t_end` with step `dt`.
///
/// `labour_rate(t)` is evaluated at the end of each step. A snapshot is
/// recorded every `snapshot_every` steps (and at the end) when it is nonzero.
pub fn evolve<T: Scalar, C: Fn(T) -> T>(
    f0: &GridDensity<T>,
    m: T,
    labour_rate: C,
    t_end: T,
    dt: T,
    snapshot_every: usize,
) -> Result<Evolution<T>> {
    if !(m > T::zero()) {
        return Err(Error::params(format!("M must be positive, got {m}")));
    }
    if !(dt > T::zero() && t_end >= f0.time) {
        return Err(Error::params("need dt > 0 and t_end >= initial time"));
    }
    let rate_step = dt * (m + T::lit(2.0));
    if rate_step > T::lit(MAX_RATE_STEP) {
        let suggested = T::lit(MAX_RATE_STEP) / (m + T::lit(2.0));
        return Err(Error::params(format!(
            "time step too large: dt·(M+2) = {rate_step:.3} exceeds {MAX_RATE_STEP}; use dt <= {suggested:.3e}"
        )));
    }
    let mass0 = f0.mass();
    if (mass0 - T::one()).abs() > T::lit(1e-6) {
        return Err(Error::params(format!("initial density must be normalized, mass = {mass0}")));
    }
    let grid = &f0.grid;
    let n = grid.cells();
    let n_steps = ((t_end - f0.time) / dt).ceil().to_usize().unwrap_or(0);
    let mut f = f0.values.clone();
    let mut time = f0.time;
    let (mut sub, mut diag, mut sup) = (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]);
    let mut scratch = vec![T::zero(); n];
    let mut snapshots = Vec::new();
    if snapshot_every > 0 {
        snapshots.push(f0.clone());
    }
    let mut max_mass_drift = T::zero();
    let mut stencil_cache: Option<(T, InterfaceStencil<T>)> = None;

    for step in 0..n_steps {
        let h = if step + 1 == n_steps { t_end - time } else { dt };
        let t_next = if step + 1 == n_steps { t_end } else { time + dt };
        let c = labour_rate(t_next);
        if !(c > T::zero()) {
            return Err(Error::params(format!("C(t) must be positive, got {c} at t = {t_next}")));
        }
        let stencil = match stencil_cache.take() {
            Some((cached_c, s)) if cached_c == c => s,
            _ => InterfaceStencil::new(grid, m, c),
        };
        for i in 0..n {
            let r = h / grid.weights[i];
            let mut d = T::one();
            if i + 1 < n {
                d = d + r * stencil.lower(i);
                sup[i] = -r * stencil.upper(i);
            }
            if i > 0 {
                d = d + r * stencil.upper(i - 1);
                sub[i] = -r * stencil.lower(i - 1);
            }
            diag[i] = d;
        }
        solve_tridiagonal(&sub, &diag, &sup, &mut f, &mut scratch)?;
        if let Some((i, v)) = f.iter().enumerate().find(|(_, v)| **v < T::lit(NEGATIVE_TOLERANCE) || !v.is_finite()) {
            return Err(Error::numerical(format!("density at cell {i} became {v} at t = {t_next}")));
        }
        for v in &mut f {
            *v = v.max(T::zero());
        }
        time = t_next;
        let mass = f.iter().zip(&grid.weights).fold(T::zero(), |acc, (&v, &w)| acc + v * w);
        max_mass_drift = max_mass_drift.max((mass - mass0).abs());
        stencil_cache = Some((c, stencil));
        if snapshot_every > 0 && ((step + 1) % snapshot_every == 0 || step + 1 == n_steps) {
            snapshots.push(GridDensity { grid: grid.clone(), values: f.clone(), time });
        }
    }
    let final_state = GridDensity { grid: grid.clone(), values: f, time };
    Ok(Evolution { final_state, snapshots, max_mass_drift, steps: n_steps })
}

/// Exact zero-flux state of the discrete operator at constant `c`, unit mass.
///
/// `J_k = 0` gives `f_{k+1} / f_k = lower_k / upper_k = e^{−w_k}` with
/// `w_k = h_k B_k / D_k`, accumulated in logs to avoid overflow.
pub fn discrete_steady_state<T: Scalar>(grid: &LogGrid<T>, m: T, c: T) -> Result<GridDensity<T>> {
    if !(m > T::zero() && c > T::zero()) {
        return Err(Error::params(format!("need M > 0 and C > 0, got M = {m}, C = {c}")));
    }
    let n = grid.cells();
    let two = T::lit(2.0);
    let mut ln_f = Vec::with_capacity(n);
    ln_f.push(T::zero());
    for k in 0..n - 1 {
        let y = grid.edges[k + 1];
        let h = grid.centers[k + 1] - grid.centers[k];
        let w = h * ((m + two) * y - c) / (y * y);
        ln_f.push(ln_f[k] - w);
    }
    let top = ln_f.iter().copied().fold(T::neg_infinity(), T::max);
    let values = ln_f.into_iter().map(|l| (l - top).exp()).collect();
    GridDensity::new(grid.clone(), values, T::zero())?.normalized()
}

/// Applies the discrete Fokker–Planck operator at constant `c` to point values
/// on the grid centres.
pub fn apply_operator<T: Scalar>(grid: &LogGrid<T>, m: T, c: T, values: &[T]) -> Result<Vec<T>> {
    if values.len() != grid.cells() {
        return Err(Error::params("operator input length does not match grid"));
    }
    Ok(InterfaceStencil::new(grid, m, c).apply(grid, values))
}

/// Sup-norm of the discrete flux evaluated on the closed-form steady state,
/// relative to the largest sum of advective and diffusive flux magnitudes.
pub fn steady_state_residual<T: Scalar>(m: T, c0: T, grid: &LogGrid<T>) -> Result<T> {
    let dist = SteadyStateIpdf::unshifted(m, c0)?;
    let f = grid.centers.iter().map(|&y| dist.density(y)).collect::<Result<Vec<_>>>()?;
    Ok(flux_residual(grid, m, c0, &f))
}

/// Same measure as [`steady_state_residual`] for arbitrary point values.
pub fn flux_residual<T: Scalar>(grid: &LogGrid<T>, m: T, c: T, f: &[T]) -> T {
    let s = InterfaceStencil::new(grid, m, c);
    let mut worst = T::zero();
    let mut scale = T::zero();
    for k in 0..f.len() - 1 {
        let advective = s.drift[k] * ((T::one() - s.delta[k]) * f[k + 1] + s.delta[k] * f[k]);
        let diffusive = s.diff_over_h[k] * (f[k + 1] - f[k]);
        worst = worst.max((advective + diffusive).abs());
        scale = scale.max(advective.abs() + diffusive.abs());
    }
    if scale > T::zero() {
        worst / scale
    } else {
        T::zero()
    }
}

/// One term `g_n(y)` of the transient expansion.
///
/// ```text
/// g_n(y) = A1 (c/y)^α− M(α−, β−, −c/y) + A2 (c/y)^α+ M(α+, β+, −c/y)
/// α± = (3 + M ± √((1+M)² + 4ωn)) / 2,   β± = 1 ± √((1+M)² + 4ωn),   ωn = 2πn
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenMode<T> {
    pub n: u32,
    pub omega: T,
    pub alpha_plus: T,
    pub alpha_minus: T,
    pub beta_plus: T,
    pub beta_minus: T,
    pub a1: T,
    pub a2: T,
    pub c: T,
}

/// Exponents of mode `n` for shape `m`; coefficients start at zero and `c` at one.
pub fn eigenmode_params<T: Scalar>(n: u32, m: T) -> Result<EigenMode<T>> {
    if !(m > T::zero()) {
        return Err(Error::params(format!("M must be positive, got {m}")));
    }
    let omega = T::lit(2.0) * T::PI() * T::from_u32(n).expect("u32 fits scalar");
    let one_m = T::one() + m;
    let root = (one_m * one_m + T::lit(4.0) * omega).sqrt();
    let three_m = T::lit(3.0) + m;
    let half = T::lit(0.5);
    Ok(EigenMode {
        n,
        omega,
        // β+ − α+ = (root − 1 − M)/2 is formed directly so that it is exactly
        // zero for n = 0; M(α, β, −x) is evaluated through M(β − α, β, x) and
        // rounding in that difference would be amplified by e^x.
        alpha_plus: T::one() + root - half * (root - one_m),
        alpha_minus: half * (three_m - root),
        beta_plus: T::one() + root,
        beta_minus: T::one() - root,
        a1: T::zero(),
        a2: T::zero(),
        c: T::one(),
    })
}

impl<T: Scalar> EigenMode<T> {
    pub fn with_coefficients(mut self, a1: T, a2: T, c: T) -> Result<Self> {
        if !(c > T::zero()) {
            return Err(Error::params(format!("scale c must be positive, got {c}")));
        }
        self.a1 = a1;
        self.a2 = a2;
        self.c = c;
        Ok(self)
    }

    /// `β−` is a non-positive integer, where the `A1` branch has a series pole.
    pub fn minus_branch_pole(&self) -> bool {
        self.beta_minus <= T::zero() && self.beta_minus == self.beta_minus.round()
    }

    /// Time factor `exp(−ωn t)`.
    pub fn decay(&self, t: T) -> T {
        (-self.omega * t).exp()
    }

    pub fn eval(&self, y: T) -> Result<T> {
        if !(y > T::zero()) {
            return Err(Error::domain(format!("eigenmode needs y > 0, got {y}")));
        }
        let x = self.c / y;
        let mut total = T::zero();
        if self.a1 != T::zero() {
            if self.minus_branch_pole() {
                return Err(Error::Pole(format!(
                    "β− = {} is a non-positive integer for n = {}",
                    self.beta_minus, self.n
                )));
            }
            total = total + self.a1 * x.powf(self.alpha_minus) * kummer_m(self.alpha_minus, self.beta_minus, -x)?;
        }
        if self.a2 != T::zero() {
            total = total + self.a2 * x.powf(self.alpha_plus) * kummer_m(self.alpha_plus, self.beta_plus, -x)?;
        }
        Ok(total)
    }
}

/// Relative residual of a mode as a decaying eigenfunction, `L g = −ω g`.
///
/// For `ω > 0` this is [`eigenvalue_residual`] at `λ = −ω`; for `ω = 0` it is
/// the flux measure of [`flux_residual`].
pub fn eigenmode_operator_residual<T: Scalar>(mode: &EigenMode<T>, m: T, grid: &LogGrid<T>) -> Result<T> {
    if mode.omega == T::zero() {
        let g = grid.centers.iter().map(|&y| mode.eval(y)).collect::<Result<Vec<_>>>()?;
        return Ok(flux_residual(grid, m, mode.c, &g));
    }
    eigenvalue_residual(mode, m, grid, -mode.omega)
}

/// `max |L g − λ g| / max |λ g|` over interior cells; the two boundary cells
/// carry the no-flux closure, which the modes do not obey.
pub fn eigenvalue_residual<T: Scalar>(mode: &EigenMode<T>, m: T, grid: &LogGrid<T>, lambda: T) -> Result<T> {
    let g = grid.centers.iter().map(|&y| mode.eval(y)).collect::<Result<Vec<_>>>()?;
    let lg = apply_operator(grid, m, mode.c, &g)?;
    let mut num = T::zero();
    let mut den = T::zero();
    for k in 1..g.len() - 1 {
        num = num.max((lg[k] - lambda * g[k]).abs());
        den = den.max((lambda * g[k]).abs());
    }
    Ok(if den > T::zero() { num / den } else { num })
}
