//! Poverty indices: the FGT family at a fixed line, and the consumption
//! deprivation index built on the Monod curve `CD(y) = V K / (K + y)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distlib::SteadyStateIpdf;
use crate::error::{Error, Result};
use crate::estimate::{FitResult, MonodFit};
use crate::fpsolve::GridDensity;
use crate::labour::LabourRate;
use crate::quadrature::{integrate, integrate_to_infinity};
use crate::report::{Cell, Table};
use crate::special::lgamma;
use crate::survey::{empirical_distribution, BandedDistribution};

/// Strictness margin for the axiom checks.
pub const AXIOM_TOL: f64 = 1e-12;
/// Largest tolerated |mass − 1| of a density handed to [`cd_index_model`].
pub const MASS_TOL: f64 = 1e-6;
pub const INDEX_SERIES_HEADER: [&str; 7] = ["round_id", "year", "hci", "pg", "spg", "pcd_direct", "pcd_model"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PovertyLine {
    z: f64,
}

impl PovertyLine {
    pub fn new(z: f64) -> Result<Self> {
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::domain(format!("poverty line must be positive, got {z}")));
        }
        Ok(Self { z })
    }

    pub fn z(&self) -> f64 {
        self.z
    }
}

/// Headcount, poverty gap and squared poverty gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FgtIndices {
    pub hci: f64,
    pub pg: f64,
    pub spg: f64,
}

/// FGT indices of a discrete income sample.
pub fn fgt_sample(incomes: &[f64], line: PovertyLine) -> Result<FgtIndices> {
    if incomes.is_empty() {
        return Err(Error::domain("empty income sample"));
    }
    let z = line.z;
    let (mut h, mut g1, mut g2) = (0.0, 0.0, 0.0);
    for &y in incomes {
        if y < z {
            let g = (z - y) / z;
            h += 1.0;
            g1 += g;
            g2 += g * g;
        }
    }
    let n = incomes.len() as f64;
    Ok(FgtIndices { hci: h / n, pg: g1 / n, spg: g2 / n })
}

/// FGT indices of a round with uniform density inside each closed band and
/// the Pareto tail in the open band.
pub fn fgt_banded(round: &BandedDistribution, line: PovertyLine) -> Result<FgtIndices> {
    let emp = empirical_distribution(round)?;
    let z = line.z;
    let g = |y: f64| (z - y) / z;
    let mut acc = [0.0; 3];
    for p in emp.pieces() {
        if z <= p.lower || p.share == 0.0 {
            continue;
        }
        let b = p.upper.min(z);
        let dens = p.share / (p.upper - p.lower);
        for (k, a) in acc.iter_mut().enumerate() {
            let e = (k + 1) as i32;
            *a += dens * z / e as f64 * (g(p.lower).powi(e) - g(b).powi(e));
        }
    }
    if let Some(t) = emp.tail() {
        if z > t.lower && t.share > 0.0 {
            acc[0] += t.share - t.sf(z);
            for (k, a) in acc.iter_mut().enumerate().skip(1) {
                *a += integrate(|y| g(y).powi(k as i32) * t.density(y), t.lower, z, 1e-14, 1e-12)?.value;
            }
        }
    }
    Ok(FgtIndices { hci: acc[0], pg: acc[1], spg: acc[2] })
}

/// `Σ share_b · max(0, V − s_b)` with observed cereal expenditure `s_b`.
pub fn cd_index_direct(round: &BandedDistribution, monod: &MonodFit) -> Result<f64> {
    let cereal = round.cereal()?;
    Ok(round.bands().iter().zip(cereal).map(|(b, s)| b.population_share * (monod.v - s).max(0.0)).sum())
}

/// Density the model CD index integrates against.
#[derive(Debug, Clone, Copy)]
pub enum ModelDensity<'a> {
    /// Closed-form steady state; its offset maps model to survey income.
    Steady(&'a SteadyStateIpdf<f64>),
    /// Numerical density over model income, with the offset to apply.
    Grid { density: &'a GridDensity<f64>, offset: f64 },
    /// Banded round, concentrated at the representative band incomes.
    Banded(&'a BandedDistribution),
}

/// `∫ V K / (K + offset + y) f(y) dy` over model income `y`.
///
/// `K` is a survey-income quantity, so in model coordinates the curve reads
/// `V K / ((K + offset) + y)`.
pub fn cd_index_model(density: ModelDensity<'_>, monod: &MonodFit) -> Result<f64> {
    let (v, k) = (monod.v, monod.k);
    if !(v > 0.0 && k > 0.0) {
        return Err(Error::params(format!("Monod parameters must be positive, got V = {v}, K = {k}")));
    }
    match density {
        ModelDensity::Steady(d) => {
            // u = C0 / y turns f(y) dy into the Gamma(M+1) density
            let (m, c0, kk) = (d.shape_m(), d.scale_c0(), k + d.offset_ymin());
            let ln_norm = lgamma(m + 1.0)?;
            let integrand = |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let pdf = (m * u.ln() - u - ln_norm).exp();
                v * k * u / (kk * u + c0) * pdf
            };
            let split = m + 1.0;
            let head = integrate(integrand, 0.0, split, 1e-9, 1e-12)?;
            let tail = integrate_to_infinity(integrand, split, 1e-9, 1e-12)?;
            Ok(head.value + tail.value)
        }
        ModelDensity::Grid { density, offset } => {
            let mass = density.mass();
            if (mass - 1.0).abs() > MASS_TOL {
                return Err(Error::params(format!("density mass {mass} is not normalized")));
            }
            let g = density.grid();
            Ok(density
                .values()
                .iter()
                .zip(g.weights())
                .zip(g.centers())
                .map(|((&f, &w), &y)| f * w * v * k / (k + offset + y))
                .sum())
        }
        ModelDensity::Banded(round) => {
            let reps = round.representative_incomes()?;
            Ok(round.bands().iter().zip(reps).map(|(b, y)| b.population_share * monod.deprivation(y)).sum())
        }
    }
}

/// One row of an [`IndexSeries`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub round_id: String,
    pub year: f64,
    pub hci: f64,
    pub pg: f64,
    pub spg: f64,
    pub pcd_direct: f64,
    pub pcd_model: f64,
}

/// Parameters behind one row, plus the `V`-normalized CD values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundDiagnostics {
    pub round_id: String,
    pub m: f64,
    pub c0: f64,
    pub offset: f64,
    pub fit_converged: bool,
    pub v: f64,
    pub k: f64,
    pub monod_rss: f64,
    pub monod_at_boundary: bool,
    pub pcd_direct_normalized: f64,
    pub pcd_model_normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSeries {
    pub poverty_line: f64,
    pub rows: Vec<IndexRow>,
    pub diagnostics: Vec<RoundDiagnostics>,
}

impl IndexSeries {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&INDEX_SERIES_HEADER);
        for r in &self.rows {
            t.push(vec![
                Cell::Text(&r.round_id),
                r.year.into(),
                r.hci.into(),
                r.pg.into(),
                r.spg.into(),
                r.pcd_direct.into(),
                r.pcd_model.into(),
            ]);
        }
        t
    }
}

/// All five indices per round. With `labour` the model scale is
/// `C0 = C(year)` (quasi-static), otherwise each fit's own `C0`.
pub fn index_series(
    rounds: &[BandedDistribution],
    fits: &[FitResult],
    monods: &[MonodFit],
    labour: Option<&LabourRate>,
    line: PovertyLine,
) -> Result<IndexSeries> {
    if rounds.len() != fits.len() || rounds.len() != monods.len() {
        return Err(Error::params(format!(
            "misaligned inputs: {} rounds, {} fits, {} Monod fits",
            rounds.len(),
            fits.len(),
            monods.len()
        )));
    }
    let mut rows = Vec::with_capacity(rounds.len());
    let mut diagnostics = Vec::with_capacity(rounds.len());
    for ((round, fit), monod) in rounds.iter().zip(fits).zip(monods) {
        let fgt = fgt_banded(round, line)?;
        let direct = cd_index_direct(round, monod)?;
        let c0 = labour.map_or(fit.c0, |c| c.eval(round.year()));
        let dist = SteadyStateIpdf::new(fit.m, c0, fit.offset)?;
        let model = cd_index_model(ModelDensity::Steady(&dist), monod)?;
        rows.push(IndexRow {
            round_id: round.round_id().to_string(),
            year: round.year(),
            hci: fgt.hci,
            pg: fgt.pg,
            spg: fgt.spg,
            pcd_direct: direct,
            pcd_model: model,
        });
        diagnostics.push(RoundDiagnostics {
            round_id: round.round_id().to_string(),
            m: fit.m,
            c0,
            offset: fit.offset,
            fit_converged: fit.converged,
            v: monod.v,
            k: monod.k,
            monod_rss: monod.rss,
            monod_at_boundary: monod.at_boundary,
            pcd_direct_normalized: direct / monod.v,
            pcd_model_normalized: model / monod.v,
        });
    }
    Ok(IndexSeries { poverty_line: line.z, rows, diagnostics })
}

/// An index on a discrete income sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PovertyIndex {
    Headcount(PovertyLine),
    PovertyGap(PovertyLine),
    SquaredGap(PovertyLine),
    /// Mean of `V K / (K + y)`; `K` serves as the line for eligibility.
    Deprivation(MonodFit),
}

impl PovertyIndex {
    pub fn eval(&self, incomes: &[f64]) -> Result<f64> {
        Ok(match self {
            PovertyIndex::Headcount(l) => fgt_sample(incomes, *l)?.hci,
            PovertyIndex::PovertyGap(l) => fgt_sample(incomes, *l)?.pg,
            PovertyIndex::SquaredGap(l) => fgt_sample(incomes, *l)?.spg,
            PovertyIndex::Deprivation(m) => {
                if incomes.is_empty() {
                    return Err(Error::domain("empty income sample"));
                }
                incomes.iter().map(|&y| m.deprivation(y)).sum::<f64>() / incomes.len() as f64
            }
        })
    }

    /// Income below which a person counts as poor.
    pub fn line(&self) -> f64 {
        match self {
            PovertyIndex::Headcount(l) | PovertyIndex::PovertyGap(l) | PovertyIndex::SquaredGap(l) => l.z,
            PovertyIndex::Deprivation(m) => m.k,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PovertyIndex::Headcount(_) => "HCI",
            PovertyIndex::PovertyGap(_) => "PG",
            PovertyIndex::SquaredGap(_) => "SPG",
            PovertyIndex::Deprivation(_) => "P_CD",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axiom {
    /// Lowering a poor person's income must raise the index.
    Monotonicity,
    /// Moving income from a poor person to a richer one must raise the index.
    Transfer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Perturbation {
    Reduce { person: usize, delta: f64 },
    Transfer { from: usize, to: usize, delta: f64 },
}

impl Perturbation {
    pub fn axiom(&self) -> Axiom {
        match self {
            Perturbation::Reduce { .. } => Axiom::Monotonicity,
            Perturbation::Transfer { .. } => Axiom::Transfer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxiomCheck {
    pub before: f64,
    pub after: f64,
    /// `after − before > AXIOM_TOL`.
    pub holds: bool,
}

/// Applies `perturbation` and reports whether the index rose strictly.
/// Ineligible perturbations are rejected with a domain error.
pub fn sen_axiom_check(incomes: &[f64], index: &PovertyIndex, perturbation: Perturbation) -> Result<AxiomCheck> {
    let line = index.line();
    let n = incomes.len();
    let poor = |i: usize, what: &str| -> Result<()> {
        if i >= n {
            return Err(Error::domain(format!("{what} index {i} out of range for {n} people")));
        }
        if !(incomes[i] < line) {
            return Err(Error::domain(format!(
                "precondition: {what} income {} is not below the line {line}",
                incomes[i]
            )));
        }
        Ok(())
    };
    let mut after = incomes.to_vec();
    match perturbation {
        Perturbation::Reduce { person, delta } => {
            poor(person, "person")?;
            if !(delta > 0.0 && delta <= incomes[person]) {
                return Err(Error::domain(format!("precondition: reduction {delta} must lie in (0, income]")));
            }
            after[person] -= delta;
        }
        Perturbation::Transfer { from, to, delta } => {
            poor(from, "donor")?;
            if to >= n || to == from {
                return Err(Error::domain(format!("recipient index {to} invalid")));
            }
            if !(incomes[to] > incomes[from]) {
                return Err(Error::domain(format!(
                    "precondition: recipient income {} is not above donor income {}",
                    incomes[to], incomes[from]
                )));
            }
            if !(delta > 0.0 && delta <= incomes[from]) {
                return Err(Error::domain(format!("precondition: transfer {delta} must lie in (0, donor income]")));
            }
            after[from] -= delta;
            after[to] += delta;
        }
    }
    let b = index.eval(incomes)?;
    let a = index.eval(&after)?;
    Ok(AxiomCheck { before: b, after: a, holds: a - b > AXIOM_TOL })
}

/// A failing instance kept as evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub incomes: Vec<f64>,
    pub perturbation: Perturbation,
    pub check: AxiomCheck,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub instances: usize,
    pub violations: usize,
    pub first_violation: Option<Witness>,
}

/// Random eligible instances: 20 incomes from a steady state whose mean is
/// the index's line, a poor person chosen uniformly, the recipient (for
/// transfers) uniformly among richer people and `δ` uniform in
/// `[0.01, 1]` times the poor person's income.
pub fn sen_axiom_suite(index: &PovertyIndex, axiom: Axiom, instances: usize, seed: u64) -> Result<SuiteReport> {
    const PEOPLE: usize = 20;
    let line = index.line();
    let dist = SteadyStateIpdf::with_mean(1.6, line, 0.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut first_violation = None;
    for _ in 0..instances {
        let (incomes, poor) = loop {
            let incomes: Vec<f64> = (0..PEOPLE).map(|_| dist.draw(&mut rng)).collect();
            let poor: Vec<usize> = (0..PEOPLE).filter(|&i| incomes[i] < line).collect();
            let has_richer = poor.iter().any(|&p| incomes.iter().any(|&y| y > incomes[p]));
            if !poor.is_empty() && has_richer {
                break (incomes, poor);
            }
        };
        let perturbation = loop {
            let p = poor[rng.random_range(0..poor.len())];
            let delta = rng.random_range(0.01..=1.0) * incomes[p];
            match axiom {
                Axiom::Monotonicity => break Perturbation::Reduce { person: p, delta },
                Axiom::Transfer => {
                    let richer: Vec<usize> = (0..PEOPLE).filter(|&j| incomes[j] > incomes[p]).collect();
                    if richer.is_empty() {
                        continue;
                    }
                    let to = richer[rng.random_range(0..richer.len())];
                    break Perturbation::Transfer { from: p, to, delta };
                }
            }
        };
        let check = sen_axiom_check(&incomes, index, perturbation)?;
        if !check.holds {
            violations += 1;
            if first_violation.is_none() {
                first_violation = Some(Witness { incomes, perturbation, check });
            }
        }
    }
    Ok(SuiteReport { instances, violations, first_violation })
}
