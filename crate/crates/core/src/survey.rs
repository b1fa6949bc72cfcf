//! Banded survey rounds: loading, CPI deflation, data collapse, empirical
//! distributions and a synthetic round generator.
//!
//! Total expenditure is used as the income proxy throughout. Model income is
//! survey income minus the starvation offset; the shift happens here and in
//! `estimate`, never inside `distlib`.

use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::distlib::SteadyStateIpdf;
use crate::error::{Error, Result};
use crate::report::{fmt_num, write_text};

/// Starvation offset in collapsed units.
pub const DEFAULT_OFFSET: f64 = 0.15;
/// Model incomes at or below zero after the offset are clamped to this.
pub const CLAMP_EPSILON: f64 = 1e-6;
/// Default collapse target: mean monthly expenditure in 1974 rupees.
pub const REFERENCE_MEAN_INCOME: f64 = 64.84;
pub const REFERENCE_YEAR: f64 = 1974.0;
/// Share sums within this of one are renormalized silently.
pub const SHARE_SILENT_TOL: f64 = 1e-6;
/// Share sums further than this from one are rejected; in between they are
/// renormalized with a warning.
pub const SHARE_REJECT_TOL: f64 = 1e-3;

pub const ROUNDS_HEADER: [&str; 7] = [
    "round_id",
    "year",
    "band_lower",
    "band_upper",
    "population_share",
    "mean_total_expenditure",
    "mean_cereal_expenditure",
];
pub const DEFLATORS_HEADER: [&str; 2] = ["year", "cpi"];

/// One expenditure class. `upper == None` marks the open top band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: f64,
    pub upper: Option<f64>,
    pub population_share: f64,
    pub mean_total_expenditure: Option<f64>,
    pub mean_cereal_expenditure: Option<f64>,
}

impl Band {
    pub fn closed(lower: f64, upper: f64, share: f64) -> Self {
        Self { lower, upper: Some(upper), population_share: share, mean_total_expenditure: None, mean_cereal_expenditure: None }
    }

    pub fn open(lower: f64, share: f64) -> Self {
        Self { lower, upper: None, population_share: share, mean_total_expenditure: None, mean_cereal_expenditure: None }
    }

    pub fn with_means(mut self, total: Option<f64>, cereal: Option<f64>) -> Self {
        self.mean_total_expenditure = total;
        self.mean_cereal_expenditure = cereal;
        self
    }

    pub fn is_open(&self) -> bool {
        self.upper.is_none()
    }

    pub fn upper_or_inf(&self) -> f64 {
        self.upper.unwrap_or(f64::INFINITY)
    }

    fn scaled(&self, r: f64) -> Self {
        Self {
            lower: self.lower * r,
            upper: self.upper.map(|u| u * r),
            population_share: self.population_share,
            mean_total_expenditure: self.mean_total_expenditure.map(|v| v * r),
            mean_cereal_expenditure: self.mean_cereal_expenditure.map(|v| v * r),
        }
    }
}

/// What happened to the population shares during validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShareStatus {
    /// Sum within [`SHARE_SILENT_TOL`] of one (renormalized silently).
    Exact,
    /// Sum off by more than [`SHARE_SILENT_TOL`]; renormalized with a warning.
    Renormalized { sum: f64 },
}

/// Applies the share tolerance policy to a share total.
pub fn classify_share_sum(sum: f64) -> Result<ShareStatus> {
    let off = (sum - 1.0).abs();
    if !off.is_finite() || off > SHARE_REJECT_TOL {
        Err(Error::validation(format!("population shares sum to {sum}, more than {SHARE_REJECT_TOL} away from 1")))
    } else if off > SHARE_SILENT_TOL {
        Ok(ShareStatus::Renormalized { sum })
    } else {
        Ok(ShareStatus::Exact)
    }
}

/// A survey round: ordered, contiguous expenditure classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandedDistribution {
    round_id: String,
    year: f64,
    bands: Vec<Band>,
    currency_note: String,
}

impl BandedDistribution {
    pub fn new(round_id: impl Into<String>, year: f64, bands: Vec<Band>, currency_note: impl Into<String>) -> Result<Self> {
        Self::with_status(round_id, year, bands, currency_note).map(|(r, _)| r)
    }

    /// Like [`BandedDistribution::new`], also reporting whether shares were renormalized.
    pub fn with_status(
        round_id: impl Into<String>,
        year: f64,
        bands: Vec<Band>,
        currency_note: impl Into<String>,
    ) -> Result<(Self, ShareStatus)> {
        let round_id = round_id.into();
        let labels: Vec<String> = (0..bands.len()).map(|i| format!("band {}", i + 1)).collect();
        Self::build(round_id, year, bands, currency_note.into(), &labels)
    }

    fn build(
        round_id: String,
        year: f64,
        mut bands: Vec<Band>,
        currency_note: String,
        labels: &[String],
    ) -> Result<(Self, ShareStatus)> {
        let ctx = |msg: String| Error::validation(format!("round {round_id}: {msg}"));
        if !year.is_finite() {
            return Err(ctx(format!("year {year} is not finite")));
        }
        if bands.is_empty() {
            return Err(ctx("no bands".into()));
        }
        let last = bands.len() - 1;
        for (i, b) in bands.iter().enumerate() {
            let at = &labels[i];
            if !(b.lower >= 0.0 && b.lower.is_finite()) {
                return Err(ctx(format!("{at}: lower edge {} must be finite and non-negative", b.lower)));
            }
            match b.upper {
                None if i != last => return Err(ctx(format!("{at}: only the last band may be open"))),
                Some(u) if !(u > b.lower && u.is_finite()) => {
                    return Err(ctx(format!("{at}: upper edge {u} must exceed lower edge {}", b.lower)))
                }
                _ => {}
            }
            if !(0.0..=1.0).contains(&b.population_share) {
                return Err(ctx(format!("{at}: population share {} outside [0, 1]", b.population_share)));
            }
            if let Some(t) = b.mean_total_expenditure {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(ctx(format!("{at}: mean total expenditure {t} must be positive")));
                }
            }
            if let Some(c) = b.mean_cereal_expenditure {
                if !(c >= 0.0 && c.is_finite()) {
                    return Err(ctx(format!("{at}: mean cereal expenditure {c} must be non-negative")));
                }
                if let Some(t) = b.mean_total_expenditure {
                    if c > t {
                        return Err(ctx(format!("{at}: cereal expenditure {c} exceeds total expenditure {t}")));
                    }
                }
            }
        }
        for i in 0..last {
            let (u, next) = (bands[i].upper_or_inf(), bands[i + 1].lower);
            let tol = 1e-12 * u.abs().max(1.0);
            if next < u - tol {
                return Err(ctx(format!(
                    "{} [{}, {}] overlaps {} starting at {next}",
                    labels[i], bands[i].lower, u, labels[i + 1]
                )));
            }
            if next > u + tol {
                return Err(ctx(format!("gap between {} ending at {u} and {} starting at {next}", labels[i], labels[i + 1])));
            }
        }
        let sum: f64 = bands.iter().map(|b| b.population_share).sum();
        let status = classify_share_sum(sum).map_err(|e| ctx(e.to_string()))?;
        if let ShareStatus::Renormalized { sum } = status {
            log::warn!("round {round_id}: population shares sum to {sum}; renormalizing");
        }
        for b in &mut bands {
            b.population_share /= sum;
        }
        Ok((Self { round_id, year, bands, currency_note }, status))
    }

    pub fn round_id(&self) -> &str {
        &self.round_id
    }

    pub fn year(&self) -> f64 {
        self.year
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn currency_note(&self) -> &str {
        &self.currency_note
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.currency_note = note.into();
        self
    }

    pub fn shares(&self) -> Vec<f64> {
        self.bands.iter().map(|b| b.population_share).collect()
    }

    /// Band edges, `bands + 1` values, the last possibly infinite.
    pub fn edges(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.bands.iter().map(|b| b.lower).collect();
        e.push(self.bands[self.bands.len() - 1].upper_or_inf());
        e
    }

    pub fn has_cereal(&self) -> bool {
        self.bands.iter().all(|b| b.mean_cereal_expenditure.is_some())
    }

    /// Cereal expenditure per band; error when any band lacks it.
    pub fn cereal(&self) -> Result<Vec<f64>> {
        self.bands
            .iter()
            .enumerate()
            .map(|(i, b)| {
                b.mean_cereal_expenditure.ok_or_else(|| {
                    Error::validation(format!("round {}: band {} has no cereal expenditure", self.round_id, i + 1))
                })
            })
            .collect()
    }

    /// Pareto fit for the open band, `None` when the last band is closed.
    pub fn pareto_tail(&self) -> Result<Option<ParetoTail>> {
        let n = self.bands.len();
        let top = &self.bands[n - 1];
        if !top.is_open() {
            return Ok(None);
        }
        let share = top.population_share;
        let lower = top.lower;
        if share == 0.0 {
            return Ok(Some(ParetoTail { lower, alpha: f64::INFINITY, share }));
        }
        // survival at the lower edge of the second-to-last closed band, or the
        // last one when that edge is zero or missing
        let anchor = [n.checked_sub(3), n.checked_sub(2)]
            .into_iter()
            .flatten()
            .find(|&i| self.bands[i].lower > 0.0)
            .ok_or_else(|| {
                Error::validation(format!("round {}: open band needs a closed band with positive lower edge", self.round_id))
            })?;
        let a = self.bands[anchor].lower;
        let survival: f64 = self.bands[anchor..].iter().map(|b| b.population_share).sum();
        if !(survival > share && lower > a) {
            return Err(Error::validation(format!(
                "round {}: cannot fit a Pareto tail to the open band (closed-band shares are zero)",
                self.round_id
            )));
        }
        let alpha = (survival / share).ln() / (lower / a).ln();
        Ok(Some(ParetoTail { lower, alpha, share }))
    }

    /// Representative income per band: the band mean when given, else the
    /// midpoint (closed band) or the Pareto conditional mean (open band).
    pub fn representative_incomes(&self) -> Result<Vec<f64>> {
        let mut tail = None;
        self.bands
            .iter()
            .map(|b| {
                if let Some(m) = b.mean_total_expenditure {
                    return Ok(m);
                }
                match b.upper {
                    Some(u) => Ok(0.5 * (b.lower + u)),
                    None => {
                        if tail.is_none() {
                            tail = self.pareto_tail()?;
                        }
                        tail.as_ref().expect("open band has a tail").conditional_mean().ok_or_else(|| {
                            Error::validation(format!(
                                "round {}: open-band tail too heavy for a finite mean and no band mean given",
                                self.round_id
                            ))
                        })
                    }
                }
            })
            .collect()
    }

    /// `Σ share_b · ȳ_b`.
    pub fn estimated_mean(&self) -> Result<f64> {
        let reps = self.representative_incomes()?;
        Ok(self.bands.iter().zip(&reps).map(|(b, y)| b.population_share * y).sum())
    }
}

/// Pareto tail `P(Y > y) = share · (lower / y)^alpha` for `y ≥ lower`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoTail {
    pub lower: f64,
    pub alpha: f64,
    pub share: f64,
}

impl ParetoTail {
    /// Unconditional survival (including the tail's share).
    pub fn sf(&self, y: f64) -> f64 {
        if y <= self.lower {
            self.share
        } else if self.alpha.is_infinite() {
            0.0
        } else {
            self.share * (self.lower / y).powf(self.alpha)
        }
    }

    /// Unconditional density contribution.
    pub fn density(&self, y: f64) -> f64 {
        if y < self.lower || self.alpha.is_infinite() {
            0.0
        } else {
            self.share * self.alpha / self.lower * (self.lower / y).powf(self.alpha + 1.0)
        }
    }

    /// `E[Y | Y > lower]`, `None` when `alpha ≤ 1`.
    pub fn conditional_mean(&self) -> Option<f64> {
        if self.alpha.is_infinite() {
            Some(self.lower)
        } else if self.alpha > 1.0 {
            Some(self.alpha * self.lower / (self.alpha - 1.0))
        } else {
            None
        }
    }
}

/// A closed band of the empirical distribution with uniform density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformPiece {
    pub lower: f64,
    pub upper: f64,
    pub share: f64,
    /// Cumulative share below `lower`.
    pub below: f64,
}

/// Piecewise distribution built from a round: uniform density inside closed
/// bands, a Pareto tail for the open band.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    pieces: Vec<UniformPiece>,
    tail: Option<ParetoTail>,
}

impl EmpiricalDistribution {
    pub fn pieces(&self) -> &[UniformPiece] {
        &self.pieces
    }

    pub fn tail(&self) -> Option<&ParetoTail> {
        self.tail.as_ref()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        let first = self.pieces[0].lower;
        if y <= first {
            return 0.0;
        }
        for p in &self.pieces {
            if y < p.upper {
                return p.below + p.share * (y - p.lower) / (p.upper - p.lower);
            }
        }
        match &self.tail {
            Some(t) => (1.0 - t.sf(y)).clamp(0.0, 1.0),
            None => 1.0,
        }
    }

    pub fn density(&self, y: f64) -> f64 {
        for p in &self.pieces {
            if y >= p.lower && y < p.upper {
                return p.share / (p.upper - p.lower);
            }
        }
        self.tail.map_or(0.0, |t| t.density(y))
    }
}

/// Interpolated CDF and piecewise IPDF of a round (at least two bands).
pub fn empirical_distribution(round: &BandedDistribution) -> Result<EmpiricalDistribution> {
    if round.bands.len() < 2 {
        return Err(Error::validation(format!("round {}: a single band has no distribution shape", round.round_id)));
    }
    let mut below = 0.0;
    let mut pieces = Vec::with_capacity(round.bands.len());
    for b in &round.bands {
        if let Some(u) = b.upper {
            pieces.push(UniformPiece { lower: b.lower, upper: u, share: b.population_share, below });
            below += b.population_share;
        }
    }
    if pieces.is_empty() {
        return Err(Error::validation(format!("round {}: no closed bands", round.round_id)));
    }
    Ok(EmpiricalDistribution { pieces, tail: round.pareto_tail()? })
}

/// CPI table keyed by year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflatorTable {
    entries: Vec<(f64, f64)>,
    reference_year: f64,
    reference_mean_income: f64,
}

impl DeflatorTable {
    pub fn new(mut entries: Vec<(f64, f64)>, reference_year: f64, reference_mean_income: f64) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::validation("deflator table is empty"));
        }
        for &(y, c) in &entries {
            if !y.is_finite() || !(c > 0.0 && c.is_finite()) {
                return Err(Error::validation(format!("deflator for year {y}: cpi {c} must be positive")));
            }
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::validation(format!("deflator year {} appears twice", w[0].0)));
        }
        if !entries.iter().any(|e| e.0 == reference_year) {
            return Err(Error::validation(format!("reference year {reference_year} missing from deflator table")));
        }
        if !(reference_mean_income > 0.0 && reference_mean_income.is_finite()) {
            return Err(Error::validation(format!("reference mean income {reference_mean_income} must be positive")));
        }
        Ok(Self { entries, reference_year, reference_mean_income })
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn reference_year(&self) -> f64 {
        self.reference_year
    }

    pub fn reference_mean_income(&self) -> f64 {
        self.reference_mean_income
    }

    /// CPI at `year`, linear between bracketing entries; no extrapolation.
    pub fn cpi(&self, year: f64) -> Result<f64> {
        let e = &self.entries;
        let (first, last) = (e[0].0, e[e.len() - 1].0);
        if !(year >= first && year <= last) {
            return Err(Error::validation(format!("year {year} outside deflator range [{first}, {last}]")));
        }
        let i = e.partition_point(|x| x.0 < year);
        if e[i].0 == year {
            return Ok(e[i].1);
        }
        let (t0, c0) = e[i - 1];
        let (t1, c1) = e[i];
        Ok(c0 + (c1 - c0) * (year - t0) / (t1 - t0))
    }

    /// `cpi(reference) / cpi(year)`.
    pub fn ratio(&self, year: f64) -> Result<f64> {
        Ok(self.cpi(self.reference_year)? / self.cpi(year)?)
    }
}

/// Multiplies every monetary field by `factor`; shares are untouched.
pub fn scale_monetary(round: &BandedDistribution, factor: f64) -> Result<BandedDistribution> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::params(format!("scale factor must be positive and finite, got {factor}")));
    }
    Ok(BandedDistribution {
        round_id: round.round_id.clone(),
        year: round.year,
        bands: round.bands.iter().map(|b| b.scaled(factor)).collect(),
        currency_note: round.currency_note.clone(),
    })
}

/// Expresses the round in reference-year prices.
pub fn deflate(round: &BandedDistribution, table: &DeflatorTable) -> Result<BandedDistribution> {
    let r = table.ratio(round.year).map_err(|e| context(round, e))?;
    Ok(scale_monetary(round, r)?.with_note(format!("deflated to {} prices", fmt_num(table.reference_year))))
}

/// Inverse of [`deflate`].
pub fn inflate(round: &BandedDistribution, table: &DeflatorTable) -> Result<BandedDistribution> {
    let r = table.ratio(round.year).map_err(|e| context(round, e))?;
    Ok(scale_monetary(round, 1.0 / r)?.with_note(format!("nominal {} prices", fmt_num(round.year))))
}

fn context(round: &BandedDistribution, e: Error) -> Error {
    match e {
        Error::Validation(m) => Error::validation(format!("round {}: {m}", round.round_id)),
        other => other,
    }
}

/// Rescales so that the estimated mean equals `target_mean`.
pub fn collapse_rescale(round: &BandedDistribution, target_mean: f64) -> Result<BandedDistribution> {
    let mean = round.estimated_mean()?;
    if !(mean > 0.0) {
        return Err(Error::numerical(format!("round {}: estimated mean is zero", round.round_id)));
    }
    if !(target_mean > 0.0 && target_mean.is_finite()) {
        return Err(Error::params(format!("target mean must be positive, got {target_mean}")));
    }
    Ok(scale_monetary(round, target_mean / mean)?.with_note(format!("collapsed to mean {}", fmt_num(target_mean))))
}

/// Survey incomes to model incomes `x − offset`; values at or below zero are
/// clamped to [`CLAMP_EPSILON`]. Returns the incomes and the clamp count.
pub fn to_model_incomes(incomes: &[f64], offset: f64) -> (Vec<f64>, usize) {
    let mut clamped = 0;
    let out = incomes
        .iter()
        .map(|&x| {
            let y = x - offset;
            if y > CLAMP_EPSILON {
                y
            } else {
                clamped += 1;
                CLAMP_EPSILON
            }
        })
        .collect();
    if clamped > 0 {
        log::info!("{clamped} incomes at or below the starvation offset clamped to {CLAMP_EPSILON}");
    }
    (out, clamped)
}

fn parse_field(raw: &str, column: &str, line: u64, allow_inf: bool) -> Result<Option<f64>> {
    let s = raw.trim();
    if s.is_empty() {
        return Ok(None);
    }
    if allow_inf && s.eq_ignore_ascii_case("inf") {
        return Ok(Some(f64::INFINITY));
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(Error::validation(format!("line {line}: column {column}: cannot parse {s:?} as a finite number"))),
    }
}

fn required(v: Option<f64>, column: &str, line: u64) -> Result<f64> {
    v.ok_or_else(|| Error::validation(format!("line {line}: column {column} is empty")))
}

fn open_csv(path: &Path, expected: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let p = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv { path: p.clone(), source })?;
    let header = rdr.headers().map_err(|source| Error::Csv { path: p.clone(), source })?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::validation(format!("{p}: header {got:?} does not match {expected:?}")));
    }
    Ok(rdr)
}

/// Loads every round in a rounds CSV, in order of first appearance.
pub fn load_rounds(path: &Path) -> Result<Vec<BandedDistribution>> {
    let p = path.display().to_string();
    let mut rdr = open_csv(path, &ROUNDS_HEADER)?;
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, (f64, Vec<Band>, Vec<String>)> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| Error::Csv { path: p.clone(), source })?;
        let line = rec.position().map_or(0, |pos| pos.line());
        let in_file = |e: Error| match e {
            Error::Validation(m) => Error::validation(format!("{p}: {m}")),
            other => other,
        };
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(Error::validation(format!("{p}: line {line}: empty round_id")));
        }
        let year = required(parse_field(&rec[1], "year", line, false).map_err(in_file)?, "year", line).map_err(in_file)?;
        let lower = required(parse_field(&rec[2], "band_lower", line, false).map_err(in_file)?, "band_lower", line)
            .map_err(in_file)?;
        let upper = required(parse_field(&rec[3], "band_upper", line, true).map_err(in_file)?, "band_upper", line)
            .map_err(in_file)?;
        let share =
            required(parse_field(&rec[4], "population_share", line, false).map_err(in_file)?, "population_share", line)
                .map_err(in_file)?;
        let total = parse_field(&rec[5], "mean_total_expenditure", line, false).map_err(in_file)?;
        let cereal = parse_field(&rec[6], "mean_cereal_expenditure", line, false).map_err(in_file)?;
        let band = Band {
            lower,
            upper: if upper.is_infinite() { None } else { Some(upper) },
            population_share: share,
            mean_total_expenditure: total,
            mean_cereal_expenditure: cereal,
        };
        let entry = groups.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            (year, Vec::new(), Vec::new())
        });
        if entry.0 != year {
            return Err(Error::validation(format!(
                "{p}: line {line}: round {id} has year {year}, earlier rows say {}",
                entry.0
            )));
        }
        entry.1.push(band);
        entry.2.push(format!("line {line}"));
    }
    if order.is_empty() {
        return Err(Error::validation(format!("{p}: no data rows")));
    }
    order
        .into_iter()
        .map(|id| {
            let (year, bands, labels) = groups.remove(&id).expect("grouped");
            BandedDistribution::build(id, year, bands, "nominal".into(), &labels)
                .map(|(r, _)| r)
                .map_err(|e| match e {
                    Error::Validation(m) => Error::validation(format!("{p}: {m}")),
                    other => other,
                })
        })
        .collect()
}

/// Loads a rounds CSV that must hold exactly one round.
pub fn load_round(path: &Path) -> Result<BandedDistribution> {
    let mut rounds = load_rounds(path)?;
    if rounds.len() != 1 {
        return Err(Error::validation(format!("{}: expected one round, found {}", path.display(), rounds.len())));
    }
    Ok(rounds.remove(0))
}

pub fn load_deflators(path: &Path, reference_year: f64, reference_mean_income: f64) -> Result<DeflatorTable> {
    let p = path.display().to_string();
    let mut rdr = open_csv(path, &DEFLATORS_HEADER)?;
    let mut entries = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| Error::Csv { path: p.clone(), source })?;
        let line = rec.position().map_or(0, |pos| pos.line());
        let year = required(parse_field(&rec[0], "year", line, false)?, "year", line)?;
        let cpi = required(parse_field(&rec[1], "cpi", line, false)?, "cpi", line)?;
        entries.push((year, cpi));
    }
    DeflatorTable::new(entries, reference_year, reference_mean_income).map_err(|e| match e {
        Error::Validation(m) => Error::validation(format!("{p}: {m}")),
        other => other,
    })
}

/// Renders rounds in the rounds CSV schema.
pub fn rounds_to_csv(rounds: &[BandedDistribution]) -> String {
    let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(ROUNDS_HEADER).expect("in-memory write");
    for r in rounds {
        for b in &r.bands {
            w.write_record([
                r.round_id.clone(),
                fmt_num(r.year),
                fmt_num(b.lower),
                fmt_num(b.upper_or_inf()),
                fmt_num(b.population_share),
                opt(b.mean_total_expenditure),
                opt(b.mean_cereal_expenditure),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn write_rounds(path: &Path, rounds: &[BandedDistribution]) -> Result<()> {
    write_text(path, &rounds_to_csv(rounds))
}

/// Settings for [`synth_round`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub round_id: String,
    pub year: f64,
    /// Band edges in survey units; the last may be infinite.
    pub edges: Vec<f64>,
    pub n_population: u64,
    pub seed: u64,
    /// `(V, K)` of the cereal consumption curve `V ȳ / (K + ȳ)`.
    pub monod: Option<(f64, f64)>,
}

/// Validates band edges: at least two, non-negative, strictly increasing,
/// only the last may be infinite.
pub fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return Err(Error::params("need at least two band edges"));
    }
    if !(edges[0] >= 0.0) {
        return Err(Error::params(format!("first band edge {} must be non-negative", edges[0])));
    }
    if let Some(i) = (1..edges.len()).find(|&i| !(edges[i] > edges[i - 1])) {
        return Err(Error::params(format!("band edges not increasing at position {i}")));
    }
    if edges[..edges.len() - 1].iter().any(|e| !e.is_finite()) {
        return Err(Error::params("only the last band edge may be infinite"));
    }
    Ok(())
}

/// Band probabilities of a (possibly offset) steady state. The outermost
/// bands absorb the mass below the first edge and above the last, so the
/// probabilities always sum to one.
pub fn band_probabilities(dist: &SteadyStateIpdf<f64>, edges: &[f64]) -> Result<Vec<f64>> {
    check_edges(edges)?;
    let o = dist.offset_ymin();
    let n = edges.len() - 1;
    (0..n)
        .map(|b| {
            let (lo, hi) = model_band(edges, b, o);
            if hi <= lo {
                Ok(0.0)
            } else {
                dist.interval_probability(lo, hi)
            }
        })
        .collect()
}

/// Band `b` in model coordinates with the outer bands extended.
fn model_band(edges: &[f64], b: usize, offset: f64) -> (f64, f64) {
    let n = edges.len() - 1;
    let lo = if b == 0 { 0.0 } else { (edges[b] - offset).max(0.0) };
    let hi = if b + 1 == n { f64::INFINITY } else { (edges[b + 1] - offset).max(0.0) };
    (lo, hi)
}

/// Draws a synthetic round from the steady state: multinomial band counts,
/// exact conditional band means and, optionally, Monod cereal expenditure.
pub fn synth_round(dist: &SteadyStateIpdf<f64>, spec: &SynthSpec) -> Result<BandedDistribution> {
    if spec.n_population == 0 {
        return Err(Error::params("synthetic population must be positive"));
    }
    if let Some((v, k)) = spec.monod {
        if !(v > 0.0 && k > 0.0 && v.is_finite() && k.is_finite()) {
            return Err(Error::params(format!("Monod parameters must be positive, got V = {v}, K = {k}")));
        }
    }
    let edges = &spec.edges;
    let probs = band_probabilities(dist, edges)?;
    let o = dist.offset_ymin();

    // multinomial as a chain of binomials
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut left_n = spec.n_population;
    let mut left_p = 1.0;
    let mut counts = Vec::with_capacity(probs.len());
    for (b, &p) in probs.iter().enumerate() {
        let k = if b + 1 == probs.len() {
            left_n
        } else if left_n == 0 || p <= 0.0 {
            0
        } else {
            let q = (p / left_p).clamp(0.0, 1.0);
            Binomial::new(left_n, q).map_err(|e| Error::numerical(format!("binomial draw: {e}")))?.sample(&mut rng)
        };
        counts.push(k);
        left_n -= k;
        left_p -= p;
        left_p = left_p.max(0.0);
    }

    let n = probs.len();
    let mut bands = Vec::with_capacity(n);
    for b in 0..n {
        let (lo, hi) = model_band(edges, b, o);
        let upper = if edges[b + 1].is_finite() { Some(edges[b + 1]) } else { None };
        let mean = if probs[b] > 1e-300 {
            o + dist.partial_first_moment(lo, hi)? / probs[b]
        } else {
            upper.map_or(edges[b], |u| 0.5 * (edges[b] + u))
        };
        let cereal = spec.monod.map(|(v, k)| v * mean / (k + mean));
        if let Some(c) = cereal {
            if c > mean {
                return Err(Error::params(format!(
                    "band {}: Monod cereal expenditure {c} exceeds the band mean {mean}; need V <= K + mean",
                    b + 1
                )));
            }
        }
        bands.push(Band {
            lower: edges[b],
            upper,
            population_share: counts[b] as f64 / spec.n_population as f64,
            mean_total_expenditure: Some(mean),
            mean_cereal_expenditure: cereal,
        });
    }
    BandedDistribution::new(spec.round_id.clone(), spec.year, bands, "synthetic")
}
