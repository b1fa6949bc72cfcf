//! One function per subcommand. Each returns the names of the files it wrote.

use std::path::Path;

use incomedyn::distlib::SteadyStateIpdf;
use incomedyn::estimate::{fit_ipdf, fit_monod, labour_rate_series, FitOptions, FitResult, MonodFit, ScaleMode};
use incomedyn::fpsolve::{
    discrete_steady_state, eigenmode_operator_residual, eigenvalue_residual, eigenmode_params, evolve, steady_state_residual, GridDensity,
    LogGrid,
};
use incomedyn::labour::LabourRate;
use incomedyn::poverty::{index_series, IndexSeries, PovertyLine};
use incomedyn::report::{write_text, Cell, Table};
use incomedyn::simulate::{run, worker_pool, InitialCondition, LangevinParams, RunConfig};
use incomedyn::special::{lgamma, KUMMER_MAX_ABS_Z};
use incomedyn::stats::{hill_tail_exponent, ks_distance, mean_and_standard_error};
use incomedyn::survey::{
    collapse_rescale, deflate, empirical_distribution, load_deflators, load_rounds, synth_round, write_rounds,
    BandedDistribution, SynthSpec,
};
use incomedyn::{Error, Result};
use serde::Serialize;

use crate::{
    CollapseArgs, Command, Context, DataArgs, EvolveArgs, FitArgs, IndicesArgs, LabourArgs, Manifest, ModesArgs,
    ScaleArg, SimulateArgs, SynthArgs,
};

pub const DEFAULT_EDGES: &str =
    "0,0.35,0.45,0.55,0.65,0.75,0.85,0.95,1.05,1.15,1.3,1.45,1.6,1.8,2,2.3,2.7,3.2,4,5.5,inf";

const HILL_FRACTIONS: [f64; 3] = [0.05, 0.02, 0.01];

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}

pub fn execute(manifest: &Manifest, ctx: &Context<'_>) -> Result<Vec<String>> {
    std::fs::create_dir_all(ctx.out_dir)
        .map_err(|source| Error::Io { path: ctx.out_dir.display().to_string(), source })?;
    let mut out = Outputs { dir: ctx.out_dir, written: Vec::new() };
    match &manifest.command {
        Command::Simulate(a) => simulate(a, ctx, &mut out)?,
        Command::Collapse(a) => collapse(a, &mut out)?,
        Command::Fit(a) => fit(a, &mut out)?,
        Command::Indices(a) => indices(a, &mut out)?,
        Command::Evolve(a) => evolve_cmd(a, &mut out)?,
        Command::Synth(a) => synth(a, ctx, &mut out)?,
        Command::Modes(a) => modes(a, &mut out)?,
    }
    out.json("manifest.json", manifest)?;
    Ok(out.written)
}

struct Outputs<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Outputs<'_> {
    fn table(&mut self, name: &str, t: &Table) -> Result<()> {
        t.write(&self.dir.join(name))?;
        self.written.push(name.into());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(format!("JSON encoding: {e}")))?;
        text.push('\n');
        write_text(&self.dir.join(name), &text)?;
        self.written.push(name.into());
        Ok(())
    }
}

/// Comma-separated numbers; `inf` is accepted.
fn parse_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            if t.eq_ignore_ascii_case("inf") {
                Ok(f64::INFINITY)
            } else {
                t.parse::<f64>().map_err(|_| usage(format!("{what}: cannot parse {t:?}")))
            }
        })
        .collect()
}

fn labour(a: &LabourArgs) -> Result<LabourRate> {
    match &a.c_knots {
        None => LabourRate::constant(a.c),
        Some(spec) => {
            let knots = spec
                .split(',')
                .map(|k| {
                    let (t, c) = k.split_once(':').ok_or_else(|| usage(format!("C knot {k:?} is not t:c")))?;
                    let parse = |v: &str| v.trim().parse::<f64>().map_err(|_| usage(format!("C knot {k:?}: bad number")));
                    Ok((parse(t)?, parse(c)?))
                })
                .collect::<Result<Vec<_>>>()?;
            LabourRate::from_knots(knots)
        }
    }
}

fn simulate(a: &SimulateArgs, ctx: &Context<'_>, out: &mut Outputs<'_>) -> Result<()> {
    let rate = labour(&a.labour)?;
    let params = LangevinParams::new(a.m, rate.clone(), a.dt)?.with_sigma(a.sigma)?;
    if a.bins == 0 {
        return Err(usage("--bins must be positive"));
    }
    let c_start = rate.eval(0.0);
    let init = match a.init.as_str() {
        "equilibrium" => InitialCondition::Equilibrium(SteadyStateIpdf::unshifted(a.m, c_start)?),
        "constant" => InitialCondition::Constant(c_start / a.m),
        other => match other.strip_prefix("constant:") {
            Some(v) => InitialCondition::Constant(v.parse().map_err(|_| usage(format!("bad --init {other:?}")))?),
            None => return Err(usage(format!("unknown --init {other:?}"))),
        },
    };
    let times = match &a.snapshots {
        Some(s) => parse_list(s, "--snapshots")?,
        None => Vec::new(),
    };
    let cfg = RunConfig { n_agents: a.agents, t_end: a.t_end, init, seed: ctx.seed, snapshot_times: times };
    let pool = if ctx.workers > 1 { Some(worker_pool(ctx.workers)?) } else { None };
    let snaps = run(&params, &cfg, pool.as_ref())?;

    let mut hist = Table::new(&["t", "bin_lower", "bin_upper", "empirical_density", "analytic_density"]);
    let mut ks = Table::new(&["t", "n_agents", "mean", "std_error", "analytic_mean", "ks_distance"]);
    for pop in &snaps {
        let t = pop.time();
        // quasi-static reference law at the current labour rate
        let dist = SteadyStateIpdf::unshifted(a.m, rate.eval(t))?;
        let incomes = pop.incomes();
        let n = incomes.len() as f64;
        let (lo, hi) = ((1e-2 * dist.mean()).ln(), (1e2 * dist.mean()).ln());
        let step = (hi - lo) / a.bins as f64;
        let mut counts = vec![0u64; a.bins];
        for &y in incomes {
            let i = ((y.ln() - lo) / step).floor();
            if i >= 0.0 && (i as usize) < a.bins {
                counts[i as usize] += 1;
            }
        }
        for (i, &c) in counts.iter().enumerate() {
            let (l, u) = ((lo + step * i as f64).exp(), (lo + step * (i + 1) as f64).exp());
            let w = u - l;
            hist.push_nums(&[t, l, u, c as f64 / (n * w), dist.interval_probability(l, u)? / w]);
        }
        let (mean, se) = mean_and_standard_error(incomes);
        let d = ks_distance(incomes, |y| dist.cdf(y).unwrap_or(0.0));
        ks.push_nums(&[t, n, mean, se, dist.mean(), d]);
    }
    let last = snaps.last().expect("run returns at least one snapshot");
    let mut hill = Table::new(&["t", "tail_fraction", "hill_exponent", "model_exponent"]);
    for &frac in &HILL_FRACTIONS {
        match hill_tail_exponent(last.incomes(), frac) {
            Ok(h) => hill.push_nums(&[last.time(), frac, h, a.m + 2.0]),
            Err(e) => log::warn!("Hill estimate at tail fraction {frac} skipped: {e}"),
        }
    }
    out.table("snapshots.csv", &hist)?;
    out.table("ks_report.csv", &ks)?;
    out.table("hill_report.csv", &hill)
}

/// Loads rounds and deflates them when a CPI table is given; returns each
/// round with its deflation ratio.
fn load_data(d: &DataArgs) -> Result<Vec<(BandedDistribution, f64)>> {
    let rounds = load_rounds(&d.rounds)?;
    match &d.deflators {
        None => Ok(rounds.into_iter().map(|r| (r, 1.0)).collect()),
        Some(p) => {
            let table = load_deflators(p, d.reference_year, d.reference_mean)?;
            rounds
                .into_iter()
                .map(|r| {
                    let ratio = table.ratio(r.year()).map_err(|e| Error::Validation(format!("round {}: {e}", r.round_id())))?;
                    Ok((deflate(&r, &table)?, ratio))
                })
                .collect()
        }
    }
}

#[derive(Serialize)]
struct CollapseRecord {
    round_id: String,
    year: f64,
    deflation_ratio: f64,
    collapse_factor: f64,
}

#[derive(Serialize)]
struct CollapseReport {
    reference_mean: f64,
    max_spread: f64,
    rounds: Vec<CollapseRecord>,
}

fn collapse(a: &CollapseArgs, out: &mut Outputs<'_>) -> Result<()> {
    if a.points < 2 {
        return Err(usage("--points must be at least 2"));
    }
    let target = a.data.reference_mean;
    let data = load_data(&a.data)?;
    let mut collapsed = Vec::new();
    let mut records = Vec::new();
    for (r, ratio) in &data {
        let c = collapse_rescale(r, target)?;
        records.push(CollapseRecord {
            round_id: r.round_id().into(),
            year: r.year(),
            deflation_ratio: *ratio,
            collapse_factor: target / r.estimated_mean()?,
        });
        collapsed.push(c);
    }
    let empirical = collapsed.iter().map(empirical_distribution).collect::<Result<Vec<_>>>()?;

    let mut curves = Table::new(&["round_id", "y", "cdf"]);
    for (r, emp) in collapsed.iter().zip(&empirical) {
        for y in r.edges().into_iter().filter(|y| y.is_finite()) {
            curves.push(vec![Cell::Text(r.round_id()), y.into(), emp.cdf(y).into()]);
        }
    }
    let offset = a.offset * target;
    let model = SteadyStateIpdf::new(a.m, a.m * (target - offset), offset)?;
    let model_cdf = |x: f64| if x <= offset { Ok(0.0) } else { model.cdf(x - offset) };
    let (lo, hi) = ((0.05 * target).ln(), (20.0 * target).ln());
    let grid: Vec<f64> = (0..a.points).map(|i| (lo + (hi - lo) * i as f64 / (a.points - 1) as f64).exp()).collect();
    let mut analytic = Table::new(&["y", "cdf"]);
    let mut spread = Table::new(&["y", "min_cdf", "max_cdf", "spread"]);
    let mut max_spread: f64 = 0.0;
    for &y in &grid {
        analytic.push_nums(&[y, model_cdf(y)?]);
        let vals: Vec<f64> = empirical.iter().map(|e| e.cdf(y)).collect();
        let mn = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let mx = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max_spread = max_spread.max(mx - mn);
        spread.push_nums(&[y, mn, mx, mx - mn]);
    }
    write_rounds(&out.dir.join("collapsed_rounds.csv"), &collapsed)?;
    out.written.push("collapsed_rounds.csv".into());
    out.table("collapsed_cdf.csv", &curves)?;
    out.table("analytic_cdf.csv", &analytic)?;
    out.table("collapse_spread.csv", &spread)?;
    out.json("collapse_report.json", &CollapseReport { reference_mean: target, max_spread, rounds: records })
}

/// A round carried through deflation, unit-mean fitting and the Monod fit.
struct FittedRound {
    round: BandedDistribution,
    mean: f64,
    unit_fit: FitResult,
    fit: FitResult,
    monod: Option<MonodFit>,
}

#[derive(Serialize)]
struct FitRecord<'a> {
    round_id: &'a str,
    year: f64,
    mean: f64,
    m: f64,
    c0: f64,
    offset: f64,
    unit_mean_fit: &'a FitResult,
    monod: Option<MonodFit>,
}

fn fit_rounds(a: &FitArgs) -> Result<Vec<FittedRound>> {
    let opts = FitOptions {
        offset: if a.fit_offset { None } else { Some(a.offset) },
        scale: match a.scale {
            ScaleArg::Joint => ScaleMode::Joint,
            ScaleArg::MeanAnchored => ScaleMode::MeanAnchored,
        },
        ..FitOptions::default()
    };
    load_data(&a.data)?
        .into_iter()
        .map(|(round, _)| {
            // fit on the unit-mean collapse, where the offset default applies
            let mean = round.estimated_mean()?;
            let unit = collapse_rescale(&round, 1.0)?;
            let unit_fit = fit_ipdf(&unit, &opts)?;
            let fit = unit_fit.rescaled(mean);
            let monod = if round.has_cereal() { Some(fit_monod(&round)?) } else { None };
            Ok(FittedRound { round, mean, unit_fit, fit, monod })
        })
        .collect()
}

fn pooled_labour(fitted: &[FittedRound]) -> Result<(f64, LabourRate)> {
    let m = fitted.iter().map(|f| f.fit.m).sum::<f64>() / fitted.len() as f64;
    let points: Vec<(f64, f64)> = fitted.iter().map(|f| (f.round.year(), f.mean - f.fit.offset)).collect();
    Ok((m, labour_rate_series(&points, m)?))
}

fn fit(a: &FitArgs, out: &mut Outputs<'_>) -> Result<()> {
    let fitted = fit_rounds(a)?;
    let mut shares = Table::new(&["round_id", "band_lower", "band_upper", "observed_share", "expected_share"]);
    let mut records = Vec::new();
    for f in &fitted {
        for (b, e) in f.round.bands().iter().zip(&f.fit.per_band_expected_shares) {
            shares.push(vec![
                Cell::Text(f.round.round_id()),
                b.lower.into(),
                b.upper_or_inf().into(),
                b.population_share.into(),
                (*e).into(),
            ]);
        }
        records.push(FitRecord {
            round_id: f.round.round_id(),
            year: f.round.year(),
            mean: f.mean,
            m: f.fit.m,
            c0: f.fit.c0,
            offset: f.fit.offset,
            unit_mean_fit: &f.unit_fit,
            monod: f.monod,
        });
    }
    let (_, rate) = pooled_labour(&fitted)?;
    let mut labour_table = Table::new(&["year", "C"]);
    for &(t, c) in rate.knots() {
        labour_table.push_nums(&[t, c]);
    }
    out.json("fit_report.json", &records)?;
    out.table("fit_shares.csv", &shares)?;
    out.table("labour_rate.csv", &labour_table)
}

#[derive(Serialize)]
struct IndicesSidecar<'a> {
    quasi_static: bool,
    pooled_m: f64,
    series: &'a IndexSeries,
}

fn indices(a: &IndicesArgs, out: &mut Outputs<'_>) -> Result<()> {
    let line = PovertyLine::new(a.poverty_line)?;
    let fitted = fit_rounds(&a.fit)?;
    let monods = fitted
        .iter()
        .map(|f| {
            f.monod.ok_or_else(|| Error::Validation(format!("round {}: no cereal expenditure column", f.round.round_id())))
        })
        .collect::<Result<Vec<_>>>()?;
    let (pooled_m, rate) = pooled_labour(&fitted)?;
    let quasi_static = !a.per_round_scale;
    let fits: Vec<FitResult> = fitted
        .iter()
        .map(|f| if quasi_static { FitResult { m: pooled_m, ..f.fit.clone() } } else { f.fit.clone() })
        .collect();
    let rounds: Vec<BandedDistribution> = fitted.iter().map(|f| f.round.clone()).collect();
    let series = index_series(&rounds, &fits, &monods, quasi_static.then_some(&rate), line)?;
    out.table("index_series.csv", &series.to_table())?;
    out.json("index_series.json", &IndicesSidecar { quasi_static, pooled_m, series: &series })
}

#[derive(Serialize)]
struct EvolveReport {
    steps: usize,
    /// L1 distance to the discrete steady state never increased.
    monotone: bool,
    final_l1_discrete: f64,
    final_l1_closed_form: f64,
    /// L1 distance between the discrete and the closed-form steady state.
    discretization_floor: f64,
    max_mass_drift: f64,
    mass_drift_per_unit_time: f64,
    steady_state_residual: f64,
}

fn evolve_cmd(a: &EvolveArgs, out: &mut Outputs<'_>) -> Result<()> {
    let rate = labour(&a.labour)?;
    let c_start = rate.eval(0.0);
    let grid = LogGrid::for_params(a.m, c_start, a.cells)?;
    let f0 = match a.init.as_str() {
        "steady" => GridDensity::steady_state(grid.clone(), &SteadyStateIpdf::unshifted(a.m, c_start)?)?,
        other => {
            let parts: Vec<&str> = other.split(':').collect();
            match parts.as_slice() {
                ["bump", centre, width] => {
                    let centre: f64 = centre.parse().map_err(|_| usage(format!("bad bump centre in {other:?}")))?;
                    let width: f64 = width.parse().map_err(|_| usage(format!("bad bump width in {other:?}")))?;
                    if !(centre > 0.0 && width > 0.0) {
                        return Err(usage("bump centre and width must be positive"));
                    }
                    GridDensity::bump(grid.clone(), centre * c_start / a.m, width)?
                }
                _ => return Err(usage(format!("unknown --init {other:?}"))),
            }
        }
    };
    let ev = evolve(&f0, a.m, |t| rate.eval(t), a.t_end, a.dt, a.snapshot_every)?;
    let snaps = if ev.snapshots.is_empty() { vec![f0.clone(), ev.final_state.clone()] } else { ev.snapshots.clone() };

    let mut dump = Table::new(&["t", "y", "f(y)"]);
    let mut conv = Table::new(&["t", "l1_discrete", "l1_closed_form", "mass"]);
    let mut monotone = true;
    let mut prev = f64::INFINITY;
    let (mut l1_d, mut l1_c) = (f64::NAN, f64::NAN);
    for s in &snaps {
        let c = rate.eval(s.time());
        let discrete = discrete_steady_state(&grid, a.m, c)?;
        let closed = GridDensity::steady_state(grid.clone(), &SteadyStateIpdf::unshifted(a.m, c)?)?;
        l1_d = s.l1_distance(&discrete)?;
        l1_c = s.l1_distance(&closed)?;
        // constant C: backward Euler contracts the L1 distance to the discrete steady state
        if l1_d > prev * (1.0 + 1e-9) + 1e-15 {
            monotone = false;
        }
        prev = l1_d;
        conv.push_nums(&[s.time(), l1_d, l1_c, s.mass()]);
        for (y, f) in grid.centers().iter().zip(s.values()) {
            dump.push_nums(&[s.time(), *y, *f]);
        }
    }
    let c_end = rate.eval(a.t_end);
    let floor = discrete_steady_state(&grid, a.m, c_end)?
        .l1_distance(&GridDensity::steady_state(grid.clone(), &SteadyStateIpdf::unshifted(a.m, c_end)?)?)?;
    let span = a.t_end - f0.time();
    let report = EvolveReport {
        steps: ev.steps,
        monotone: monotone && rate.is_constant(),
        final_l1_discrete: l1_d,
        final_l1_closed_form: l1_c,
        discretization_floor: floor,
        max_mass_drift: ev.max_mass_drift,
        mass_drift_per_unit_time: if span > 0.0 { ev.max_mass_drift / span } else { 0.0 },
        steady_state_residual: steady_state_residual(a.m, c_end, &grid)?,
    };
    out.table("snapshots.csv", &dump)?;
    out.table("convergence.csv", &conv)?;
    out.json("evolve_report.json", &report)
}

fn synth(a: &SynthArgs, ctx: &Context<'_>, out: &mut Outputs<'_>) -> Result<()> {
    let edges = parse_list(&a.edges, "--edges")?;
    let years = parse_list(&a.years, "--years")?;
    let mut c0s = parse_list(&a.c0, "--C0")?;
    if c0s.len() == 1 {
        c0s = vec![c0s[0]; years.len()];
    }
    if c0s.len() != years.len() {
        return Err(usage(format!("{} C0 values for {} years", c0s.len(), years.len())));
    }
    let monod = match (a.v, a.k) {
        (Some(v), Some(k)) => Some((v, k)),
        (None, None) => None,
        _ => return Err(usage("give both --V and --K or neither")),
    };
    let mut rounds: Vec<BandedDistribution> = Vec::with_capacity(years.len());
    for (i, (&year, &c0)) in years.iter().zip(&c0s).enumerate() {
        let id = format!("R{}", incomedyn::report::fmt_num(year));
        if rounds.iter().any(|r| r.round_id() == id) {
            return Err(usage(format!("year {year} given twice")));
        }
        let dist = SteadyStateIpdf::new(a.m, c0, a.offset)?;
        let spec = SynthSpec {
            round_id: id,
            year,
            edges: edges.clone(),
            n_population: a.population,
            seed: ctx.seed.wrapping_add(i as u64),
            monod,
        };
        rounds.push(synth_round(&dist, &spec)?);
    }
    write_rounds(&out.dir.join("rounds.csv"), &rounds)?;
    out.written.push("rounds.csv".into());
    Ok(())
}

#[derive(Serialize)]
struct RecoveryReport {
    m: f64,
    c: f64,
    /// Largest pointwise relative error of the normalized n = 0 mode
    /// against the closed-form steady state.
    max_relative_error: f64,
}

fn modes(a: &ModesArgs, out: &mut Outputs<'_>) -> Result<()> {
    let c = a.c.unwrap_or(a.m);
    if a.points < 2 {
        return Err(usage("--points must be at least 2"));
    }
    // the default grid reaches c/y = 1000 c/mean, past the range where the
    // hypergeometric series is evaluated; start the residual grid inside it
    let full = LogGrid::for_params(a.m, c, a.cells)?;
    let lower = full.edges()[0].max(2.0 * c / KUMMER_MAX_ABS_Z);
    let grid = LogGrid::new(lower, full.edges()[a.cells], a.cells)?;
    let mut table = Table::new(&[
        "n",
        "omega",
        "alpha_plus",
        "alpha_minus",
        "beta_plus",
        "beta_minus",
        "minus_branch_pole",
        "operator_residual",
        "growth_residual",
    ]);
    let mean = c / a.m;
    let (lo, hi) = ((1e-2 * mean).ln(), (1e2 * mean).ln());
    let ys: Vec<f64> = (0..a.points).map(|i| (lo + (hi - lo) * i as f64 / (a.points - 1) as f64).exp()).collect();
    let mut columns = Vec::new();
    for n in 0..=a.n_max {
        let mode = eigenmode_params(n, a.m)?.with_coefficients(a.a1, a.a2, c)?;
        let or_nan = |r: Result<f64>| {
            r.unwrap_or_else(|e| {
                log::warn!("mode {n}: residual not available: {e}");
                f64::NAN
            })
        };
        let residual = or_nan(eigenmode_operator_residual(&mode, a.m, &grid));
        // the same exponents tested against L g = +ω g
        let growth = if n == 0 { residual } else { or_nan(eigenvalue_residual(&mode, a.m, &grid, mode.omega)) };
        let pole = if mode.minus_branch_pole() { 1.0 } else { 0.0 };
        table.push_nums(&[
            n as f64,
            mode.omega,
            mode.alpha_plus,
            mode.alpha_minus,
            mode.beta_plus,
            mode.beta_minus,
            pole,
            residual,
            growth,
        ]);
        columns.push(ys.iter().map(|&y| mode.eval(y).unwrap_or(f64::NAN)).collect::<Vec<f64>>());
    }
    let header: Vec<String> =
        std::iter::once("y".to_string()).chain((0..=a.n_max).map(|n| format!("g_{n}"))).collect();
    let mut values = Table::new(&header);
    for (i, &y) in ys.iter().enumerate() {
        let row: Vec<f64> = std::iter::once(y).chain(columns.iter().map(|col| col[i])).collect();
        values.push_nums(&row);
    }
    // n = 0 with the A1 branch off is proportional to the steady state
    let steady = SteadyStateIpdf::unshifted(a.m, c)?;
    let g0 = eigenmode_params(0, a.m)?.with_coefficients(0.0, 1.0, c)?;
    let norm = c * lgamma(a.m + 1.0)?.exp();
    let mut max_rel: f64 = 0.0;
    for &y in &ys {
        let f = steady.density(y)?;
        if f > 0.0 {
            max_rel = max_rel.max((g0.eval(y)? / norm - f).abs() / f);
        }
    }
    out.table("modes.csv", &table)?;
    out.table("mode_values.csv", &values)?;
    out.json("recovery.json", &RecoveryReport { m: a.m, c, max_relative_error: max_rel })
}
