//! Poverty indices against brute-force integration and Monte Carlo, and the
//! Sen axiom suites.

use incomedyn::estimate::MonodFit;
use incomedyn::fpsolve::GridDensity;
use incomedyn::poverty::{
    cd_index_direct, cd_index_model, fgt_banded, fgt_sample, index_series, sen_axiom_check, sen_axiom_suite, Axiom,
    ModelDensity, Perturbation, PovertyIndex, PovertyLine,
};
use incomedyn::stats::mean_and_standard_error;
use incomedyn::survey::{synth_round, Band, BandedDistribution, SynthSpec};
use incomedyn::{Grid, Ipdf};
use proptest::prelude::*;

fn line(z: f64) -> PovertyLine {
    PovertyLine::new(z).unwrap()
}

#[test]
fn sample_indices_by_hand() {
    let f = fgt_sample(&[0.5, 1.0, 2.0, 4.0], line(2.0)).unwrap();
    assert_eq!(f.hci, 0.5);
    assert!((f.pg - (0.75 + 0.5) / 4.0).abs() < 1e-15);
    assert!((f.spg - (0.5625 + 0.25) / 4.0).abs() < 1e-15);
}

fn closed_round() -> BandedDistribution {
    BandedDistribution::new(
        "B",
        2000.0,
        vec![
            Band::closed(0.0, 0.5, 0.1),
            Band::closed(0.5, 1.0, 0.3),
            Band::closed(1.0, 2.0, 0.4),
            Band::closed(2.0, 3.0, 0.15),
            Band::open(3.0, 0.05),
        ],
        "",
    )
    .unwrap()
}

#[test]
fn banded_indices_match_midpoint_integration() {
    let round = closed_round();
    let bands = round.bands().to_vec();
    for z in [0.3, 0.75, 1.0, 1.7, 2.9] {
        // oracle: midpoint rule over the piecewise-uniform density
        let mut acc = [0.0; 3];
        let n = 200_000;
        for b in bands.iter().filter(|b| !b.is_open()) {
            let (lo, hi) = (b.lower, b.upper.unwrap());
            let h = (hi - lo) / n as f64;
            let dens = b.population_share / (hi - lo);
            for i in 0..n {
                let y = lo + (i as f64 + 0.5) * h;
                if y < z {
                    let g = (z - y) / z;
                    acc[0] += dens * h;
                    acc[1] += dens * h * g;
                    acc[2] += dens * h * g * g;
                }
            }
        }
        let f = fgt_banded(&round, line(z)).unwrap();
        assert!((f.hci - acc[0]).abs() < 1e-6, "z = {z}: {} vs {}", f.hci, acc[0]);
        assert!((f.pg - acc[1]).abs() < 1e-6);
        assert!((f.spg - acc[2]).abs() < 1e-6);
    }
}

#[test]
fn model_cd_index_matches_monte_carlo() {
    let d = Ipdf::new(1.6, 1.6, 0.15).unwrap();
    let monod = MonodFit::new(1.0, 0.5).unwrap();
    let exact = cd_index_model(ModelDensity::Steady(&d), &monod).unwrap();
    let draws: Vec<f64> = d.sample(1_000_000, 31).iter().map(|&y| monod.deprivation(y + 0.15)).collect();
    let (mean, se) = mean_and_standard_error(&draws);
    assert!((exact - mean).abs() < 3.0 * se, "{exact} vs {mean} ± {se}");
}

#[test]
fn model_cd_index_matches_income_quadrature() {
    // oracle: Simpson in ln y of CD(y + offset) f(y)
    let d = Ipdf::new(2.3, 1.1, 0.2).unwrap();
    let monod = MonodFit::new(0.8, 0.4).unwrap();
    let (a, b, n) = ((d.mean() * 1e-4).ln(), (d.mean() * 1e8).ln(), 60_000);
    let h = (b - a) / n as f64;
    let g = |s: f64| {
        let y = s.exp();
        monod.deprivation(y + 0.2) * d.density(y).unwrap() * y
    };
    let mut sum = g(a) + g(b);
    for i in 1..n {
        sum += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let oracle = sum * h / 3.0;
    let got = cd_index_model(ModelDensity::Steady(&d), &monod).unwrap();
    assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
}

#[test]
fn grid_density_agrees_with_closed_form() {
    let d = Ipdf::unshifted(1.6, 1.6).unwrap();
    let monod = MonodFit::new(1.0, 0.5).unwrap();
    let grid = Grid::for_params(1.6, 1.6, 2000).unwrap();
    let f = GridDensity::steady_state(grid, &d).unwrap();
    let a = cd_index_model(ModelDensity::Grid { density: &f, offset: 0.0 }, &monod).unwrap();
    let b = cd_index_model(ModelDensity::Steady(&d), &monod).unwrap();
    assert!((a - b).abs() < 1e-5, "{a} vs {b}");
}

#[test]
fn direct_and_banded_model_indices_coincide() {
    let d = Ipdf::new(1.6, 1.6, 0.15).unwrap();
    let mut edges = vec![0.0];
    edges.extend((1..20).map(|i| 0.2 + 0.16 * i as f64));
    edges.push(f64::INFINITY);
    for seed in 0..5 {
        let spec = SynthSpec {
            round_id: "C".into(),
            year: 2000.0,
            edges: edges.clone(),
            n_population: 1_000_000,
            seed,
            monod: Some((0.7, 0.5)),
        };
        let round = synth_round(&d, &spec).unwrap();
        let monod = MonodFit::new(0.7, 0.5).unwrap();
        let direct = cd_index_direct(&round, &monod).unwrap();
        let banded = cd_index_model(ModelDensity::Banded(&round), &monod).unwrap();
        assert!((direct - banded).abs() < 1e-10, "{direct} vs {banded}");
    }
}

#[test]
fn index_series_checks_alignment() {
    let round = closed_round();
    assert!(index_series(&[round], &[], &[], None, line(1.0)).is_err());
}

#[test]
fn single_checks_follow_the_axioms() {
    let incomes = [0.2, 0.5, 0.9, 1.5, 3.0];
    let spg = PovertyIndex::SquaredGap(line(1.0));
    let pcd = PovertyIndex::Deprivation(MonodFit::new(1.0, 1.0).unwrap());
    for idx in [spg, pcd] {
        let r = sen_axiom_check(&incomes, &idx, Perturbation::Reduce { person: 1, delta: 0.1 }).unwrap();
        assert!(r.holds && r.after > r.before);
        let t = sen_axiom_check(&incomes, &idx, Perturbation::Transfer { from: 0, to: 2, delta: 0.05 }).unwrap();
        assert!(t.holds, "{}: {t:?}", idx.name());
    }
    // the donor must be poor and the recipient richer
    let err = sen_axiom_check(&incomes, &spg, Perturbation::Reduce { person: 4, delta: 0.1 });
    assert!(err.is_err());
    assert!(sen_axiom_check(&incomes, &spg, Perturbation::Transfer { from: 2, to: 0, delta: 0.1 }).is_err());
}

#[test]
fn smooth_indices_pass_both_suites() {
    let pcd = PovertyIndex::Deprivation(MonodFit::new(1.0, 0.6).unwrap());
    let spg = PovertyIndex::SquaredGap(line(0.6));
    for idx in [pcd, spg] {
        for axiom in [Axiom::Monotonicity, Axiom::Transfer] {
            let r = sen_axiom_suite(&idx, axiom, 1000, 77).unwrap();
            assert_eq!(r.violations, 0, "{} {axiom:?}: {:?}", idx.name(), r.first_violation);
        }
    }
    let pg = PovertyIndex::PovertyGap(line(0.6));
    assert_eq!(sen_axiom_suite(&pg, Axiom::Monotonicity, 1000, 77).unwrap().violations, 0);
}

#[test]
fn poverty_gap_is_flat_under_transfers_between_the_poor() {
    // donor and recipient both below the line: gaps move by ±δ/z and cancel
    let pg = PovertyIndex::PovertyGap(line(1.0));
    let r = sen_axiom_check(&[0.2, 0.5, 2.0], &pg, Perturbation::Transfer { from: 0, to: 1, delta: 0.1 }).unwrap();
    assert!((r.after - r.before).abs() < 1e-15 && !r.holds);
    let report = sen_axiom_suite(&pg, Axiom::Transfer, 1000, 77).unwrap();
    assert!(report.violations > 0);
    let w = report.first_violation.unwrap();
    assert!((w.check.after - w.check.before).abs() < 1e-12);
}

#[test]
fn headcount_is_insensitive() {
    let hci = PovertyIndex::Headcount(line(0.6));
    for axiom in [Axiom::Monotonicity, Axiom::Transfer] {
        let r = sen_axiom_suite(&hci, axiom, 1000, 77).unwrap();
        assert!(r.violations > 900, "{axiom:?}: {}", r.violations);
    }
}

proptest! {
    #[test]
    fn indices_are_ordered(incomes in prop::collection::vec(0.01f64..5.0, 1..60), z in 0.1f64..4.0) {
        let f = fgt_sample(&incomes, line(z)).unwrap();
        prop_assert!(0.0 <= f.spg && f.spg <= f.pg && f.pg <= f.hci && f.hci <= 1.0);
    }

    #[test]
    fn deprivation_index_falls_with_income(incomes in prop::collection::vec(0.01f64..5.0, 1..60), bump in 0.01f64..1.0) {
        let idx = PovertyIndex::Deprivation(MonodFit::new(1.0, 0.5).unwrap());
        let richer: Vec<f64> = incomes.iter().map(|y| y + bump).collect();
        prop_assert!(idx.eval(&richer).unwrap() < idx.eval(&incomes).unwrap());
    }
}
