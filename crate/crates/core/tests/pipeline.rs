//! End-to-end runs of every technique on simulated experiments.

mod common;

use netrand::config::{run_with_settings, TechniqueName, TestSettings};
use netrand::data::Dataset;
use netrand::exposure::{compute_exposures, exposure_cell_counts, Comparator, ExposureValue};
use netrand::fixtures;
use netrand::inference::StatKind;
use netrand::rng::SeedStream;
use netrand::simulation::{generate_regular_graph, simulate_dataset, TableId, TablePlan};
use netrand::{Error, Graph, NullFamily};

fn experiment(table: TableId, seed: u64) -> (Graph, Dataset, TestSettings) {
    let plan = TablePlan::standard(table);
    let cfg = plan.base;
    let g = generate_regular_graph(cfg.n_units, cfg.degree, &mut SeedStream::new(seed).rng()).unwrap();
    let ds = simulate_dataset(&cfg, &g, SeedStream::new(seed + 1)).unwrap();
    let settings = TestSettings {
        family: cfg.family,
        statistic: cfg.statistic,
        epsilon: cfg.epsilon,
        b: 49,
        tau: Some(1.0),
        ..TestSettings::default()
    };
    (g, ds, settings)
}

#[test]
fn every_technique_runs() {
    let (g, ds, base) = experiment(TableId::T1, 10);
    for technique in [
        TechniqueName::Oracle,
        TechniqueName::PlugIn,
        TechniqueName::ConfidenceInterval,
        TechniqueName::SampleSplit,
        TechniqueName::Permutation,
    ] {
        let s = TestSettings { technique, ..base.clone() };
        let r = run_with_settings(&g, &ds, &s, 4).unwrap();
        assert_eq!(r.per_cell_pvalues.len(), 2, "{technique:?}");
        for p in r.per_cell_pvalues.values() {
            assert!((0.0..=1.0).contains(p));
        }
        if technique == TechniqueName::SampleSplit || technique == TechniqueName::Permutation {
            let split = r.split.as_ref().unwrap();
            assert_eq!(split.estimation_units + split.inference_units, 200);
        }
        if technique == TechniqueName::PlugIn {
            assert!(r.warnings.iter().any(|w| w.contains("plug-in")));
        }
    }
}

#[test]
fn combined_covariate_grid_is_thinned() {
    let (g, ds, base) = experiment(TableId::T6, 20);
    let s = TestSettings {
        technique: TechniqueName::ConfidenceInterval,
        ..base
    };
    assert_eq!(s.statistic, StatKind::Combined);
    let r = run_with_settings(&g, &ds, &s, 5).unwrap();
    let grid = r.groups[0].ci.as_ref().unwrap();
    // Four parameters at 20 points each exceed the default budget.
    assert_eq!(grid.axes.len(), 4);
    assert!(grid.truncated);
    assert_eq!(grid.axes[0].points, 10);
    assert_eq!(grid.evaluations.len(), 10_000);
    let max = grid.evaluations.iter().map(|e| e.pvalue).fold(0.0, f64::max);
    assert_eq!(r.combined_pvalue, Some((max + grid.gamma).min(1.0)));
    assert!(r.warnings.iter().any(|w| w.contains("thinned")));
}

#[test]
fn per_cell_grid_uses_one_axis() {
    let (g, ds, base) = experiment(TableId::T5, 30);
    let s = TestSettings {
        technique: TechniqueName::ConfidenceInterval,
        b: 29,
        ..base
    };
    let r = run_with_settings(&g, &ds, &s, 6).unwrap();
    assert_eq!(r.per_cell_pvalues.len(), 4);
    for grp in &r.groups {
        let grid = grp.ci.as_ref().unwrap();
        assert_eq!(grid.axes.len(), 1);
        assert_eq!(grid.evaluations.len(), 20);
        let a = &grid.axes[0];
        assert_eq!(grid.evaluations[0].tau[0], a.lower);
        assert_eq!(grid.evaluations[19].tau[0], a.upper);
    }
}

#[test]
fn covariate_null_without_covariate_is_rejected() {
    let fx = fixtures::example_one();
    let s = TestSettings {
        family: NullFamily::ConstantByExposureAndCovariate,
        technique: TechniqueName::PlugIn,
        comparator: Comparator::GreaterOrEqual,
        epsilon: 0.1,
        ..TestSettings::default()
    };
    assert!(run_with_settings(&fx.graph, &fx.dataset, &s, 1).is_err());
}

#[test]
fn csv_round_trip_preserves_counts() {
    let fx = fixtures::example_two();
    let mut buf = Vec::new();
    fx.dataset.write_csv(&mut buf).unwrap();
    let back = Dataset::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.outcomes(), fx.dataset.outcomes());
    assert_eq!(back.treatment().as_slice(), fx.dataset.treatment().as_slice());
    let pi = compute_exposures(&fx.mapping, back.treatment(), &fx.graph).unwrap();
    let raw: Vec<u32> = pi.iter().map(|v| v.0).collect();
    let edges: Vec<(usize, usize)> = fx.graph.edges().collect();
    assert_eq!(raw, common::exposures(10, &edges, back.treatment(), 0.5, false));
    let counts = exposure_cell_counts(&pi, back.treatment(), back.covariate_levels(), &fx.mapping.values()).unwrap();
    let c = back.covariate().unwrap();
    let (m, f) = (c.level_of("m").unwrap(), c.level_of("f").unwrap());
    assert_eq!(counts.by_cell[&(ExposureValue(0), m)], 2);
    assert_eq!(counts.by_cell[&(ExposureValue(0), f)], 3);
    assert_eq!(counts.by_cell[&(ExposureValue(1), m)], 3);
    assert_eq!(counts.by_cell[&(ExposureValue(1), f)], 2);
}

#[test]
fn split_too_small_is_infeasible() {
    let fx = fixtures::example_one();
    let s = TestSettings {
        technique: TechniqueName::SampleSplit,
        comparator: Comparator::GreaterOrEqual,
        epsilon: 0.1,
        ..TestSettings::default()
    };
    let e = run_with_settings(&fx.graph, &fx.dataset, &s, 2).unwrap_err();
    assert!(matches!(e, Error::SplitInfeasible(_)), "{e}");
    assert_eq!(e.exit_code(), 3);
}
