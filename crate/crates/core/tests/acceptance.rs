//! Acceptance suite. Every test prints one `PASS`/`FAIL` line for its
//! criterion (written straight to stdout so it shows without
//! `--nocapture`) and then asserts.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use netrand::assignment::{AssignmentMechanism, TreatmentVector};
use netrand::conditioning::{
    build_strata, relative_frequency, select_observed_focal, Conditioner, ConditioningConfig,
};
use netrand::data::Dataset;
use netrand::exposure::{compute_exposures, Comparator, ExposureMapping, ExposureValue};
use netrand::fixtures;
use netrand::inference::{
    empirical_pvalue, run_oracle_test, run_permutation_variant, run_ss_test, Instance, StatKind, TestSpec,
};
use netrand::nullspec::{science_table, Imputed, NuisanceKey, NuisanceParams, NullFamily, NullSpec, Provenance};
use netrand::rng::{tag, SeedStream};
use netrand::simulation::{
    generate_regular_graph, rate_se, run_table, simulate_dataset, Dgp, RateRow, SimTechnique, TableId, TablePlan,
};
use netrand::stats::ts_stratum;
use netrand::Graph;
use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, TestRunner};
use rand::Rng;

const SEED: u64 = 20_240_601;

fn line(criterion: u32, ok: bool, text: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[{verdict}] criterion {criterion}: {text}");
    let _ = out.flush();
}

fn row(rows: &[RateRow], tech: SimTechnique, sigma: f64) -> &RateRow {
    rows.iter()
        .find(|r| r.technique == tech && r.sigma_tau == sigma)
        .expect("row present")
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn table_one_normal() -> Vec<RateRow> {
    let mut plan = TablePlan::standard(TableId::T1);
    plan.dgps = vec![Dgp::Normal];
    plan.base.techniques = vec![SimTechnique::Oracle, SimTechnique::ConfidenceInterval];
    run_table(TableId::T1, &plan, SEED).unwrap().rows
}

#[test]
fn criterion_01_02_03_04_table_one_and_two() {
    let rows = table_one_normal();
    let o = row(&rows, SimTechnique::Oracle, 0.0);
    assert_eq!(o.failures, 0, "{:?}", o.first_failure);

    // 1: per-exposure size and family-wise error.
    let (p0, p1, fwer) = (o.rates["pi=0"], o.rates["pi=1"], o.fwer.unwrap());
    let ok1 = within(p0, 0.050, 0.022) && within(p1, 0.050, 0.022) && within(fwer, 0.096, 0.03);
    line(
        1,
        ok1,
        &format!("table 1 oracle size pi=0 {p0:.3}, pi=1 {p1:.3} (0.050 +- 0.022); fwer {fwer:.3} (0.096 +- 0.03); {} reps", o.completed),
    );

    // 2: combined statistic.
    let mut plan = TablePlan::standard(TableId::T2);
    plan.dgps = vec![Dgp::Normal];
    plan.sigmas = vec![0.0];
    plan.base.techniques = vec![SimTechnique::Oracle];
    let t2 = run_table(TableId::T2, &plan, SEED).unwrap().rows;
    let c = t2[0].rates["combined"];
    let ok2 = t2[0].failures == 0 && within(c, 0.048, 0.022);
    line(2, ok2, &format!("table 2 oracle size {c:.3} (0.048 +- 0.022); {} reps", t2[0].completed));

    // 3: power along sigma, compared in the pi=0 column.
    let targets = [(0.5, 0.472), (1.0, 0.850), (1.5, 0.962), (2.0, 0.996)];
    let mut ok3 = true;
    let mut desc = Vec::new();
    let mut prev: Option<(f64, usize)> = None;
    for (sigma, target) in targets {
        let r = row(&rows, SimTechnique::Oracle, sigma);
        let p = r.rates["pi=0"];
        ok3 &= within(p, target, 0.05);
        if let Some((q, n)) = prev {
            let se = (rate_se(p, r.completed).powi(2) + rate_se(q, n).powi(2)).sqrt();
            ok3 &= p >= q - 2.0 * se;
        }
        prev = Some((p, r.completed));
        desc.push(format!("{sigma}: {p:.3} vs {target}"));
    }
    line(3, ok3, &format!("oracle power (pi=0) {} (+- 0.05, monotone within 2 SE)", desc.join(", ")));

    // 4: grid technique is no larger than the oracle and its p-values are
    // max(grid) + gamma in every run.
    let ci = row(&rows, SimTechnique::ConfidenceInterval, 0.0);
    let mut ok4 = ci.failures == 0;
    let mut desc = Vec::new();
    for cell in ["pi=0", "pi=1"] {
        let (a, b) = (ci.rates[cell], o.rates[cell]);
        let se = (rate_se(a, ci.completed).powi(2) + rate_se(b, o.completed).powi(2)).sqrt();
        ok4 &= a <= b + 2.0 * se;
        desc.push(format!("{cell} ci {a:.3} vs oracle {b:.3}"));
    }
    let violations: usize = rows
        .iter()
        .filter(|r| r.technique == SimTechnique::ConfidenceInterval)
        .map(|r| r.grid_identity_violations.unwrap_or(usize::MAX))
        .sum();
    ok4 &= violations == 0;
    line(
        4,
        ok4,
        &format!("{}; p = max(grid) + gamma violated in {violations} runs", desc.join(", ")),
    );
    assert!(ok1 && ok2 && ok3 && ok4);
}

#[test]
fn criterion_05_sample_split_convergence() {
    let mut plan = TablePlan::standard(TableId::Fig2);
    plan.base.reps = 500;
    let rows = run_table(TableId::Fig2, &plan, SEED).unwrap().rows;
    let rates: Vec<(usize, f64, usize)> = rows
        .iter()
        .map(|r| (r.n_units, r.rates["combined"], r.completed))
        .collect();
    let mut ok = rows.iter().all(|r| r.failures == 0);
    for w in rates.windows(2) {
        let se = (rate_se(w[0].1, w[0].2).powi(2) + rate_se(w[1].1, w[1].2).powi(2)).sqrt();
        ok &= w[1].1 <= w[0].1 + 2.0 * se;
    }
    let last = rates.last().unwrap();
    ok &= (last.1 - 0.05).abs() <= 2.0 * rate_se(0.05, last.2);
    let desc: Vec<String> = rates.iter().map(|(n, r, _)| format!("N={n}: {r:.3}")).collect();
    line(
        5,
        ok,
        &format!("ss log-normal combined size {} (nonincreasing, last within 2 SE of 0.05)", desc.join(", ")),
    );
    assert!(ok);
}

#[test]
fn criterion_06_table_five() {
    let mut plan = TablePlan::standard(TableId::T5);
    plan.dgps = vec![Dgp::Normal];
    plan.sigmas = vec![0.0];
    plan.base.techniques = vec![SimTechnique::Oracle];
    let rows = run_table(TableId::T5, &plan, SEED).unwrap().rows;
    let r = &rows[0];
    // Reference order (pi, x) = (0,0), (1,0), (0,1), (1,1).
    let targets = [
        ("pi=0,x=0", 0.044),
        ("pi=1,x=0", 0.052),
        ("pi=0,x=1", 0.044),
        ("pi=1,x=1", 0.045),
    ];
    let mut ok = r.failures == 0;
    let mut desc = Vec::new();
    for (cell, target) in targets {
        let p = r.rates[cell];
        ok &= within(p, target, 0.025);
        desc.push(format!("{cell} {p:.3} vs {target}"));
    }
    let fwer = r.fwer.unwrap();
    ok &= within(fwer, 0.173, 0.04);
    line(6, ok, &format!("{}; fwer {fwer:.3} (0.173 +- 0.04)", desc.join(", ")));
    assert!(ok);
}

#[test]
fn criterion_07_science_table_fixture() {
    let fx = fixtures::example_one();
    let pi = compute_exposures(&fx.mapping, fx.dataset.treatment(), &fx.graph).unwrap();
    let pi_raw: Vec<u32> = pi.iter().map(|v| v.0).collect();
    let t_new = fixtures::EXAMPLE_ONE_PERMUTED;
    let pi_new = compute_exposures(&fx.mapping, &t_new, &fx.graph).unwrap();
    let pi_new_raw: Vec<u32> = pi_new.iter().map(|v| v.0).collect();

    let tau = 0.75;
    let null = NullSpec::new(NullFamily::ConstantAll, NuisanceParams::constant(tau, Provenance::Oracle));
    let table = science_table(&null, &fx.dataset, &pi, &t_new, &pi_new).unwrap();
    let y = |k: usize| k as f64;
    let expected = [
        Imputed::Value(y(1) + tau),
        Imputed::NotImputable,
        Imputed::Value(y(3) + tau),
        Imputed::NotImputable,
        Imputed::NotImputable,
        Imputed::Value(y(6) - tau),
        Imputed::NotImputable,
        Imputed::NotImputable,
        Imputed::NotImputable,
        Imputed::Value(y(10)),
    ];
    let strata = build_strata(&fx.dataset, &pi, &fx.mapping.values(), false).unwrap();
    let s0 = strata.iter().find(|s| s.exposure == ExposureValue(0)).unwrap();
    let r = relative_frequency(&t_new, &pi_new, s0, 1).unwrap();
    let cfg = ConditioningConfig::default();
    let mech = AssignmentMechanism::complete_like(fx.dataset.treatment());
    let cond = Conditioner::new(&fx.graph, &fx.mapping, &mech, vec![s0.clone()], cfg).unwrap();
    let accepted = cond.evaluate(&t_new).unwrap().accepted();

    let ok = pi_raw == [1, 0, 1, 0, 0, 0, 1, 1, 1, 0]
        && pi_new_raw == [1, 1, 1, 1, 1, 0, 0, 0, 0, 0]
        && table == expected
        && r == 0.0
        && !accepted;
    line(
        7,
        ok,
        &format!("exposures {pi_raw:?}, new exposures {pi_new_raw:?}, imputed column matches: {}, R(1, t~, pi=0) = {r}, accepted: {accepted}", table == expected),
    );
    assert!(ok);
}

struct Toy {
    name: &'static str,
    n: usize,
    edges: Vec<(usize, usize)>,
    t: Vec<u8>,
    y: Vec<f64>,
    threshold: f64,
    strict: bool,
    family: NullFamily,
    taus: [f64; 2],
    statistic: StatKind,
    epsilon: f64,
}

fn toys() -> Vec<Toy> {
    let ex = fixtures::EXAMPLE_ONE_EDGES.to_vec();
    let ex_t = fixtures::EXAMPLE_ONE_TREATMENT.to_vec();
    let ex_y: Vec<f64> = (1..=10).map(|v| v as f64).collect();
    let mut rng = SeedStream::new(77).rng();
    let noisy = |rng: &mut netrand::rng::StreamRng, n: usize| -> Vec<f64> {
        (0..n).map(|_| rng.gen::<f64>() * 4.0).collect()
    };
    let reg_a = generate_regular_graph(12, 3, &mut SeedStream::new(11).rng()).unwrap();
    let reg_a_edges: Vec<(usize, usize)> = reg_a.edges().collect();
    let y12a = noisy(&mut rng, 12);
    let y12b = noisy(&mut rng, 12);
    vec![
        Toy {
            name: "example graph, per exposure",
            n: 10,
            edges: ex.clone(),
            t: ex_t.clone(),
            y: ex_y.clone(),
            threshold: 0.5,
            strict: false,
            family: NullFamily::ConstantAll,
            taus: [1.0, 1.0],
            statistic: StatKind::Multiple,
            epsilon: 0.1,
        },
        Toy {
            name: "example graph, combined",
            n: 10,
            edges: ex,
            t: ex_t,
            y: ex_y,
            threshold: 0.5,
            strict: false,
            family: NullFamily::ConstantAll,
            taus: [-0.5, -0.5],
            statistic: StatKind::Combined,
            epsilon: 0.1,
        },
        Toy {
            name: "3-regular on 12, exposure-specific effects",
            n: 12,
            edges: reg_a_edges.clone(),
            t: vec![1, 1, 0, 0, 1, 1, 0, 0, 0, 1, 1, 0],
            y: y12a,
            threshold: 0.5,
            strict: false,
            family: NullFamily::ConstantByExposure,
            taus: [0.5, -0.3],
            statistic: StatKind::Multiple,
            epsilon: 0.1,
        },
        Toy {
            name: "3-regular on 12, combined",
            n: 12,
            edges: reg_a_edges,
            t: vec![1, 0, 0, 0, 1, 0, 1, 0, 1, 0, 1, 1],
            y: y12b,
            threshold: 0.5,
            strict: true,
            family: NullFamily::ConstantAll,
            taus: [0.7, 0.7],
            statistic: StatKind::Combined,
            epsilon: 0.1,
        },
    ]
}

struct ToyOutcome {
    support_ok: bool,
    focal_ok: bool,
    pvalue_ok: bool,
    summary: String,
}

fn check_toy(toy: &Toy, seed: u64) -> ToyOutcome {
    let b = 2000;
    let graph = Graph::new(toy.n, &toy.edges).unwrap();
    let dataset = Dataset::new(toy.y.clone(), TreatmentVector::new(toy.t.clone()).unwrap(), None).unwrap();
    let cmp = if toy.strict {
        Comparator::StrictGreater
    } else {
        Comparator::GreaterOrEqual
    };
    let mapping = ExposureMapping::fraction_threshold(toy.threshold, cmp);
    let mech = AssignmentMechanism::complete_like(&toy.t);
    let instance = Instance {
        graph: &graph,
        dataset: &dataset,
        mapping: &mapping,
        mechanism: &mech,
    };
    let cfg = ConditioningConfig {
        epsilon: toy.epsilon,
        ..ConditioningConfig::default()
    };
    let spec = TestSpec {
        family: toy.family.clone(),
        statistic: toy.statistic,
        conditioning: cfg,
        b,
        alpha: 0.05,
    };
    let values = mapping.values();
    let nuisance: BTreeMap<NuisanceKey, f64> = toy
        .family
        .keys(&values, 0)
        .into_iter()
        .map(|k| (k, toy.taus[k.exposure.map_or(0, |v| v.0 as usize)]))
        .collect();
    let null = NullSpec::new(toy.family.clone(), NuisanceParams::new(nuisance, Provenance::Oracle));
    let report = run_oracle_test(instance, &spec, &null, seed).unwrap();

    // Reference quantities from plain data.
    let pi_obs = common::exposures(toy.n, &toy.edges, &toy.t, toy.threshold, toy.strict);
    let brute_strata: Vec<common::BruteStratum> = [0u32, 1]
        .iter()
        .map(|&v| common::BruteStratum {
            exposure: v,
            members: (0..toy.n).filter(|&i| pi_obs[i] == v).collect(),
        })
        .filter(|s| !s.members.is_empty())
        .collect();
    let groups: Vec<Vec<usize>> = match toy.statistic {
        StatKind::Multiple => (0..brute_strata.len()).map(|k| vec![k]).collect(),
        StatKind::Combined => vec![(0..brute_strata.len()).collect()],
    };
    let all = common::all_assignments(toy.n, toy.t.iter().filter(|&&v| v == 1).count());
    let crate_strata: Vec<_> = build_strata(
        &dataset,
        &compute_exposures(&mapping, dataset.treatment(), &graph).unwrap(),
        &values,
        false,
    )
    .unwrap()
    .into_iter()
    .filter(|s| !s.members.is_empty())
    .collect();

    let mut support_ok = true;
    let mut focal_ok = true;
    let mut pvalue_ok = true;
    let mut parts = Vec::new();
    for (g, idx) in groups.iter().enumerate() {
        let bs: Vec<common::BruteStratum> = idx.iter().map(|&k| brute_strata[k].clone()).collect();
        let enumerated: HashMap<Vec<u8>, Vec<Vec<usize>>> = all
            .iter()
            .filter_map(|t| {
                let pi = common::exposures(toy.n, &toy.edges, t, toy.threshold, toy.strict);
                common::accept(&bs, &pi, t, toy.epsilon, 2).map(|f| (t.clone(), f))
            })
            .collect();

        let chosen: Vec<_> = idx.iter().map(|&k| crate_strata[k].clone()).collect();
        let cond = Conditioner::new(&graph, &mapping, &mech, chosen.clone(), cfg).unwrap();
        let set = cond.sample(b, SeedStream::new(seed).child(tag::DRAWS).child(g as u64)).unwrap();
        let mut seen = BTreeSet::new();
        for d in &set.draws {
            match enumerated.get(&d.t) {
                None => support_ok = false,
                Some(f) => focal_ok &= *f == d.focal,
            }
            seen.insert(d.t.clone());
        }
        // With at least eight expected hits per element, a missed element is
        // vanishingly unlikely.
        if b as f64 / enumerated.len() as f64 >= 8.0 {
            support_ok &= seen.len() == enumerated.len();
        }

        let fobs = select_observed_focal(
            &chosen,
            &set.draws,
            &toy.t,
            None,
            SeedStream::new(seed).child(tag::OBSERVED_FOCAL).child(g as u64),
        )
        .unwrap();
        let weights: Vec<f64> = bs.iter().map(|s| s.members.len() as f64 / toy.n as f64).collect();
        let combine = |vals: &[f64]| -> f64 {
            if vals.len() == 1 {
                vals[0]
            } else {
                vals.iter().zip(&weights).map(|(v, w)| v * w).sum()
            }
        };
        let t_obs_stat = combine(
            &fobs
                .per_stratum
                .iter()
                .map(|u| common::stat(&toy.y, &toy.t, u))
                .collect::<Vec<_>>(),
        );
        let stat_at = |t: &[u8], focal: &[Vec<usize>]| -> f64 {
            let vals: Vec<f64> = focal
                .iter()
                .zip(&bs)
                .map(|(units, s)| {
                    let tau = toy.taus[s.exposure as usize];
                    let y: Vec<f64> = (0..toy.n).map(|i| common::impute(toy.y[i], toy.t[i], t[i], tau)).collect();
                    common::stat(&y, t, units)
                })
                .collect();
            combine(&vals)
        };
        let tol = 1e-9 * t_obs_stat.abs().max(1.0);
        let exact: Vec<f64> = enumerated.iter().map(|(t, f)| stat_at(t, f)).collect();
        let m = exact.len() as f64;
        let lo = exact.iter().filter(|&&s| s > t_obs_stat + tol).count() as f64 / m;
        let hi = exact.iter().filter(|&&s| s >= t_obs_stat - tol).count() as f64 / m;
        let sampled = report.groups[g].pvalue;
        let mid = 0.5 * (lo + hi);
        let se = (mid * (1.0 - mid) / b as f64).sqrt().max(1.0 / b as f64);
        pvalue_ok &= sampled >= lo - 4.0 * se && sampled <= hi + 4.0 * se;
        // The crate's draw statistics agree with the reference on the sampled draws.
        let brute_sampled: Vec<f64> = set.draws.iter().map(|d| stat_at(&d.t, &d.focal)).collect();
        let p_ref = empirical_pvalue(t_obs_stat, &brute_sampled);
        pvalue_ok &= (p_ref - sampled).abs() <= 2.0 / b as f64;
        parts.push(format!(
            "{}: |C|={} seen={} exact p in [{lo:.3}, {hi:.3}] sampled {sampled:.3}",
            report.groups[g].key,
            enumerated.len(),
            seen.len()
        ));
    }
    ToyOutcome {
        support_ok,
        focal_ok,
        pvalue_ok,
        summary: format!("{} ({})", toy.name, parts.join("; ")),
    }
}

#[test]
fn criterion_08_enumeration_oracle() {
    let mut ok = true;
    let mut desc = Vec::new();
    for (k, toy) in toys().iter().enumerate() {
        let r = check_toy(toy, 900 + k as u64);
        let this = r.support_ok && r.focal_ok && r.pvalue_ok;
        if !this {
            desc.push(format!(
                "{} [support {}, focal {}, pvalue {}]",
                r.summary, r.support_ok, r.focal_ok, r.pvalue_ok
            ));
        } else {
            desc.push(r.summary);
        }
        ok &= this;
    }
    line(8, ok, &format!("B=2000 against full enumeration: {}", desc.join(" | ")));
    assert!(ok);
}

/// Random small instance: Erdős–Rényi graph without isolated units, half
/// treated, uniform outcomes.
type RandomInstance = (Graph, Vec<(usize, usize)>, Vec<u8>, Vec<f64>);

fn random_instance(seed: u64, n: usize) -> RandomInstance {
    let mut rng = SeedStream::new(seed).rng();
    let mut edges = Vec::new();
    for i in 0..n {
        edges.push((i, (i + 1) % n));
        for j in i + 2..n {
            if rng.gen::<f64>() < 3.0 / n as f64 && !(i == 0 && j == n - 1) {
                edges.push((i, j));
            }
        }
    }
    let mech = AssignmentMechanism::complete(n, n / 2).unwrap();
    let t = mech.draw(&mut rng).into_inner();
    let y = (0..n).map(|_| rng.gen::<f64>() * 10.0 - 5.0).collect();
    (Graph::new(n, &edges).unwrap(), edges, t, y)
}

fn property_suite() -> Vec<(&'static str, Result<(), String>)> {
    let cfg = PtConfig {
        cases: 128,
        failure_persistence: None,
        ..PtConfig::default()
    };
    let mut results = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut(&mut TestRunner) -> Result<(), String>| {
        let mut runner = TestRunner::new_with_rng(cfg.clone(), proptest::test_runner::TestRng::deterministic_rng(cfg.rng_algorithm));
        results.push((name, f(&mut runner)));
    };
    let data = (2usize..6, 2usize..6).prop_flat_map(|(n1, n0)| {
        (
            proptest::collection::vec(-50.0f64..50.0, n1 + n0),
            Just(n1),
        )
    });
    let arms = |y: &[f64], n1: usize| -> Vec<u8> { (0..y.len()).map(|i| (i < n1) as u8).collect() };
    let all = |n: usize| vec![true; n];

    run("arm swap", &mut |r| {
        r.run(&data, |(y, n1)| {
            let t = arms(&y, n1);
            let flip: Vec<u8> = t.iter().map(|v| 1 - v).collect();
            let a = ts_stratum(&y, &t, &all(y.len()), "c").unwrap().value;
            let b = ts_stratum(&y, &flip, &all(y.len()), "c").unwrap().value;
            prop_assert!(a == b || (a - b).abs() <= 1e-9 * a.abs());
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    run("scaling", &mut |r| {
        r.run(&(data.clone(), 0.01f64..100.0), |((y, n1), c)| {
            let t = arms(&y, n1);
            let scaled: Vec<f64> = y.iter().map(|v| v * c).collect();
            let a = ts_stratum(&y, &t, &all(y.len()), "c").unwrap().value;
            let b = ts_stratum(&scaled, &t, &all(y.len()), "c").unwrap().value;
            prop_assert!(!a.is_finite() || (a - b).abs() <= 1e-6 * a.abs());
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    run("one-arm translation", &mut |r| {
        r.run(&(data.clone(), -100.0f64..100.0), |((y, n1), c)| {
            let t = arms(&y, n1);
            let moved: Vec<f64> = y.iter().zip(&t).map(|(v, &a)| v + c * a as f64).collect();
            let a = ts_stratum(&y, &t, &all(y.len()), "c").unwrap().value;
            let b = ts_stratum(&moved, &t, &all(y.len()), "c").unwrap().value;
            prop_assert!(!a.is_finite() || (a - b).abs() <= 1e-6 * a.abs());
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    run("p-value range", &mut |r| {
        r.run(&(10usize..24, any::<u64>()), |(n, seed)| {
            let n = n & !1;
            let (g, _, t, y) = random_instance(seed, n);
            let ds = Dataset::new(y, TreatmentVector::new(t.clone()).unwrap(), None).unwrap();
            let mapping = ExposureMapping::fraction_threshold(0.5, Comparator::GreaterOrEqual);
            let mech = AssignmentMechanism::complete_like(&t);
            let spec = TestSpec {
                family: NullFamily::ConstantAll,
                statistic: StatKind::Combined,
                conditioning: ConditioningConfig {
                    epsilon: 0.05,
                    max_attempts_per_accept: 2000,
                    min_arm_units: 2,
                },
                b: 19,
                alpha: 0.05,
            };
            let null = NullSpec::new(NullFamily::ConstantAll, NuisanceParams::constant(1.0, Provenance::Oracle));
            let inst = Instance {
                graph: &g,
                dataset: &ds,
                mapping: &mapping,
                mechanism: &mech,
            };
            if let Ok(rep) = run_oracle_test(inst, &spec, &null, seed) {
                for g in &rep.groups {
                    prop_assert!((0.0..=1.0).contains(&g.pvalue));
                    prop_assert!((g.pvalue * 19.0 - (g.pvalue * 19.0).round()).abs() < 1e-9);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    run("imputation involution", &mut |r| {
        r.run(&(10usize..24, any::<u64>(), -5.0f64..5.0), |(n, seed, tau)| {
            let (g, _, t, y) = random_instance(seed, n);
            let ds = Dataset::new(y.clone(), TreatmentVector::new(t.clone()).unwrap(), None).unwrap();
            let mapping = ExposureMapping::fraction_threshold(0.5, Comparator::GreaterOrEqual);
            let pi = compute_exposures(&mapping, &t, &g).unwrap();
            let mech = AssignmentMechanism::complete_like(&t);
            let t_new = mech.draw(&mut SeedStream::new(seed ^ 1).rng());
            let pi_new = compute_exposures(&mapping, &t_new, &g).unwrap();
            let null = NullSpec::new(NullFamily::ConstantAll, NuisanceParams::constant(tau, Provenance::Oracle));
            let forward = science_table(&null, &ds, &pi, &t_new, &pi_new).unwrap();
            for i in 0..n {
                if let Imputed::Value(v) = forward[i] {
                    let back = null.impute_outcome(v, t_new[i], pi_new[i], t[i], pi[i], None).unwrap();
                    prop_assert!(matches!(back, Imputed::Value(b) if (b - y[i]).abs() <= 1e-9 * (1.0 + y[i].abs())));
                } else {
                    prop_assert!(pi[i] != pi_new[i]);
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    run("focal within super-focal", &mut |r| {
        r.run(&(12usize..30, any::<u64>()), |(n, seed)| {
            let (g, edges, t, y) = random_instance(seed, n);
            let ds = Dataset::new(y, TreatmentVector::new(t.clone()).unwrap(), None).unwrap();
            let mapping = ExposureMapping::fraction_threshold(0.5, Comparator::GreaterOrEqual);
            let pi = compute_exposures(&mapping, &t, &g).unwrap();
            let strata: Vec<_> = build_strata(&ds, &pi, &mapping.values(), false)
                .unwrap()
                .into_iter()
                .filter(|s| !s.members.is_empty())
                .collect();
            let mech = AssignmentMechanism::complete_like(&t);
            let cfg = ConditioningConfig {
                epsilon: 0.01,
                max_attempts_per_accept: 500,
                min_arm_units: 1,
            };
            let cond = Conditioner::new(&g, &mapping, &mech, strata.clone(), cfg).unwrap();
            if let Ok(set) = cond.sample(10, SeedStream::new(seed)) {
                for d in &set.draws {
                    let pi_new = common::exposures(n, &edges, &d.t, 0.5, false);
                    for (s, focal) in strata.iter().zip(&d.focal) {
                        for &i in focal {
                            prop_assert!(s.members.contains(&i));
                            prop_assert_eq!(pi_new[i], s.exposure.0);
                        }
                    }
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    run("identity permutation", &mut |r| {
        r.run(&(12usize..30, any::<u64>(), 0.0f64..0.4), |(n, seed, eps)| {
            let (g, edges, t, y) = random_instance(seed, n);
            let ds = Dataset::new(y, TreatmentVector::new(t.clone()).unwrap(), None).unwrap();
            let mapping = ExposureMapping::fraction_threshold(0.5, Comparator::GreaterOrEqual);
            let pi = compute_exposures(&mapping, &t, &g).unwrap();
            let strata: Vec<_> = build_strata(&ds, &pi, &mapping.values(), false)
                .unwrap()
                .into_iter()
                .filter(|s| !s.members.is_empty())
                .collect();
            let mech = AssignmentMechanism::complete_like(&t);
            let cfg = ConditioningConfig {
                epsilon: eps,
                max_attempts_per_accept: 10,
                min_arm_units: 2,
            };
            let cond = Conditioner::new(&g, &mapping, &mech, strata.clone(), cfg).unwrap();
            let ev = cond.evaluate(&t).unwrap();
            let pi_raw = common::exposures(n, &edges, &t, 0.5, false);
            let bs: Vec<common::BruteStratum> = strata
                .iter()
                .map(|s| common::BruteStratum {
                    exposure: s.exposure.0,
                    members: s.members.clone(),
                })
                .collect();
            let expected = common::accept(&bs, &pi_raw, &t, eps, 2);
            prop_assert_eq!(ev.accepted(), expected.is_some());
            for (s, focal) in strata.iter().zip(&ev.focal) {
                prop_assert_eq!(&s.members, focal);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    run("seed determinism", &mut |r| {
        r.run(&(any::<u64>(),), |(seed,)| {
            let fx = fixtures::example_one();
            let mech = AssignmentMechanism::complete_like(fx.dataset.treatment());
            let inst = Instance {
                graph: &fx.graph,
                dataset: &fx.dataset,
                mapping: &fx.mapping,
                mechanism: &mech,
            };
            let spec = TestSpec {
                family: NullFamily::ConstantAll,
                statistic: StatKind::Multiple,
                conditioning: ConditioningConfig {
                    epsilon: 0.1,
                    ..ConditioningConfig::default()
                },
                b: 29,
                alpha: 0.05,
            };
            let null = NullSpec::new(NullFamily::ConstantAll, NuisanceParams::constant(0.5, Provenance::Oracle));
            let a = run_oracle_test(inst, &spec, &null, seed).map(|r| serde_json::to_string(&r).unwrap());
            let b = run_oracle_test(inst, &spec, &null, seed).map(|r| serde_json::to_string(&r).unwrap());
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
                _ => prop_assert!(false, "one run failed, the other did not"),
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
    });
    results
}

#[test]
fn criterion_09_property_suite() {
    let results = property_suite();
    let failed: Vec<String> = results
        .iter()
        .filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}")))
        .collect();
    let names: Vec<&str> = results.iter().map(|(n, _)| *n).collect();
    let ok = failed.is_empty();
    line(
        9,
        ok,
        &if ok {
            format!("{} properties hold on fuzzed inputs ({})", names.len(), names.join(", "))
        } else {
            failed.join("; ")
        },
    );
    assert!(ok, "{failed:?}");
}

#[test]
fn criterion_10_permutation_variance() {
    let plan = TablePlan::standard(TableId::T2);
    let mut cfg = plan.base.clone();
    cfg.b = 5000;
    let graph = generate_regular_graph(cfg.n_units, cfg.degree, &mut SeedStream::new(SEED).child(tag::GRAPH).rng()).unwrap();
    let ds = simulate_dataset(&cfg, &graph, SeedStream::new(SEED).child(tag::REPLICATION)).unwrap();
    let mapping = cfg.mapping();
    let mech = AssignmentMechanism::complete(cfg.n_units, cfg.n_units / 2).unwrap();
    let inst = Instance {
        graph: &graph,
        dataset: &ds,
        mapping: &mapping,
        mechanism: &mech,
    };
    let spec = cfg.test_spec();
    let rand = run_ss_test(inst, &spec, SEED).unwrap();
    let perm = run_permutation_variant(inst, &spec, SEED).unwrap();
    let (vr, vp) = (rand.groups[0].null.variance, perm.groups[0].null.variance);
    let ok = vp <= vr;
    line(
        10,
        ok,
        &format!("null variance at B=5000: permutation {vp:.5} <= randomization {vr:.5}"),
    );
    assert!(ok);
}
