//! Monte Carlo harness: regular networks, the outcome model and size/power
//! tables.
//!
//! Outcome model, with `ε_i(π)` of mean `π` and variance one:
//!
//! ```text
//! Y_i(0, π) = ε_i(π)
//! Y_i(1, π) = Y_i(0, π) + (1 + ψ0·π + ψ1·x_i) + σ_τ·Y_i(0, π)
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::AssignmentMechanism;
use crate::conditioning::ConditioningConfig;
use crate::data::{Covariate, Dataset};
use crate::error::{Error, Result};
use crate::exposure::{compute_exposures, Comparator, ExposureMapping};
use crate::graph::Graph;
use crate::inference::{
    adjust_multiple, run_permutation_variant, run_ss_test, Adjustment, CiConfig, Instance, PreparedTest, StatKind,
    TestReport, TestSpec,
};
use crate::nullspec::{NuisanceParams, NullFamily, NullSpec, Provenance};
use crate::rng::{tag, SeedStream};

const GRAPH_RESTARTS: usize = 1_000;
const PAIRING_TRIES: usize = 200;

/// Uniform-ish random `degree`-regular simple graph by random stub pairing.
/// Stubs are joined one pair at a time; when no admissible pair turns up
/// after a bounded number of tries the whole pairing restarts.
pub fn generate_regular_graph<R: Rng + ?Sized>(n: usize, degree: usize, rng: &mut R) -> Result<Graph> {
    if degree >= n.max(1) || (n * degree) % 2 == 1 {
        return Err(Error::InvalidConfig(format!(
            "no simple {degree}-regular graph on {n} nodes"
        )));
    }
    'restart: for _ in 0..GRAPH_RESTARTS {
        let mut stubs: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat(i).take(degree)).collect();
        let mut adj: Vec<Vec<usize>> = vec![Vec::with_capacity(degree); n];
        let mut edges = Vec::with_capacity(n * degree / 2);
        while !stubs.is_empty() {
            let mut joined = false;
            for _ in 0..PAIRING_TRIES {
                let a = rng.gen_range(0..stubs.len());
                let b = rng.gen_range(0..stubs.len());
                let (u, v) = (stubs[a], stubs[b]);
                if a == b || u == v || adj[u].contains(&v) {
                    continue;
                }
                adj[u].push(v);
                adj[v].push(u);
                edges.push((u, v));
                let (hi, lo) = if a > b { (a, b) } else { (b, a) };
                stubs.swap_remove(hi);
                stubs.swap_remove(lo);
                joined = true;
                break;
            }
            if !joined {
                continue 'restart;
            }
        }
        return Graph::new(n, &edges);
    }
    Err(Error::GenerationBudgetExhausted(GRAPH_RESTARTS))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dgp {
    Normal,
    #[serde(alias = "lognormal")]
    LogNormal,
}

impl Dgp {
    pub fn name(self) -> &'static str {
        match self {
            Dgp::Normal => "normal",
            Dgp::LogNormal => "log_normal",
        }
    }

    /// Zero-mean, unit-variance noise. The log-normal case standardizes
    /// `exp(Z)` by its exact mean `e^{1/2}` and variance `e(e-1)`.
    pub fn standard_noise<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        match self {
            Dgp::Normal => z,
            Dgp::LogNormal => {
                let e = std::f64::consts::E;
                (z.exp() - e.sqrt()) / (e * (e - 1.0)).sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub dgp: Dgp,
    pub psi0: f64,
    pub psi1: f64,
    pub sigma_tau: f64,
}

impl OutcomeModel {
    /// Average effect at `(π, x)`: `1 + ψ0·π + ψ1·x`.
    pub fn base_effect(&self, pi: f64, x: f64) -> f64 {
        1.0 + self.psi0 * pi + self.psi1 * x
    }

    /// Observed outcomes for assignment `t` with exposures `pi` and
    /// covariate values `x`.
    pub fn observed_outcomes<R: Rng + ?Sized>(&self, t: &[u8], pi: &[u32], x: &[u32], rng: &mut R) -> Vec<f64> {
        (0..t.len())
            .map(|i| {
                let p = pi[i] as f64;
                let y0 = self.dgp.standard_noise(rng) + p;
                let effect = self.base_effect(p, x[i] as f64) + self.sigma_tau * y0;
                y0 + t[i] as f64 * effect
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimTechnique {
    Oracle,
    #[serde(alias = "plugin")]
    PlugIn,
    #[serde(alias = "ci")]
    ConfidenceInterval,
    #[serde(alias = "ss")]
    SampleSplit,
    Permutation,
}

impl SimTechnique {
    pub const TABLE: [SimTechnique; 4] = [
        SimTechnique::Oracle,
        SimTechnique::PlugIn,
        SimTechnique::ConfidenceInterval,
        SimTechnique::SampleSplit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SimTechnique::Oracle => "oracle",
            SimTechnique::PlugIn => "plug_in",
            SimTechnique::ConfidenceInterval => "ci",
            SimTechnique::SampleSplit => "ss",
            SimTechnique::Permutation => "permutation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_units: usize,
    pub degree: usize,
    pub model: OutcomeModel,
    pub family: NullFamily,
    pub statistic: StatKind,
    pub epsilon: f64,
    pub b: usize,
    pub reps: usize,
    pub alpha: f64,
    pub techniques: Vec<SimTechnique>,
    pub threshold: f64,
    pub comparator: Comparator,
    pub ci: CiConfig,
    pub max_attempts_per_accept: usize,
    pub min_arm_units: usize,
    /// Draw a new network for every replication instead of one per run.
    pub graph_per_rep: bool,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if (self.n_units * self.degree) % 2 == 1 || self.degree >= self.n_units {
            return Err(Error::InvalidConfig(format!(
                "no {}-regular graph on {} units",
                self.degree, self.n_units
            )));
        }
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be positive".into()));
        }
        if self.techniques.is_empty() {
            return Err(Error::InvalidConfig("no techniques selected".into()));
        }
        self.test_spec().validate()?;
        self.ci.validate()
    }

    pub fn test_spec(&self) -> TestSpec {
        TestSpec {
            family: self.family.clone(),
            statistic: self.statistic,
            conditioning: ConditioningConfig {
                epsilon: self.epsilon,
                max_attempts_per_accept: self.max_attempts_per_accept,
                min_arm_units: self.min_arm_units,
            },
            b: self.b,
            alpha: self.alpha,
        }
    }

    pub fn mapping(&self) -> ExposureMapping {
        ExposureMapping::fraction_threshold(self.threshold, self.comparator)
    }

    /// The true nuisance values implied by the model's average effects.
    pub fn oracle_null(&self) -> NullSpec {
        let values = self.mapping().values();
        let keys = self.family.keys(&values, 2);
        let params = keys
            .into_iter()
            .map(|k| {
                let pi = k.exposure.map_or(0.0, |v| v.0 as f64);
                let x = k.covariate.map_or(0.0, |l| l as f64);
                (k, self.model.base_effect(pi, x))
            })
            .collect();
        NullSpec::new(self.family.clone(), NuisanceParams::new(params, Provenance::Oracle))
    }
}

/// Binary covariate by unit parity, labelled `0` and `1`.
pub fn parity_covariate(n: usize) -> Vec<u32> {
    (0..n).map(|i| (i % 2) as u32).collect()
}

/// One simulated experiment.
pub fn simulate_dataset(cfg: &SimConfig, graph: &Graph, seed: SeedStream) -> Result<Dataset> {
    let n = cfg.n_units;
    let mech = AssignmentMechanism::complete(n, n / 2)?;
    let t = mech.draw(&mut seed.child(tag::TREATMENT).rng());
    let pi = compute_exposures(&cfg.mapping(), &t, graph)?;
    let pi_raw: Vec<u32> = pi.iter().map(|v| v.0).collect();
    let x = parity_covariate(n);
    let y = cfg
        .model
        .observed_outcomes(&t, &pi_raw, &x, &mut seed.child(tag::NOISE).rng());
    let labels: Vec<String> = x.iter().map(|v| v.to_string()).collect();
    Dataset::new(y, t, Some(Covariate::from_labels(&labels)))
}

/// Outcome of one replication for one technique.
#[derive(Debug, Clone, PartialEq)]
pub enum RepResult {
    Done {
        pvalues: BTreeMap<String, f64>,
        /// For the grid technique: whether every reported p-value equals
        /// the stored grid maximum plus `γ`, clipped at one.
        grid_identity: Option<bool>,
        null_variance: Vec<f64>,
    },
    Failed(String),
}

fn summarize(report: &TestReport) -> RepResult {
    let grid_identity = report.groups.iter().all(|g| g.ci.is_none()).then_some(()).map_or_else(
        || {
            Some(report.groups.iter().all(|g| {
                let grid = g.ci.as_ref().expect("grid technique");
                let max = grid
                    .evaluations
                    .iter()
                    .map(|e| e.pvalue)
                    .fold(f64::NEG_INFINITY, f64::max);
                g.pvalue == (max + grid.gamma).min(1.0)
            }))
        },
        |_| None,
    );
    RepResult::Done {
        pvalues: report.headline_pvalues(),
        grid_identity,
        null_variance: report.groups.iter().map(|g| g.null.variance).collect(),
    }
}

/// Runs every configured technique on one replication. Oracle, plug-in and
/// grid techniques share one set of draws.
pub fn run_replication(cfg: &SimConfig, graph: &Graph, seed: SeedStream) -> Result<BTreeMap<SimTechnique, RepResult>> {
    let ds = simulate_dataset(cfg, graph, seed)?;
    let mapping = cfg.mapping();
    let mech = AssignmentMechanism::complete(cfg.n_units, cfg.n_units / 2)?;
    let instance = Instance {
        graph,
        dataset: &ds,
        mapping: &mapping,
        mechanism: &mech,
    };
    let spec = cfg.test_spec();
    let test_seed = seed.child(tag::TARGET);
    let mut out = BTreeMap::new();
    let shared = cfg.techniques.iter().any(|t| {
        matches!(
            t,
            SimTechnique::Oracle | SimTechnique::PlugIn | SimTechnique::ConfidenceInterval
        )
    });
    let prepared = if shared {
        Some(PreparedTest::new(instance, &spec, test_seed, None))
    } else {
        None
    };
    for &tech in &cfg.techniques {
        let result = match tech {
            SimTechnique::Oracle | SimTechnique::PlugIn | SimTechnique::ConfidenceInterval => {
                match prepared.as_ref().expect("prepared above") {
                    Err(e) => Err(e.to_string()),
                    Ok(p) => match tech {
                        SimTechnique::Oracle => p.oracle(&cfg.oracle_null()),
                        SimTechnique::PlugIn => p.plugin(),
                        _ => p.ci(&cfg.ci),
                    }
                    .map_err(|e| e.to_string()),
                }
            }
            SimTechnique::SampleSplit => run_ss_test(instance, &spec, test_seed.value()).map_err(|e| e.to_string()),
            SimTechnique::Permutation => {
                run_permutation_variant(instance, &spec, test_seed.value()).map_err(|e| e.to_string())
            }
        };
        out.insert(
            tech,
            match result {
                Ok(r) => summarize(&r),
                Err(msg) => RepResult::Failed(msg),
            },
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub technique: SimTechnique,
    pub dgp: Dgp,
    pub sigma_tau: f64,
    pub n_units: usize,
    pub reps: usize,
    pub completed: usize,
    pub failures: usize,
    /// Rejection rate `Pr(p < α)` per reported p-value.
    pub rates: BTreeMap<String, f64>,
    /// Share of replications with any marginal rejection (multiple tests).
    pub fwer: Option<f64>,
    /// Replications where the grid p-value differed from `max + γ`.
    pub grid_identity_violations: Option<usize>,
    pub mean_null_variance: f64,
    pub first_failure: Option<String>,
}

/// Monte Carlo standard error of a rejection rate `p` over `reps` runs.
pub fn rate_se(p: f64, reps: usize) -> f64 {
    (p * (1.0 - p) / reps as f64).sqrt()
}

/// Runs `cfg.reps` replications and tabulates rejection rates per technique.
///
/// Replication `r` uses stream `seed.child(REPLICATION).child(r)`, so runs
/// that differ only in `σ_τ` or technique share treatments and noise.
pub fn run_replications(cfg: &SimConfig, seed: SeedStream) -> Result<Vec<RateRow>> {
    cfg.validate()?;
    let fixed_graph = if cfg.graph_per_rep {
        None
    } else {
        Some(generate_regular_graph(
            cfg.n_units,
            cfg.degree,
            &mut seed.child(tag::GRAPH).rng(),
        )?)
    };
    let rep_stream = seed.child(tag::REPLICATION);
    let results: Vec<Result<BTreeMap<SimTechnique, RepResult>>> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            let s = rep_stream.child(r as u64);
            match &fixed_graph {
                Some(g) => run_replication(cfg, g, s),
                None => {
                    let g = generate_regular_graph(cfg.n_units, cfg.degree, &mut s.child(tag::GRAPH).rng())?;
                    run_replication(cfg, &g, s)
                }
            }
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for &tech in &cfg.techniques {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        let mut any = 0usize;
        let mut completed = 0usize;
        let mut violations = 0usize;
        let mut has_grid = false;
        let mut var_sum = 0.0;
        let mut var_n = 0usize;
        let mut first_failure = None;
        for rep in &results {
            match &rep[&tech] {
                RepResult::Failed(msg) => {
                    first_failure.get_or_insert_with(|| msg.clone());
                }
                RepResult::Done {
                    pvalues,
                    grid_identity,
                    null_variance,
                } => {
                    completed += 1;
                    for (k, &p) in pvalues {
                        *counts.entry(k.clone()).or_insert(0) += (p < cfg.alpha) as usize;
                    }
                    if adjust_multiple(pvalues, cfg.alpha, Adjustment::UnadjustedAny).any_reject {
                        any += 1;
                    }
                    if let Some(ok) = grid_identity {
                        has_grid = true;
                        violations += (!ok) as usize;
                    }
                    for v in null_variance.iter().filter(|v| v.is_finite()) {
                        var_sum += v;
                        var_n += 1;
                    }
                }
            }
        }
        let denom = completed.max(1) as f64;
        rows.push(RateRow {
            technique: tech,
            dgp: cfg.model.dgp,
            sigma_tau: cfg.model.sigma_tau,
            n_units: cfg.n_units,
            reps: cfg.reps,
            completed,
            failures: cfg.reps - completed,
            rates: counts.into_iter().map(|(k, c)| (k, c as f64 / denom)).collect(),
            fwer: (cfg.statistic == StatKind::Multiple).then(|| any as f64 / denom),
            grid_identity_violations: has_grid.then_some(violations),
            mean_null_variance: if var_n > 0 { var_sum / var_n as f64 } else { f64::NAN },
            first_failure,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableId {
    #[serde(rename = "1")]
    T1,
    #[serde(rename = "2")]
    T2,
    #[serde(rename = "3")]
    T3,
    #[serde(rename = "4")]
    T4,
    #[serde(rename = "5")]
    T5,
    #[serde(rename = "6")]
    T6,
    Fig2,
}

impl std::str::FromStr for TableId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "1" => TableId::T1,
            "2" => TableId::T2,
            "3" => TableId::T3,
            "4" => TableId::T4,
            "5" => TableId::T5,
            "6" => TableId::T6,
            "fig2" => TableId::Fig2,
            other => return Err(Error::InvalidConfig(format!("unknown table `{other}`"))),
        })
    }
}

impl TableId {
    pub fn name(self) -> &'static str {
        match self {
            TableId::T1 => "1",
            TableId::T2 => "2",
            TableId::T3 => "3",
            TableId::T4 => "4",
            TableId::T5 => "5",
            TableId::T6 => "6",
            TableId::Fig2 => "fig2",
        }
    }
}

/// The grid of runs behind one table: a base configuration plus the
/// `(dgp, σ_τ, N)` combinations to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TablePlan {
    pub base: SimConfig,
    pub dgps: Vec<Dgp>,
    pub sigmas: Vec<f64>,
    pub sizes: Vec<usize>,
}

impl TablePlan {
    pub fn standard(table: TableId) -> Self {
        let (family, statistic, psi0, psi1, n, eps, b, sigmas) = match table {
            TableId::T1 | TableId::T2 | TableId::T3 | TableId::T4 | TableId::Fig2 => {
                let (family, psi0) = match table {
                    TableId::T3 | TableId::T4 => (NullFamily::ConstantByExposure, 1.0),
                    _ => (NullFamily::ConstantAll, 0.0),
                };
                let statistic = match table {
                    TableId::T1 | TableId::T3 => StatKind::Multiple,
                    _ => StatKind::Combined,
                };
                let sigmas = if table == TableId::Fig2 {
                    vec![0.0]
                } else {
                    vec![0.0, 0.5, 1.0, 1.5, 2.0]
                };
                (family, statistic, psi0, 0.0, 200, 0.2, 149, sigmas)
            }
            TableId::T5 | TableId::T6 => {
                let statistic = if table == TableId::T5 {
                    StatKind::Multiple
                } else {
                    StatKind::Combined
                };
                (
                    NullFamily::ConstantByExposureAndCovariate,
                    statistic,
                    1.0,
                    1.0,
                    400,
                    0.1,
                    199,
                    vec![0.0, 1.0],
                )
            }
        };
        let (dgps, techniques, sizes) = if table == TableId::Fig2 {
            (vec![Dgp::LogNormal], vec![SimTechnique::SampleSplit], vec![200, 400, 800])
        } else {
            (vec![Dgp::Normal, Dgp::LogNormal], SimTechnique::TABLE.to_vec(), vec![n])
        };
        TablePlan {
            base: SimConfig {
                n_units: n,
                degree: 5,
                model: OutcomeModel {
                    dgp: Dgp::Normal,
                    psi0,
                    psi1,
                    sigma_tau: 0.0,
                },
                family,
                statistic,
                epsilon: eps,
                b,
                reps: 1000,
                alpha: 0.05,
                techniques,
                threshold: 0.5,
                comparator: Comparator::StrictGreater,
                ci: CiConfig::default(),
                max_attempts_per_accept: 10_000,
                min_arm_units: 2,
                graph_per_rep: false,
            },
            dgps,
            sigmas,
            sizes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableResult {
    pub table: String,
    pub plan: TablePlan,
    pub rows: Vec<RateRow>,
}

/// Runs every `(N, dgp, σ_τ)` combination of the plan from one master seed.
/// The network depends only on the seed and `N`; replications of different
/// `σ_τ` share treatments and noise.
pub fn run_table(table: TableId, plan: &TablePlan, seed: u64) -> Result<TableResult> {
    let master = SeedStream::new(seed);
    let mut rows = Vec::new();
    for &n in &plan.sizes {
        for &dgp in &plan.dgps {
            for &sigma in &plan.sigmas {
                let mut cfg = plan.base.clone();
                cfg.n_units = n;
                cfg.model.dgp = dgp;
                cfg.model.sigma_tau = sigma;
                let stream = master.child(n as u64).child(dgp as u64);
                log::info!("table {}: N={n} dgp={} sigma={sigma}", table.name(), dgp.name());
                rows.extend(run_replications(&cfg, stream)?);
            }
        }
    }
    Ok(TableResult {
        table: table.name().to_string(),
        plan: plan.clone(),
        rows,
    })
}

impl TableResult {
    /// Long-format CSV: one line per (row, reported p-value), plus an
    /// `fwer` line for multiple tests.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("table,technique,dgp,sigma_tau,n_units,reps,completed,quantity,rate,se\n");
        for r in &self.rows {
            let mut lines: Vec<(String, f64)> = r.rates.iter().map(|(k, &v)| (k.clone(), v)).collect();
            if let Some(f) = r.fwer {
                lines.push(("fwer".into(), f));
            }
            for (q, v) in lines {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{:.4},{:.4}",
                    self.table,
                    r.technique.name(),
                    r.dgp.name(),
                    r.sigma_tau,
                    r.n_units,
                    r.reps,
                    r.completed,
                    q,
                    v,
                    rate_se(v, r.completed.max(1))
                );
            }
        }
        s
    }

    /// Fixed-width text rendering of the same rows.
    pub fn to_text(&self) -> String {
        let mut s = format!("table {}\n", self.table);
        for r in &self.rows {
            let rates: Vec<String> = r.rates.iter().map(|(k, v)| format!("{k}: {v:.3}")).collect();
            let _ = write!(
                s,
                "{:<12} {:<10} N={:<4} sigma={:<4} {}",
                r.technique.name(),
                r.dgp.name(),
                r.n_units,
                r.sigma_tau,
                rates.join("  ")
            );
            if let Some(f) = r.fwer {
                let _ = write!(s, "  fwer: {f:.3}");
            }
            if r.failures > 0 {
                let _ = write!(s, "  failures: {}", r.failures);
            }
            s.push('\n');
        }
        s
    }
}
