//! Randomization-test engines.
//!
//! All engines share one layout. The strata are split into test groups: one
//! group per stratum for the multiple (per-cell) statistics, a single group
//! over every stratum for the combined statistic. Each group gets its own
//! conditioning set and observed focal selection. For every accepted draw
//! and stratum the focal outcomes are summarized by arm, separating units
//! that keep their observed arm from units that switch, so the statistic
//! at any hypothesized effect is a closed-form update of those summaries.

pub mod ci;
pub mod estimate;
pub mod multiple;
pub mod quantile;
pub mod split;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assignment::AssignmentMechanism;
use crate::conditioning::{
    build_strata, epsilon_feasibility, select_observed_focal, Conditioner, ConditioningConfig,
    ConditioningDiagnostics, ConditioningTarget, Stratum,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exposure::{compute_exposures, ExposureMapping, ExposureValue, ExposureVector};
use crate::graph::Graph;
use crate::nullspec::{NuisanceParams, NullFamily, NullSpec};
use crate::rng::{tag, SeedStream};
use crate::stats::{serialize_extended, ts_combined, ts_units, variance_ratio, Moments};

pub use ci::{CiConfig, GridEvaluation};
pub use estimate::{difference_in_means, estimate_tau_plugin, DiffInMeans};
pub use multiple::{adjust_multiple, Adjustment, Decisions};
pub use quantile::normal_quantile;
pub use split::{balanced_split, run_permutation_variant, run_ss_test, Split};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKind {
    /// One statistic and p-value per stratum.
    Multiple,
    /// A single weighted sum over all strata.
    Combined,
}

/// Everything about a test except the data and the nuisance technique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub family: NullFamily,
    pub statistic: StatKind,
    pub conditioning: ConditioningConfig,
    pub b: usize,
    pub alpha: f64,
}

impl TestSpec {
    pub fn validate(&self) -> Result<()> {
        self.conditioning.validate()?;
        if self.b == 0 {
            return Err(Error::InvalidConfig("b must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.conditioning.min_arm_units < 2 {
            return Err(Error::InvalidConfig(
                "tests need at least 2 focal units per arm (min_arm_units >= 2)".into(),
            ));
        }
        if let NullFamily::GeneralContrast { .. } = self.family {
            return Err(Error::InvalidConfig("no test engine exists for general contrast nulls".into()));
        }
        Ok(())
    }
}

/// The observed experiment.
#[derive(Debug, Clone, Copy)]
pub struct Instance<'a> {
    pub graph: &'a Graph,
    pub dataset: &'a Dataset,
    pub mapping: &'a ExposureMapping,
    pub mechanism: &'a AssignmentMechanism,
}

impl<'a> Instance<'a> {
    fn validate(&self) -> Result<()> {
        let n = self.dataset.n_units();
        for (what, len) in [("graph", self.graph.n_units()), ("assignment mechanism", self.mechanism.n_units())] {
            if len != n {
                return Err(Error::LengthMismatch {
                    what,
                    got: len,
                    expected: n,
                });
            }
        }
        if !self.mechanism.supports(self.dataset.treatment()) {
            return Err(Error::InfeasibleCounts(
                "the observed assignment is outside the support of the design".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum Technique {
    Oracle,
    PlugIn,
    ConfidenceInterval { gamma: f64, grid_size: usize, grid_budget: usize },
    SampleSplit,
    Permutation,
}

/// Fraction of draws whose statistic is at least the observed one.
pub fn empirical_pvalue(observed: f64, draws: &[f64]) -> f64 {
    if draws.is_empty() {
        return f64::NAN;
    }
    draws.iter().filter(|&&s| s >= observed).count() as f64 / draws.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NullSummary {
    pub draws: usize,
    /// Mean over finite draw statistics.
    pub mean: f64,
    /// Sample variance over finite draw statistics.
    pub variance: f64,
    pub infinite: usize,
}

pub fn summarize_null(stats: &[f64]) -> NullSummary {
    let mut m = Moments::default();
    let mut infinite = 0;
    for &s in stats {
        if s.is_finite() {
            m.push(s);
        } else {
            infinite += 1;
        }
    }
    NullSummary {
        draws: stats.len(),
        mean: if m.n > 0 { m.mean } else { f64::NAN },
        variance: m.variance().unwrap_or(f64::NAN),
        infinite,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    /// A stratum label for per-cell tests, `combined` otherwise.
    pub key: String,
    pub strata: Vec<String>,
    pub pvalue: f64,
    #[serde(serialize_with = "serialize_extended")]
    pub observed_stat: f64,
    /// Effect used per stratum; absent for the grid technique.
    pub tau: Option<BTreeMap<String, f64>>,
    pub observed_focal: usize,
    pub observed_focal_retries: usize,
    pub conditioning: Option<ConditioningDiagnostics>,
    pub null: NullSummary,
    pub ci: Option<ci::GroupGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub technique: Technique,
    pub family: String,
    pub statistic: StatKind,
    pub alpha: f64,
    pub b: usize,
    pub per_cell_pvalues: BTreeMap<String, f64>,
    pub combined_pvalue: Option<f64>,
    pub decisions: BTreeMap<String, Decisions>,
    pub nuisance: Option<BTreeMap<String, f64>>,
    pub groups: Vec<GroupReport>,
    pub split: Option<split::SplitSummary>,
    pub epsilon_bound: f64,
    pub warnings: Vec<String>,
}

impl TestReport {
    /// Per-cell p-values for multiple tests, the combined one otherwise.
    pub fn headline_pvalues(&self) -> BTreeMap<String, f64> {
        match self.combined_pvalue {
            Some(p) => BTreeMap::from([("combined".to_string(), p)]),
            None => self.per_cell_pvalues.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct ArmParts {
    /// Focal units whose new arm equals their observed arm.
    pub stay: Moments,
    /// Focal units that switched into this arm.
    pub moved: Moments,
}

pub(crate) fn arm_parts(y: &[f64], t_obs: &[u8], t_new: &[u8], units: &[usize]) -> [ArmParts; 2] {
    let mut parts = [ArmParts::default(); 2];
    for &i in units {
        let arm = t_new[i] as usize;
        if t_obs[i] == t_new[i] {
            parts[arm].stay.push(y[i]);
        } else {
            parts[arm].moved.push(y[i]);
        }
    }
    parts
}

/// Statistic of one stratum when outcomes are imputed with effect `tau`:
/// units moving into arm 1 gain `tau`, units moving into arm 0 lose it.
pub(crate) fn stratum_stat(parts: &[ArmParts; 2], tau: f64) -> f64 {
    let v1 = parts[1].stay.merged_shifted(&parts[1].moved, tau).variance();
    let v0 = parts[0].stay.merged_shifted(&parts[0].moved, -tau).variance();
    match (v1, v0) {
        (Some(v1), Some(v0)) => variance_ratio(v1, v0),
        _ => f64::NAN,
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Group {
    pub key: String,
    /// Indices into the prepared strata.
    pub strata: Vec<usize>,
    pub weights: Vec<f64>,
    pub observed_stat: f64,
    /// `[draw][stratum in group]`.
    pub draws: Vec<Vec<[ArmParts; 2]>>,
    pub observed_focal: usize,
    pub observed_focal_retries: usize,
    pub diagnostics: Option<ConditioningDiagnostics>,
}

impl Group {
    pub fn combine(&self, per_stratum: &[f64]) -> f64 {
        if per_stratum.len() == 1 {
            per_stratum[0]
        } else {
            crate::stats::combine_unchecked(per_stratum, &self.weights)
        }
    }

    /// Draw statistics with effect `taus[k]` for the group's `k`-th stratum.
    pub fn draw_stats(&self, taus: &[f64]) -> Vec<f64> {
        let mut buf = vec![0.0; self.strata.len()];
        self.draws
            .iter()
            .map(|d| {
                for (k, parts) in d.iter().enumerate() {
                    buf[k] = stratum_stat(parts, taus[k]);
                }
                self.combine(&buf)
            })
            .collect()
    }

    fn check_draw_sizes(&self, strata: &[Stratum]) -> Result<()> {
        for d in &self.draws {
            for (k, parts) in d.iter().enumerate() {
                for arm in 0..2u8 {
                    let p = &parts[arm as usize];
                    let count = p.stay.n + p.moved.n;
                    if count < 2 {
                        return Err(Error::TooFewUnits {
                            cell: strata[self.strata[k]].label.clone(),
                            arm,
                            count,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Strata, conditioning sets and observed statistics, ready to be
/// evaluated at any nuisance value. Oracle, plug-in and grid evaluations of
/// one prepared test share draws and observed focal units.
#[derive(Debug, Clone)]
pub struct PreparedTest<'a> {
    pub(crate) instance: Instance<'a>,
    pub(crate) spec: TestSpec,
    pub(crate) exposures: ExposureVector,
    pub(crate) values: Vec<ExposureValue>,
    pub(crate) strata: Vec<Stratum>,
    pub(crate) groups: Vec<Group>,
    pub(crate) epsilon_bound: f64,
    pub(crate) warnings: Vec<String>,
}

type Layout = (Vec<(String, Vec<usize>)>, Vec<String>);

/// Test groups as `(key, stratum indices)`. Strata nobody occupies under
/// the observed assignment cannot be tested and are skipped with a warning.
pub(crate) fn group_layout(spec: &TestSpec, strata: &[Stratum]) -> Result<Layout> {
    let warnings = strata
        .iter()
        .filter(|s| s.members.is_empty())
        .map(|s| format!("{}: no unit has this observed exposure; stratum skipped", s.label))
        .collect();
    let groups = match spec.statistic {
        StatKind::Multiple => strata
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.members.is_empty())
            .map(|(i, s)| {
                let target = match s.level {
                    None => ConditioningTarget::PerExposure { exposure: s.exposure },
                    Some(level) => ConditioningTarget::PerCell {
                        exposure: s.exposure,
                        level,
                    },
                };
                debug_assert_eq!(target.select(strata).ok(), Some(vec![i]));
                (s.label.clone(), vec![i])
            })
            .collect(),
        StatKind::Combined => {
            let target = if spec.family.uses_covariate() {
                ConditioningTarget::AllCells
            } else {
                ConditioningTarget::AllExposures
            };
            let mut idx = target.select(strata)?;
            idx.retain(|&i| !strata[i].members.is_empty());
            vec![("combined".to_string(), idx)]
        }
    };
    Ok((groups, warnings))
}

impl<'a> PreparedTest<'a> {
    /// Samples the conditioning sets and observed focal units. With a mask,
    /// focal sets and the observed selection are restricted to masked units.
    pub fn new(instance: Instance<'a>, spec: &TestSpec, seed: SeedStream, mask: Option<&[bool]>) -> Result<Self> {
        spec.validate()?;
        instance.validate()?;
        let ds = instance.dataset;
        let exposures = compute_exposures(instance.mapping, ds.treatment(), instance.graph)?;
        let values = instance.mapping.values();
        let by_cov = spec.family.uses_covariate();
        let strata = build_strata(ds, &exposures, &values, by_cov)?;
        let epsilon_bound = epsilon_feasibility(ds, &exposures, &values, by_cov)?;
        let (layout, mut warnings) = group_layout(spec, &strata)?;
        if spec.conditioning.epsilon >= epsilon_bound {
            warnings.push(format!(
                "epsilon {} is not below the smallest observed (arm, stratum) share {epsilon_bound}",
                spec.conditioning.epsilon
            ));
        }
        let n = ds.n_units() as f64;
        let y = ds.outcomes();
        let t_obs = ds.treatment();

        let mut groups = Vec::new();
        for (g, (key, idx)) in layout.into_iter().enumerate() {
            let chosen: Vec<Stratum> = idx.iter().map(|&i| strata[i].clone()).collect();
            let mut cond = Conditioner::new(
                instance.graph,
                instance.mapping,
                instance.mechanism,
                chosen.clone(),
                spec.conditioning,
            )?;
            if let Some(m) = mask {
                cond = cond.with_mask(m)?;
            }
            let set = cond.sample(spec.b, seed.child(tag::DRAWS).child(g as u64))?;
            let focal = select_observed_focal(
                &chosen,
                &set.draws,
                t_obs,
                mask,
                seed.child(tag::OBSERVED_FOCAL).child(g as u64),
            )?;
            let weights: Vec<f64> = chosen.iter().map(|s| s.members.len() as f64 / n).collect();
            let observed: Vec<f64> = chosen
                .iter()
                .zip(&focal.per_stratum)
                .map(|(s, units)| ts_units(y, t_obs, units, &s.label).map(|v| v.value))
                .collect::<Result<_>>()?;
            let observed_stat = if observed.len() == 1 {
                observed[0]
            } else {
                ts_combined(&observed, &weights)?
            };
            let draws = set
                .draws
                .iter()
                .map(|d| d.focal.iter().map(|units| arm_parts(y, t_obs, &d.t, units)).collect())
                .collect();
            let group = Group {
                key,
                strata: idx,
                weights,
                observed_stat,
                draws,
                observed_focal: focal.size,
                observed_focal_retries: focal.retries,
                diagnostics: Some(set.diagnostics),
            };
            group.check_draw_sizes(&strata)?;
            groups.push(group);
        }
        Ok(PreparedTest {
            instance,
            spec: spec.clone(),
            exposures,
            values,
            strata,
            groups,
            epsilon_bound,
            warnings,
        })
    }

    pub fn exposures(&self) -> &ExposureVector {
        &self.exposures
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    fn covariate_labels(&self) -> Option<&'a [String]> {
        self.instance.dataset.covariate().map(|c| c.labels())
    }

    fn group_taus(&self, group: &Group, nuisance: &NuisanceParams) -> Result<Vec<f64>> {
        let null = NullSpec::new(self.spec.family.clone(), nuisance.clone());
        group
            .strata
            .iter()
            .map(|&s| null.tau(self.strata[s].exposure, self.strata[s].level))
            .collect()
    }

    /// p-values with the effect fixed at `nuisance`.
    pub fn evaluate(&self, technique: Technique, nuisance: &NuisanceParams) -> Result<TestReport> {
        let mut reports = Vec::with_capacity(self.groups.len());
        for g in &self.groups {
            let taus = self.group_taus(g, nuisance)?;
            let stats = g.draw_stats(&taus);
            let tau_map = g
                .strata
                .iter()
                .zip(&taus)
                .map(|(&s, &v)| (self.strata[s].label.clone(), v))
                .collect();
            reports.push(self.group_report(g, empirical_pvalue(g.observed_stat, &stats), &stats, Some(tau_map), None));
        }
        let mut warnings = self.warnings.clone();
        if technique == Technique::PlugIn {
            warnings.push(
                "plug-in p-values treat the estimated effect as known and are not valid tests".into(),
            );
        }
        Ok(self.assemble(technique, Some(nuisance.labelled(self.covariate_labels())), reports, warnings))
    }

    pub fn oracle(&self, null: &NullSpec) -> Result<TestReport> {
        if null.family != self.spec.family {
            return Err(Error::InvalidConfig("null family differs from the prepared test".into()));
        }
        let n_levels = self.instance.dataset.covariate().map_or(0, |c| c.n_levels());
        null.validate(&self.values, n_levels)?;
        self.evaluate(Technique::Oracle, &null.nuisance)
    }

    pub fn plugin(&self) -> Result<TestReport> {
        let est = estimate_tau_plugin(self.instance.dataset, &self.exposures, &self.spec.family, &self.values)?;
        self.evaluate(Technique::PlugIn, &est)
    }

    pub(crate) fn group_report(
        &self,
        g: &Group,
        pvalue: f64,
        stats: &[f64],
        tau: Option<BTreeMap<String, f64>>,
        grid: Option<ci::GroupGrid>,
    ) -> GroupReport {
        GroupReport {
            key: g.key.clone(),
            strata: g.strata.iter().map(|&s| self.strata[s].label.clone()).collect(),
            pvalue,
            observed_stat: g.observed_stat,
            tau,
            observed_focal: g.observed_focal,
            observed_focal_retries: g.observed_focal_retries,
            conditioning: g.diagnostics.clone(),
            null: summarize_null(stats),
            ci: grid,
        }
    }

    pub(crate) fn assemble(
        &self,
        technique: Technique,
        nuisance: Option<BTreeMap<String, f64>>,
        groups: Vec<GroupReport>,
        warnings: Vec<String>,
    ) -> TestReport {
        assemble_report(&self.spec, technique, nuisance, groups, self.epsilon_bound, warnings)
    }
}

pub(crate) fn assemble_report(
    spec: &TestSpec,
    technique: Technique,
    nuisance: Option<BTreeMap<String, f64>>,
    groups: Vec<GroupReport>,
    epsilon_bound: f64,
    warnings: Vec<String>,
) -> TestReport {
    let (per_cell_pvalues, combined_pvalue) = match spec.statistic {
        StatKind::Multiple => (groups.iter().map(|g| (g.key.clone(), g.pvalue)).collect(), None),
        StatKind::Combined => (BTreeMap::new(), groups.first().map(|g| g.pvalue)),
    };
    let decisions = if per_cell_pvalues.is_empty() {
        BTreeMap::new()
    } else {
        Adjustment::ALL
            .iter()
            .map(|&m| (m.name().to_string(), adjust_multiple(&per_cell_pvalues, spec.alpha, m)))
            .collect()
    };
    TestReport {
        technique,
        family: spec.family.short_name().to_string(),
        statistic: spec.statistic,
        alpha: spec.alpha,
        b: spec.b,
        per_cell_pvalues,
        combined_pvalue,
        decisions,
        nuisance,
        groups,
        split: None,
        epsilon_bound,
        warnings,
    }
}

pub fn run_oracle_test(instance: Instance<'_>, spec: &TestSpec, null: &NullSpec, seed: u64) -> Result<TestReport> {
    PreparedTest::new(instance, spec, SeedStream::new(seed), None)?.oracle(null)
}

pub fn run_plugin_test(instance: Instance<'_>, spec: &TestSpec, seed: u64) -> Result<TestReport> {
    PreparedTest::new(instance, spec, SeedStream::new(seed), None)?.plugin()
}

pub fn run_ci_test(instance: Instance<'_>, spec: &TestSpec, ci: &CiConfig, seed: u64) -> Result<TestReport> {
    PreparedTest::new(instance, spec, SeedStream::new(seed), None)?.ci(ci)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exposure::Comparator;
    use crate::nullspec::{NuisanceKey, Provenance};
    use crate::simulation;

    #[test]
    fn pvalue_examples() {
        assert!((empirical_pvalue(1.0, &[2.0, 1.0, 0.5]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(empirical_pvalue(5.0, &[2.0, 1.0, 0.5]), 0.0);
        assert_eq!(empirical_pvalue(0.5, &[2.0, 1.0, 0.5]), 1.0);
        assert_eq!(empirical_pvalue(f64::INFINITY, &[f64::INFINITY, 1.0]), 0.5);
    }

    #[test]
    fn stratum_stat_matches_direct_imputation() {
        let y = [1.0, 2.5, -0.5, 4.0, 3.0, 0.0, 2.0];
        let t_obs = [1, 0, 1, 0, 1, 0, 0];
        let t_new = [0, 1, 1, 0, 0, 1, 1];
        let units = [0, 1, 2, 3, 4, 5, 6];
        let tau = 1.3;
        let parts = arm_parts(&y, &t_obs, &t_new, &units);
        let imputed: Vec<f64> = (0..7).map(|i| y[i] + tau * (t_new[i] as f64 - t_obs[i] as f64)).collect();
        let direct = ts_units(&imputed, &t_new, &units, "c").unwrap().value;
        assert!((stratum_stat(&parts, tau) - direct).abs() < 1e-12);
    }

    fn small_instance(seed: u64) -> (Graph, Dataset, ExposureMapping, AssignmentMechanism) {
        let mut rng = SeedStream::new(seed).rng();
        let g = simulation::generate_regular_graph(60, 4, &mut rng).unwrap();
        let mech = AssignmentMechanism::complete(60, 30).unwrap();
        let t = mech.draw(&mut rng);
        let y: Vec<f64> = (0..60).map(|i| ((i * 37) % 11) as f64 * 0.3 + t[i] as f64).collect();
        let ds = Dataset::new(y, t, None).unwrap();
        (g, ds, ExposureMapping::fraction_threshold(0.5, Comparator::StrictGreater), mech)
    }

    fn spec(statistic: StatKind, family: NullFamily) -> TestSpec {
        TestSpec {
            family,
            statistic,
            conditioning: ConditioningConfig {
                epsilon: 0.1,
                ..Default::default()
            },
            b: 60,
            alpha: 0.05,
        }
    }

    #[test]
    fn constant_outcomes_give_pvalue_one() {
        let (g, ds, m, mech) = small_instance(1);
        let ds = Dataset::new(vec![3.0; 60], ds.treatment().clone(), None).unwrap();
        let inst = Instance {
            graph: &g,
            dataset: &ds,
            mapping: &m,
            mechanism: &mech,
        };
        let null = NullSpec::new(NullFamily::ConstantAll, NuisanceParams::constant(0.0, Provenance::Oracle));
        let r = run_oracle_test(inst, &spec(StatKind::Multiple, NullFamily::ConstantAll), &null, 3).unwrap();
        assert!(r.per_cell_pvalues.values().all(|&p| p == 1.0));
        let r = run_plugin_test(inst, &spec(StatKind::Combined, NullFamily::ConstantAll), 3).unwrap();
        assert_eq!(r.combined_pvalue, Some(1.0));
    }

    #[test]
    fn family_degeneracy() {
        let (g, ds, m, mech) = small_instance(2);
        let inst = Instance {
            graph: &g,
            dataset: &ds,
            mapping: &m,
            mechanism: &mech,
        };
        let tau = 0.7;
        let all = NullSpec::new(NullFamily::ConstantAll, NuisanceParams::constant(tau, Provenance::Oracle));
        let by_pi = NullSpec::new(
            NullFamily::ConstantByExposure,
            NuisanceParams::new(
                BTreeMap::from([
                    (NuisanceKey::exposure(ExposureValue(0)), tau),
                    (NuisanceKey::exposure(ExposureValue(1)), tau),
                ]),
                Provenance::Oracle,
            ),
        );
        for kind in [StatKind::Multiple, StatKind::Combined] {
            let a = PreparedTest::new(inst, &spec(kind, NullFamily::ConstantAll), SeedStream::new(5), None).unwrap();
            let b = PreparedTest::new(inst, &spec(kind, NullFamily::ConstantByExposure), SeedStream::new(5), None)
                .unwrap();
            for (ga, gb) in a.groups.iter().zip(&b.groups) {
                let sa = ga.draw_stats(&vec![tau; ga.strata.len()]);
                let sb = gb.draw_stats(&vec![tau; gb.strata.len()]);
                assert_eq!(sa, sb);
            }
            let ra = a.oracle(&all).unwrap();
            let rb = b.oracle(&by_pi).unwrap();
            assert_eq!(ra.headline_pvalues(), rb.headline_pvalues());
        }
    }

    #[test]
    fn reports_are_reproducible() {
        let (g, ds, m, mech) = small_instance(3);
        let inst = Instance {
            graph: &g,
            dataset: &ds,
            mapping: &m,
            mechanism: &mech,
        };
        let s = spec(StatKind::Multiple, NullFamily::ConstantAll);
        let a = serde_json::to_string(&run_plugin_test(inst, &s, 8).unwrap()).unwrap();
        let b = serde_json::to_string(&run_plugin_test(inst, &s, 8).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn observed_assignment_must_be_supported() {
        let (g, ds, m, _) = small_instance(4);
        let mech = AssignmentMechanism::complete(60, 10).unwrap();
        let inst = Instance {
            graph: &g,
            dataset: &ds,
            mapping: &m,
            mechanism: &mech,
        };
        let err = run_plugin_test(inst, &spec(StatKind::Multiple, NullFamily::ConstantAll), 1);
        assert!(matches!(err, Err(Error::InfeasibleCounts(_))));
    }
}
