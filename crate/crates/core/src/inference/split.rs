//! Sample splitting: estimate the effect on one balanced half, test on the
//! other. Also the permutation variant that shuffles treatment labels within
//! the inference half's super-focal units instead of redrawing the design.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::estimate::estimate_by_key;
use super::{arm_parts, group_layout, Group, Instance, PreparedTest, Technique, TestReport, TestSpec};
use crate::conditioning::{build_strata, epsilon_feasibility, Stratum};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exposure::{compute_exposures, ExposureVector};
use crate::nullspec::{NuisanceParams, Provenance};
use crate::rng::{tag, SeedStream};
use crate::stats::{ts_combined, ts_units};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub estimation: Vec<bool>,
    pub inference: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitSummary {
    pub estimation_units: usize,
    pub inference_units: usize,
    pub estimates: BTreeMap<String, f64>,
}

/// Random half split stratified on `(T, Π_obs[, X])`. Each cell is shuffled
/// and halved; an odd cell's extra unit goes to either half by a coin flip.
pub fn balanced_split(dataset: &Dataset, exposures: &ExposureVector, by_covariate: bool, seed: SeedStream) -> Split {
    let n = dataset.n_units();
    let t = dataset.treatment();
    let mut cells: BTreeMap<(u8, u32, u32), Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let level = if by_covariate {
            dataset.covariate().map_or(0, |c| c.level(i))
        } else {
            0
        };
        cells.entry((t[i], exposures[i].0, level)).or_default().push(i);
    }
    let mut rng = seed.rng();
    let mut estimation = vec![false; n];
    for units in cells.values_mut() {
        units.shuffle(&mut rng);
        let mut take = units.len() / 2;
        if units.len() % 2 == 1 && rng.gen_bool(0.5) {
            take += 1;
        }
        for &i in &units[..take] {
            estimation[i] = true;
        }
    }
    let inference = estimation.iter().map(|&e| !e).collect();
    Split { estimation, inference }
}

struct SplitSetup {
    exposures: ExposureVector,
    split: Split,
    nuisance: NuisanceParams,
    summary: SplitSummary,
}

fn setup(instance: &Instance<'_>, spec: &TestSpec, seed: SeedStream) -> Result<SplitSetup> {
    spec.validate()?;
    instance.validate()?;
    let ds = instance.dataset;
    let exposures = compute_exposures(instance.mapping, ds.treatment(), instance.graph)?;
    let values = instance.mapping.values();
    let by_cov = spec.family.uses_covariate();
    let split = balanced_split(ds, &exposures, by_cov, seed.child(tag::SPLIT));
    let est = estimate_by_key(ds, &exposures, &spec.family, &values, Some(&split.estimation)).map_err(|e| match e {
        Error::EmptyArm { cell, arm } => {
            Error::SplitInfeasible(format!("estimation half has no units with t={arm} in {cell}"))
        }
        other => other,
    })?;
    let t = ds.treatment();
    for st in build_strata(ds, &exposures, &values, by_cov)? {
        if st.members.is_empty() {
            continue;
        }
        let inf: Vec<usize> = st.members.iter().copied().filter(|&i| split.inference[i]).collect();
        let treated = inf.iter().filter(|&&i| t[i] == 1).count();
        if treated < 2 || inf.len() - treated < 2 {
            return Err(Error::SplitInfeasible(format!(
                "inference half of {} has {treated} treated and {} control units",
                st.label,
                inf.len() - treated
            )));
        }
    }
    let labels = ds.covariate().map(|c| c.labels());
    let nuisance = NuisanceParams::new(est.iter().map(|(k, e)| (*k, e.tau_hat)).collect(), Provenance::SplitEstimate);
    let summary = SplitSummary {
        estimation_units: split.estimation.iter().filter(|&&e| e).count(),
        inference_units: split.inference.iter().filter(|&&e| e).count(),
        estimates: nuisance.labelled(labels),
    };
    Ok(SplitSetup {
        exposures,
        split,
        nuisance,
        summary,
    })
}

/// Sample-splitting test. Draws permute the full treatment vector and
/// recompute every exposure; statistics use focal units in the inference
/// half only.
pub fn run_ss_test(instance: Instance<'_>, spec: &TestSpec, seed: u64) -> Result<TestReport> {
    let seed = SeedStream::new(seed);
    let s = setup(&instance, spec, seed)?;
    let prepared = PreparedTest::new(instance, spec, seed, Some(&s.split.inference))?;
    let mut report = prepared.evaluate(Technique::SampleSplit, &s.nuisance)?;
    report.split = Some(s.summary);
    Ok(report)
}

/// Permutation variant: same split and estimate, but the null distribution
/// comes from shuffling treatment labels among each stratum's inference
/// super-focal units, and the observed statistic uses all of them.
pub fn run_permutation_variant(instance: Instance<'_>, spec: &TestSpec, seed: u64) -> Result<TestReport> {
    let seed = SeedStream::new(seed);
    let s = setup(&instance, spec, seed)?;
    let ds = instance.dataset;
    let values = instance.mapping.values();
    let by_cov = spec.family.uses_covariate();
    let strata = build_strata(ds, &s.exposures, &values, by_cov)?;
    let n = ds.n_units() as f64;
    let y = ds.outcomes();
    let t_obs = ds.treatment();

    let (layout, warnings) = group_layout(spec, &strata)?;
    let mut groups = Vec::new();
    for (g, (key, idx)) in layout.into_iter().enumerate() {
        let chosen: Vec<&Stratum> = idx.iter().map(|&i| &strata[i]).collect();
        let units: Vec<Vec<usize>> = chosen
            .iter()
            .map(|st| st.members.iter().copied().filter(|&i| s.split.inference[i]).collect())
            .collect();
        let weights: Vec<f64> = chosen.iter().map(|st| st.members.len() as f64 / n).collect();
        let observed: Vec<f64> = chosen
            .iter()
            .zip(&units)
            .map(|(st, u)| ts_units(y, t_obs, u, &st.label).map(|v| v.value))
            .collect::<Result<_>>()?;
        let observed_stat = if observed.len() == 1 {
            observed[0]
        } else {
            ts_combined(&observed, &weights)?
        };
        let stream = seed.child(tag::PERMUTATION).child(g as u64);
        let draws = (0..spec.b)
            .into_par_iter()
            .map(|b| {
                let mut rng = stream.child(b as u64).rng();
                let mut t_new = t_obs.to_vec();
                let mut parts = Vec::with_capacity(units.len());
                for u in &units {
                    let mut labels: Vec<u8> = u.iter().map(|&i| t_obs[i]).collect();
                    labels.shuffle(&mut rng);
                    for (&i, &l) in u.iter().zip(&labels) {
                        t_new[i] = l;
                    }
                    parts.push(arm_parts(y, t_obs, &t_new, u));
                }
                parts
            })
            .collect();
        groups.push(Group {
            key,
            strata: idx,
            weights,
            observed_stat,
            draws,
            observed_focal: units.iter().map(Vec::len).sum(),
            observed_focal_retries: 0,
            diagnostics: None,
        });
    }
    let epsilon_bound = epsilon_feasibility(ds, &s.exposures, &values, by_cov)?;
    let prepared = PreparedTest {
        instance,
        spec: spec.clone(),
        exposures: s.exposures,
        values,
        strata,
        groups,
        epsilon_bound,
        warnings,
    };
    let mut report = prepared.evaluate(Technique::Permutation, &s.nuisance)?;
    report.split = Some(s.summary);
    Ok(report)
}
