//! Conditioning on focal units: super-focal strata, rejection-sampled
//! conditioning sets and the observed focal selection.
//!
//! A stratum is the set of units whose observed exposure is `π_k` (and, for
//! covariate strata, whose covariate is `x_l`). A candidate assignment `t'`
//! drawn from the design is kept when, in every target stratum and for both
//! arms, the share of stratum units with `t'_i = t` whose exposure stays at
//! `π_k` strictly exceeds `ε`.

use std::collections::BTreeMap;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::AssignmentMechanism;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exposure::{ExposureMapping, ExposureValue, ExposureVector};
use crate::graph::Graph;
use crate::rng::SeedStream;

/// Super-focal units of one `(π_k[, x_l])` stratum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stratum {
    pub exposure: ExposureValue,
    pub level: Option<u32>,
    pub label: String,
    /// Units with this observed exposure (and covariate level), ascending.
    pub members: Vec<usize>,
}

impl Stratum {
    pub fn indicator(&self, n_units: usize) -> Vec<bool> {
        let mut v = vec![false; n_units];
        for &i in &self.members {
            v[i] = true;
        }
        v
    }
}

/// One stratum per declared exposure value, crossed with the covariate
/// levels when `by_covariate` is set. Strata may be empty.
pub fn build_strata(
    dataset: &Dataset,
    exposures_obs: &ExposureVector,
    values: &[ExposureValue],
    by_covariate: bool,
) -> Result<Vec<Stratum>> {
    let n = dataset.n_units();
    if exposures_obs.len() != n {
        return Err(Error::LengthMismatch {
            what: "observed exposures",
            got: exposures_obs.len(),
            expected: n,
        });
    }
    let cov = if by_covariate {
        Some(dataset.covariate().ok_or_else(|| {
            Error::InvalidConfig("covariate strata requested but the dataset has no covariate".into())
        })?)
    } else {
        None
    };
    let mut out = Vec::new();
    for &v in values {
        let levels: Vec<Option<u32>> = match cov {
            Some(c) => (0..c.n_levels() as u32).map(Some).collect(),
            None => vec![None],
        };
        for level in levels {
            let members = (0..n)
                .filter(|&i| exposures_obs[i] == v && level.map_or(true, |l| cov.unwrap().level(i) == l))
                .collect();
            let label = crate::cell_label(v, level.map(|l| cov.unwrap().label(l)));
            out.push(Stratum {
                exposure: v,
                level,
                label,
                members,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ConditioningTarget {
    PerExposure { exposure: ExposureValue },
    AllExposures,
    PerCell { exposure: ExposureValue, level: u32 },
    AllCells,
}

impl ConditioningTarget {
    /// Indices into `strata` required by the target.
    pub fn select(&self, strata: &[Stratum]) -> Result<Vec<usize>> {
        let picked: Vec<usize> = strata
            .iter()
            .enumerate()
            .filter(|(_, s)| match *self {
                ConditioningTarget::PerExposure { exposure } => s.exposure == exposure && s.level.is_none(),
                ConditioningTarget::AllExposures => s.level.is_none(),
                ConditioningTarget::PerCell { exposure, level } => {
                    s.exposure == exposure && s.level == Some(level)
                }
                ConditioningTarget::AllCells => s.level.is_some(),
            })
            .map(|(i, _)| i)
            .collect();
        if picked.is_empty() {
            return Err(Error::InvalidConfig(format!("no strata match target {self:?}")));
        }
        Ok(picked)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditioningConfig {
    pub epsilon: f64,
    /// Candidates tried per accepted draw before giving up.
    pub max_attempts_per_accept: usize,
    /// Minimum focal units per arm and stratum in an accepted draw. Zero
    /// leaves only the frequency inequalities.
    pub min_arm_units: usize,
}

impl Default for ConditioningConfig {
    fn default() -> Self {
        ConditioningConfig {
            epsilon: 0.2,
            max_attempts_per_accept: 10_000,
            min_arm_units: 2,
        }
    }
}

impl ConditioningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in (0, 0.5), got {}",
                self.epsilon
            )));
        }
        if self.max_attempts_per_accept == 0 {
            return Err(Error::InvalidConfig("max_attempts_per_accept must be positive".into()));
        }
        Ok(())
    }
}

/// `R(arm, t', π_k)`: share of the stratum's units with `t'_i = arm` whose
/// exposure under `t'` is still `π_k`.
pub fn relative_frequency(
    t_new: &[u8],
    exposures_new: &ExposureVector,
    stratum: &Stratum,
    arm: u8,
) -> Result<f64> {
    if stratum.members.is_empty() {
        return Err(Error::EmptySuperFocal(stratum.label.clone()));
    }
    let hits = stratum
        .members
        .iter()
        .filter(|&&i| t_new[i] == arm && exposures_new[i] == stratum.exposure)
        .count();
    Ok(hits as f64 / stratum.members.len() as f64)
}

/// Focal units of a stratum under `t'`: members whose exposure is unchanged.
pub fn focal_indicator(exposures_new: &ExposureVector, stratum: &Stratum) -> Vec<bool> {
    let mut v = vec![false; exposures_new.len()];
    for &i in &stratum.members {
        v[i] = exposures_new[i] == stratum.exposure;
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum FailureKind {
    Frequency,
    TooFewFocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Failure {
    stratum: usize,
    arm: u8,
    kind: FailureKind,
}

/// Result of checking one candidate assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Focal units per target stratum, restricted to the mask, ascending.
    pub focal: Vec<Vec<usize>>,
    /// `[R(0, ·), R(1, ·)]` per target stratum.
    pub r_values: Vec<[f64; 2]>,
    failure: Option<Failure>,
}

impl Evaluation {
    pub fn accepted(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptedDraw {
    pub t: Vec<u8>,
    /// Focal units per target stratum, restricted to the mask, ascending.
    pub focal: Vec<Vec<usize>>,
    pub r_values: Vec<[f64; 2]>,
    /// Candidates generated for this draw, including the accepted one.
    pub attempts: usize,
}

impl AcceptedDraw {
    pub fn focal_count(&self) -> usize {
        self.focal.iter().map(Vec::len).sum()
    }

    pub fn focal_indicator(&self) -> Vec<bool> {
        let mut v = vec![false; self.t.len()];
        for list in &self.focal {
            for &i in list {
                v[i] = true;
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumDiagnostics {
    pub label: String,
    pub super_focal: usize,
    pub mean_focal: f64,
    pub mean_r: [f64; 2],
    pub min_r: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditioningDiagnostics {
    pub epsilon: f64,
    pub draws: usize,
    pub candidates: usize,
    pub acceptance_rate: f64,
    pub mean_focal_count: f64,
    pub strata: Vec<StratumDiagnostics>,
}

#[derive(Debug, Clone)]
pub struct ConditioningSet {
    /// The target strata, in the order used by every draw.
    pub strata: Vec<Stratum>,
    pub draws: Vec<AcceptedDraw>,
    pub diagnostics: ConditioningDiagnostics,
}

impl ConditioningSet {
    pub fn mean_focal_count(&self) -> f64 {
        self.diagnostics.mean_focal_count
    }
}

/// Checks candidate assignments against the frequency inequalities of a set
/// of target strata.
#[derive(Debug, Clone)]
pub struct Conditioner<'a> {
    graph: &'a Graph,
    mapping: &'a ExposureMapping,
    mechanism: &'a AssignmentMechanism,
    strata: Vec<Stratum>,
    mask: Option<&'a [bool]>,
    config: ConditioningConfig,
}

impl<'a> Conditioner<'a> {
    pub fn new(
        graph: &'a Graph,
        mapping: &'a ExposureMapping,
        mechanism: &'a AssignmentMechanism,
        strata: Vec<Stratum>,
        config: ConditioningConfig,
    ) -> Result<Self> {
        config.validate()?;
        if mechanism.n_units() != graph.n_units() {
            return Err(Error::LengthMismatch {
                what: "assignment mechanism",
                got: mechanism.n_units(),
                expected: graph.n_units(),
            });
        }
        if strata.is_empty() {
            return Err(Error::InvalidConfig("no target strata".into()));
        }
        if let Some(s) = strata.iter().find(|s| s.members.is_empty()) {
            return Err(Error::EmptySuperFocal(s.label.clone()));
        }
        Ok(Conditioner {
            graph,
            mapping,
            mechanism,
            strata,
            mask: None,
            config,
        })
    }

    /// Restricts focal sets (and the minimum-focal requirement) to units
    /// with `mask[i]`. The frequency inequalities still use whole strata.
    pub fn with_mask(mut self, mask: &'a [bool]) -> Result<Self> {
        if mask.len() != self.graph.n_units() {
            return Err(Error::LengthMismatch {
                what: "unit mask",
                got: mask.len(),
                expected: self.graph.n_units(),
            });
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    pub fn config(&self) -> &ConditioningConfig {
        &self.config
    }

    pub fn evaluate(&self, t: &[u8]) -> Result<Evaluation> {
        let mut focal = Vec::with_capacity(self.strata.len());
        let mut r_values = Vec::with_capacity(self.strata.len());
        let mut failure = None;
        let eps = self.config.epsilon;
        for (s, stratum) in self.strata.iter().enumerate() {
            let mut hits = [0usize; 2];
            let mut masked = [0usize; 2];
            let mut units = Vec::new();
            for &i in &stratum.members {
                if self.mapping.exposure_of(i, t, self.graph)? != stratum.exposure {
                    continue;
                }
                let arm = t[i] as usize;
                hits[arm] += 1;
                if self.mask.map_or(true, |m| m[i]) {
                    masked[arm] += 1;
                    units.push(i);
                }
            }
            let size = stratum.members.len() as f64;
            let r = [hits[0] as f64 / size, hits[1] as f64 / size];
            if failure.is_none() {
                for arm in 0..2u8 {
                    // Negated so that a NaN frequency counts as a failure.
                    #[allow(clippy::neg_cmp_op_on_partial_ord)]
                    let kind = if !(r[arm as usize] > eps) {
                        Some(FailureKind::Frequency)
                    } else if masked[arm as usize] < self.config.min_arm_units {
                        Some(FailureKind::TooFewFocal)
                    } else {
                        None
                    };
                    if let Some(kind) = kind {
                        failure = Some(Failure { stratum: s, arm, kind });
                        break;
                    }
                }
            }
            focal.push(units);
            r_values.push(r);
        }
        Ok(Evaluation {
            focal,
            r_values,
            failure,
        })
    }

    fn describe(&self, f: Failure) -> String {
        let label = &self.strata[f.stratum].label;
        match f.kind {
            FailureKind::Frequency => format!(
                "R(t={}, {label}) <= epsilon ({})",
                f.arm, self.config.epsilon
            ),
            FailureKind::TooFewFocal => format!(
                "fewer than {} focal units with t={} in {label}",
                self.config.min_arm_units, f.arm
            ),
        }
    }

    fn draw_one(&self, draw: usize, seed: SeedStream) -> Result<AcceptedDraw> {
        let mut rng = seed.rng();
        let mut t = Vec::with_capacity(self.graph.n_units());
        let mut tally: BTreeMap<Failure, usize> = BTreeMap::new();
        for attempt in 1..=self.config.max_attempts_per_accept {
            self.mechanism.draw_into(&mut rng, &mut t);
            let ev = self.evaluate(&t)?;
            match ev.failure {
                None => {
                    return Ok(AcceptedDraw {
                        t,
                        focal: ev.focal,
                        r_values: ev.r_values,
                        attempts: attempt,
                    })
                }
                Some(f) => *tally.entry(f).or_insert(0) += 1,
            }
        }
        let worst = tally
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(f, _)| *f)
            .expect("at least one attempt");
        Err(Error::AcceptanceBudgetExhausted {
            draw,
            attempts: self.config.max_attempts_per_accept,
            failing: self.describe(worst),
        })
    }

    /// Draws `b` accepted assignments. Draw `d` uses its own stream
    /// `seed.child(d)`, so results do not depend on the worker count.
    pub fn sample(&self, b: usize, seed: SeedStream) -> Result<ConditioningSet> {
        if b == 0 {
            return Err(Error::InvalidConfig("number of draws must be positive".into()));
        }
        let results: Vec<Result<AcceptedDraw>> = (0..b)
            .into_par_iter()
            .map(|d| self.draw_one(d, seed.child(d as u64)))
            .collect();
        let draws = results.into_iter().collect::<Result<Vec<_>>>()?;
        let diagnostics = self.diagnostics(&draws);
        Ok(ConditioningSet {
            strata: self.strata.clone(),
            draws,
            diagnostics,
        })
    }

    fn diagnostics(&self, draws: &[AcceptedDraw]) -> ConditioningDiagnostics {
        let b = draws.len() as f64;
        let candidates: usize = draws.iter().map(|d| d.attempts).sum();
        let strata = self
            .strata
            .iter()
            .enumerate()
            .map(|(s, st)| {
                let mut mean_r = [0.0; 2];
                let mut min_r = [f64::INFINITY; 2];
                let mut focal = 0usize;
                for d in draws {
                    focal += d.focal[s].len();
                    for a in 0..2 {
                        mean_r[a] += d.r_values[s][a] / b;
                        min_r[a] = min_r[a].min(d.r_values[s][a]);
                    }
                }
                StratumDiagnostics {
                    label: st.label.clone(),
                    super_focal: st.members.len(),
                    mean_focal: focal as f64 / b,
                    mean_r,
                    min_r,
                }
            })
            .collect();
        ConditioningDiagnostics {
            epsilon: self.config.epsilon,
            draws: draws.len(),
            candidates,
            acceptance_rate: draws.len() as f64 / candidates as f64,
            mean_focal_count: draws.iter().map(|d| d.focal_count()).sum::<usize>() as f64 / b,
            strata,
        }
    }
}

/// Units used for the observed statistic, split by stratum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservedFocal {
    pub per_stratum: Vec<Vec<usize>>,
    pub size: usize,
    pub retries: usize,
}

impl ObservedFocal {
    pub fn indicator(&self, n_units: usize) -> Vec<bool> {
        let mut v = vec![false; n_units];
        for list in &self.per_stratum {
            for &i in list {
                v[i] = true;
            }
        }
        v
    }
}

pub const OBSERVED_FOCAL_RETRIES: usize = 100;

/// Picks a uniform subset of the pooled super-focal units (restricted to
/// `mask`) whose size is the rounded mean focal count over the draws.
/// Resamples until every stratum has at least two units in each observed
/// arm.
pub fn select_observed_focal(
    strata: &[Stratum],
    draws: &[AcceptedDraw],
    t_obs: &[u8],
    mask: Option<&[bool]>,
    seed: SeedStream,
) -> Result<ObservedFocal> {
    if draws.is_empty() {
        return Err(Error::InvalidConfig("no accepted draws".into()));
    }
    let mean = draws.iter().map(|d| d.focal_count()).sum::<usize>() as f64 / draws.len() as f64;
    let size = mean.round_ties_even() as usize;
    if size < 4 {
        return Err(Error::TooFewFocal(size));
    }
    let mut pool: Vec<(usize, usize)> = Vec::new();
    for (s, st) in strata.iter().enumerate() {
        for &i in &st.members {
            if mask.map_or(true, |m| m[i]) {
                pool.push((i, s));
            }
        }
    }
    pool.sort_unstable();
    let size = size.min(pool.len());
    let mut rng = seed.rng();
    for retry in 0..OBSERVED_FOCAL_RETRIES {
        let mut per_stratum = vec![Vec::new(); strata.len()];
        for j in index::sample(&mut rng, pool.len(), size) {
            let (i, s) = pool[j];
            per_stratum[s].push(i);
        }
        let ok = per_stratum.iter().all(|units| {
            let treated = units.iter().filter(|&&i| t_obs[i] == 1).count();
            treated >= 2 && units.len() - treated >= 2
        });
        if ok {
            for list in &mut per_stratum {
                list.sort_unstable();
            }
            return Ok(ObservedFocal {
                per_stratum,
                size,
                retries: retry,
            });
        }
    }
    Err(Error::ArmEmptyAfterRetries {
        retries: OBSERVED_FOCAL_RETRIES,
        min_per_arm: 2,
    })
}

/// Smallest observed share `#{T=t, Π=π_k[, X=x_l]} / N`; an upper bound
/// for a workable `ε`.
pub fn epsilon_feasibility(
    dataset: &Dataset,
    exposures_obs: &ExposureVector,
    values: &[ExposureValue],
    by_covariate: bool,
) -> Result<f64> {
    let strata = build_strata(dataset, exposures_obs, values, by_covariate)?;
    let n = dataset.n_units() as f64;
    let t = dataset.treatment();
    let mut min = f64::INFINITY;
    for st in &strata {
        let treated = st.members.iter().filter(|&&i| t[i] == 1).count();
        for c in [treated, st.members.len() - treated] {
            min = min.min(c as f64 / n);
        }
    }
    Ok(min)
}
