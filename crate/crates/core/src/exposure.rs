//! Exposure mappings: from (unit, treatment vector, graph) to a discrete
//! exposure value.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Index;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// A discrete exposure value `π_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExposureValue(pub u32);

impl fmt::Display for ExposureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    /// `share > threshold`
    #[serde(alias = "gt", alias = ">")]
    StrictGreater,
    /// `share >= threshold`
    #[serde(alias = "ge", alias = ">=")]
    GreaterOrEqual,
}

impl Comparator {
    fn holds(self, share: f64, threshold: f64) -> bool {
        match self {
            Comparator::StrictGreater => share > threshold,
            Comparator::GreaterOrEqual => share >= threshold,
        }
    }
}

pub type CustomExposureFn =
    dyn Fn(usize, &[u8], &Graph) -> std::result::Result<ExposureValue, String> + Send + Sync;

#[derive(Clone)]
pub enum ExposureRule {
    /// `1{Σ_j t_j A_ij / Σ_j A_ij  ⋈ threshold}`; degree-0 units get `isolated_value`.
    FractionThreshold {
        threshold: f64,
        comparator: Comparator,
        isolated_value: ExposureValue,
    },
    /// `1{Σ_j t_j w_j A_ij / Σ_j w_j A_ij  ⋈ threshold}`; a zero weighted
    /// denominator is treated as isolated.
    WeightedThreshold {
        weights: Vec<f64>,
        threshold: f64,
        comparator: Comparator,
        isolated_value: ExposureValue,
    },
    /// Arbitrary user rule with an up-front declared value set.
    Custom {
        name: String,
        values: Vec<ExposureValue>,
        rule: Arc<CustomExposureFn>,
    },
}

impl fmt::Debug for ExposureRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExposureRule::FractionThreshold {
                threshold,
                comparator,
                isolated_value,
            } => f
                .debug_struct("FractionThreshold")
                .field("threshold", threshold)
                .field("comparator", comparator)
                .field("isolated_value", isolated_value)
                .finish(),
            ExposureRule::WeightedThreshold {
                weights,
                threshold,
                comparator,
                isolated_value,
            } => f
                .debug_struct("WeightedThreshold")
                .field("n_weights", &weights.len())
                .field("threshold", threshold)
                .field("comparator", comparator)
                .field("isolated_value", isolated_value)
                .finish(),
            ExposureRule::Custom { name, values, .. } => f
                .debug_struct("Custom")
                .field("name", name)
                .field("values", values)
                .finish(),
        }
    }
}

/// A deterministic exposure mapping with a declared, finite value set `Π`.
#[derive(Debug, Clone)]
pub struct ExposureMapping {
    rule: ExposureRule,
}

const BINARY: [ExposureValue; 2] = [ExposureValue(0), ExposureValue(1)];

impl ExposureMapping {
    pub fn new(rule: ExposureRule) -> Result<Self> {
        match &rule {
            ExposureRule::FractionThreshold {
                threshold,
                isolated_value,
                ..
            }
            | ExposureRule::WeightedThreshold {
                threshold,
                isolated_value,
                ..
            } => {
                if !threshold.is_finite() {
                    return Err(Error::InvalidConfig("threshold must be finite".into()));
                }
                if isolated_value.0 > 1 {
                    return Err(Error::InvalidConfig(
                        "threshold mappings take values in {0, 1}; isolated_value must be 0 or 1".into(),
                    ));
                }
            }
            ExposureRule::Custom { values, .. } => {
                if values.is_empty() {
                    return Err(Error::InvalidConfig("custom mapping declares no values".into()));
                }
            }
        }
        if let ExposureRule::WeightedThreshold { weights, .. } = &rule {
            if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(Error::InvalidConfig("weights must be finite and nonnegative".into()));
            }
        }
        Ok(ExposureMapping { rule })
    }

    /// Fraction-of-treated-neighbors threshold mapping with isolated value 0.
    pub fn fraction_threshold(threshold: f64, comparator: Comparator) -> Self {
        ExposureMapping {
            rule: ExposureRule::FractionThreshold {
                threshold,
                comparator,
                isolated_value: ExposureValue(0),
            },
        }
    }

    pub fn rule(&self) -> &ExposureRule {
        &self.rule
    }

    /// The declared value set, sorted ascending.
    pub fn values(&self) -> Vec<ExposureValue> {
        match &self.rule {
            ExposureRule::Custom { values, .. } => {
                let mut v = values.clone();
                v.sort_unstable();
                v.dedup();
                v
            }
            _ => BINARY.to_vec(),
        }
    }

    /// Exposure of a single unit.
    pub fn exposure_of(&self, unit: usize, t: &[u8], g: &Graph) -> Result<ExposureValue> {
        match &self.rule {
            ExposureRule::FractionThreshold {
                threshold,
                comparator,
                isolated_value,
            } => {
                let nbrs = g.neighbors(unit);
                if nbrs.is_empty() {
                    return Ok(*isolated_value);
                }
                let treated = nbrs.iter().filter(|&&j| t[j] == 1).count();
                let share = treated as f64 / nbrs.len() as f64;
                Ok(ExposureValue(comparator.holds(share, *threshold) as u32))
            }
            ExposureRule::WeightedThreshold {
                weights,
                threshold,
                comparator,
                isolated_value,
            } => {
                let (mut num, mut den) = (0.0, 0.0);
                for &j in g.neighbors(unit) {
                    den += weights[j];
                    if t[j] == 1 {
                        num += weights[j];
                    }
                }
                if den == 0.0 {
                    return Ok(*isolated_value);
                }
                Ok(ExposureValue(comparator.holds(num / den, *threshold) as u32))
            }
            ExposureRule::Custom { values, rule, .. } => {
                let v = rule(unit, t, g).map_err(|message| Error::MappingFailure { unit, message })?;
                if !values.contains(&v) {
                    return Err(Error::UndeclaredExposure(v.0));
                }
                Ok(v)
            }
        }
    }

    /// Writes every unit's exposure into `out`, reusing its allocation.
    pub fn compute_into(&self, t: &[u8], g: &Graph, out: &mut Vec<ExposureValue>) -> Result<()> {
        let n = g.n_units();
        if t.len() != n {
            return Err(Error::LengthMismatch {
                what: "treatment vector",
                got: t.len(),
                expected: n,
            });
        }
        if let ExposureRule::WeightedThreshold { weights, .. } = &self.rule {
            if weights.len() != n {
                return Err(Error::LengthMismatch {
                    what: "exposure weights",
                    got: weights.len(),
                    expected: n,
                });
            }
        }
        out.clear();
        out.reserve(n);
        for i in 0..n {
            out.push(self.exposure_of(i, t, g)?);
        }
        Ok(())
    }
}

/// Per-unit exposure values `π_i(t)` for one treatment vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ExposureVector {
    values: Vec<ExposureValue>,
}

impl ExposureVector {
    pub fn from_values(values: Vec<ExposureValue>) -> Self {
        ExposureVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[ExposureValue] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = ExposureValue> + '_ {
        self.values.iter().copied()
    }

    pub fn into_inner(self) -> Vec<ExposureValue> {
        self.values
    }
}

impl Index<usize> for ExposureVector {
    type Output = ExposureValue;
    fn index(&self, i: usize) -> &ExposureValue {
        &self.values[i]
    }
}

pub fn compute_exposures(mapping: &ExposureMapping, t: &[u8], g: &Graph) -> Result<ExposureVector> {
    let mut values = Vec::new();
    mapping.compute_into(t, g, &mut values)?;
    Ok(ExposureVector { values })
}

/// Unit counts per exposure, per (arm, exposure) and per (exposure, covariate level).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellCounts {
    pub n_units: usize,
    pub by_exposure: BTreeMap<ExposureValue, usize>,
    /// Keyed by `(exposure, arm)`.
    pub by_exposure_arm: BTreeMap<(ExposureValue, u8), usize>,
    /// Keyed by `(exposure, covariate level)`; empty without a covariate.
    pub by_cell: BTreeMap<(ExposureValue, u32), usize>,
}

/// Counts `N_k`, `N_{tk}` and `N_{k,l}`. Every declared value appears, with a
/// zero count if unobserved.
pub fn exposure_cell_counts(
    exposures: &ExposureVector,
    t: &[u8],
    x: Option<(&[u32], usize)>,
    values: &[ExposureValue],
) -> Result<CellCounts> {
    let n = exposures.len();
    if t.len() != n {
        return Err(Error::LengthMismatch {
            what: "treatment vector",
            got: t.len(),
            expected: n,
        });
    }
    let mut by_exposure: BTreeMap<_, _> = values.iter().map(|&v| (v, 0)).collect();
    let mut by_exposure_arm: BTreeMap<_, _> =
        values.iter().flat_map(|&v| [((v, 0u8), 0), ((v, 1u8), 0)]).collect();
    let mut by_cell = BTreeMap::new();
    if let Some((levels, n_levels)) = x {
        if levels.len() != n {
            return Err(Error::LengthMismatch {
                what: "covariate",
                got: levels.len(),
                expected: n,
            });
        }
        for &v in values {
            for l in 0..n_levels as u32 {
                by_cell.insert((v, l), 0);
            }
        }
    }
    for i in 0..n {
        let v = exposures[i];
        *by_exposure.get_mut(&v).ok_or(Error::UndeclaredExposure(v.0))? += 1;
        *by_exposure_arm.get_mut(&(v, t[i])).expect("binary treatment") += 1;
        if let Some((levels, _)) = x {
            *by_cell.entry((v, levels[i])).or_insert(0) += 1;
        }
    }
    Ok(CellCounts {
        n_units: n,
        by_exposure,
        by_exposure_arm,
        by_cell,
    })
}
