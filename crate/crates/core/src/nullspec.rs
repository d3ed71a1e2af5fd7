//! Constant-effect null hypotheses and science-table imputation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exposure::{ExposureValue, ExposureVector};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullFamily {
    /// `Y_i(1, π) − Y_i(0, π) = τ` for every unit and exposure.
    #[serde(alias = "h0")]
    ConstantAll,
    /// `Y_i(1, π) − Y_i(0, π) = τ(π)`.
    #[serde(alias = "hpi")]
    ConstantByExposure,
    /// `Y_i(1, π) − Y_i(0, π) = τ(π, X_i)`.
    #[serde(alias = "hxpi")]
    ConstantByExposureAndCovariate,
    /// Contrasts between arbitrary effective treatments. Representable, but
    /// no imputation rule is defined for it.
    GeneralContrast { description: String },
}

impl NullFamily {
    pub fn uses_covariate(&self) -> bool {
        matches!(self, NullFamily::ConstantByExposureAndCovariate)
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            NullFamily::ConstantAll => "h0",
            NullFamily::ConstantByExposure => "hpi",
            NullFamily::ConstantByExposureAndCovariate => "hxpi",
            NullFamily::GeneralContrast { .. } => "general",
        }
    }

    /// The parameter key that governs units in stratum `(pi, x)`.
    pub fn key(&self, pi: ExposureValue, x: Option<u32>) -> NuisanceKey {
        match self {
            NullFamily::ConstantAll | NullFamily::GeneralContrast { .. } => NuisanceKey::ALL,
            NullFamily::ConstantByExposure => NuisanceKey {
                exposure: Some(pi),
                covariate: None,
            },
            NullFamily::ConstantByExposureAndCovariate => NuisanceKey {
                exposure: Some(pi),
                covariate: x,
            },
        }
    }

    /// Every key the family needs for `values × levels`.
    pub fn keys(&self, values: &[ExposureValue], n_levels: usize) -> Vec<NuisanceKey> {
        match self {
            NullFamily::ConstantAll => vec![NuisanceKey::ALL],
            NullFamily::ConstantByExposure => values.iter().map(|&v| self.key(v, None)).collect(),
            NullFamily::ConstantByExposureAndCovariate => values
                .iter()
                .flat_map(|&v| (0..n_levels as u32).map(move |l| (v, l)))
                .map(|(v, l)| self.key(v, Some(l)))
                .collect(),
            NullFamily::GeneralContrast { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NuisanceKey {
    pub exposure: Option<ExposureValue>,
    pub covariate: Option<u32>,
}

impl NuisanceKey {
    pub const ALL: NuisanceKey = NuisanceKey {
        exposure: None,
        covariate: None,
    };

    pub fn exposure(value: ExposureValue) -> Self {
        NuisanceKey {
            exposure: Some(value),
            covariate: None,
        }
    }

    pub fn cell(value: ExposureValue, level: u32) -> Self {
        NuisanceKey {
            exposure: Some(value),
            covariate: Some(level),
        }
    }

    /// `all`, `pi=1` or `pi=1,x=<label>`.
    pub fn label(&self, covariate_labels: Option<&[String]>) -> String {
        match (self.exposure, self.covariate) {
            (None, _) => "all".to_string(),
            (Some(v), None) => crate::cell_label(v, None),
            (Some(v), Some(l)) => {
                let lab = covariate_labels
                    .and_then(|ls| ls.get(l as usize).cloned())
                    .unwrap_or_else(|| l.to_string());
                crate::cell_label(v, Some(&lab))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Oracle,
    PlugIn,
    GridPoint,
    SplitEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceParams {
    pub values: BTreeMap<NuisanceKey, f64>,
    pub provenance: Provenance,
}

impl NuisanceParams {
    pub fn new(values: BTreeMap<NuisanceKey, f64>, provenance: Provenance) -> Self {
        NuisanceParams { values, provenance }
    }

    pub fn constant(tau: f64, provenance: Provenance) -> Self {
        NuisanceParams {
            values: BTreeMap::from([(NuisanceKey::ALL, tau)]),
            provenance,
        }
    }

    /// Labelled view for reports.
    pub fn labelled(&self, covariate_labels: Option<&[String]>) -> BTreeMap<String, f64> {
        self.values
            .iter()
            .map(|(k, &v)| (k.label(covariate_labels), v))
            .collect()
    }
}

/// Outcome of imputing one cell of the science table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Imputed {
    Value(f64),
    /// The unit's exposure changes, so the null says nothing about it.
    NotImputable,
}

impl Imputed {
    pub fn value(self) -> Option<f64> {
        match self {
            Imputed::Value(v) => Some(v),
            Imputed::NotImputable => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullSpec {
    pub family: NullFamily,
    pub nuisance: NuisanceParams,
}

impl NullSpec {
    pub fn new(family: NullFamily, nuisance: NuisanceParams) -> Self {
        NullSpec { family, nuisance }
    }

    pub fn tau(&self, pi: ExposureValue, x: Option<u32>) -> Result<f64> {
        let key = self.family.key(pi, x);
        self.nuisance
            .values
            .get(&key)
            .copied()
            .ok_or_else(|| Error::MissingParameter(key.label(None)))
    }

    /// Checks that every key the family needs is present.
    pub fn validate(&self, values: &[ExposureValue], n_levels: usize) -> Result<()> {
        for key in self.family.keys(values, n_levels) {
            if !self.nuisance.values.contains_key(&key) {
                return Err(Error::MissingParameter(key.label(None)));
            }
        }
        Ok(())
    }

    /// Imputes `Y_i(t_new, π_new)` from the observed `(y, t_obs, π_obs)`.
    pub fn impute_outcome(
        &self,
        y_obs: f64,
        t_obs: u8,
        pi_obs: ExposureValue,
        t_new: u8,
        pi_new: ExposureValue,
        x: Option<u32>,
    ) -> Result<Imputed> {
        if pi_new != pi_obs {
            return Ok(Imputed::NotImputable);
        }
        if t_new == t_obs {
            return Ok(Imputed::Value(y_obs));
        }
        if let NullFamily::GeneralContrast { .. } = self.family {
            return Ok(Imputed::NotImputable);
        }
        let tau = self.tau(pi_obs, x)?;
        Ok(Imputed::Value(y_obs + tau * (t_new as f64 - t_obs as f64)))
    }
}

/// The `Y^P` column for a new assignment: one imputation per unit.
pub fn science_table(
    null: &NullSpec,
    dataset: &Dataset,
    exposures_obs: &ExposureVector,
    t_new: &[u8],
    exposures_new: &ExposureVector,
) -> Result<Vec<Imputed>> {
    let n = dataset.n_units();
    for (what, len) in [
        ("observed exposures", exposures_obs.len()),
        ("new treatment", t_new.len()),
        ("new exposures", exposures_new.len()),
    ] {
        if len != n {
            return Err(Error::LengthMismatch {
                what,
                got: len,
                expected: n,
            });
        }
    }
    let x = dataset.covariate();
    (0..n)
        .map(|i| {
            null.impute_outcome(
                dataset.outcomes()[i],
                dataset.treatment()[i],
                exposures_obs[i],
                t_new[i],
                exposures_new[i],
                x.map(|c| c.level(i)),
            )
        })
        .collect()
}

/// Imputing every unit at its own observed effective treatment returns its
/// observed outcome.
pub fn observed_outcome_identity_check(dataset: &Dataset, exposures: &ExposureVector, null: &NullSpec) -> bool {
    match science_table(null, dataset, exposures, dataset.treatment(), exposures) {
        Ok(table) => table
            .iter()
            .zip(dataset.outcomes())
            .all(|(imp, &y)| imp.value().is_some_and(|v| v.to_bits() == y.to_bits())),
        Err(_) => false,
    }
}
