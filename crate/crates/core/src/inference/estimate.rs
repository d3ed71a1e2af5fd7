//! Difference-in-means estimates of the nuisance effect and their Neyman
//! standard errors.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exposure::{ExposureValue, ExposureVector};
use crate::nullspec::{NuisanceKey, NuisanceParams, NullFamily, Provenance};
use crate::stats::Moments;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffInMeans {
    pub tau_hat: f64,
    /// `sqrt(s1²/n1 + s0²/n0)`; `None` when an arm has fewer than two units.
    pub se: Option<f64>,
    pub n_treated: usize,
    pub n_control: usize,
}

pub fn difference_in_means(
    y: &[f64],
    t: &[u8],
    units: impl IntoIterator<Item = usize>,
    cell: &str,
) -> Result<DiffInMeans> {
    let mut arms = [Moments::default(); 2];
    for i in units {
        arms[t[i] as usize].push(y[i]);
    }
    for arm in [1u8, 0] {
        if arms[arm as usize].n == 0 {
            return Err(Error::EmptyArm {
                cell: cell.to_string(),
                arm,
            });
        }
    }
    let se = match (arms[1].variance(), arms[0].variance()) {
        (Some(v1), Some(v0)) => Some((v1 / arms[1].n as f64 + v0 / arms[0].n as f64).sqrt()),
        _ => None,
    };
    Ok(DiffInMeans {
        tau_hat: arms[1].mean - arms[0].mean,
        se,
        n_treated: arms[1].n,
        n_control: arms[0].n,
    })
}

/// Units governed by `key`: everyone for the pooled key, otherwise the
/// matching exposure (and covariate level).
pub fn key_units(dataset: &Dataset, exposures: &ExposureVector, key: NuisanceKey) -> Vec<usize> {
    (0..dataset.n_units())
        .filter(|&i| key.exposure.map_or(true, |v| exposures[i] == v))
        .filter(|&i| {
            key.covariate
                .map_or(true, |l| dataset.covariate().is_some_and(|c| c.level(i) == l))
        })
        .collect()
}

/// One difference in means per parameter of the family, over the units with
/// `mask[i]` (all units without a mask).
pub fn estimate_by_key(
    dataset: &Dataset,
    exposures: &ExposureVector,
    family: &NullFamily,
    values: &[ExposureValue],
    mask: Option<&[bool]>,
) -> Result<BTreeMap<NuisanceKey, DiffInMeans>> {
    let n_levels = dataset.covariate().map_or(0, |c| c.n_levels());
    if family.uses_covariate() && dataset.covariate().is_none() {
        return Err(Error::InvalidConfig("this null needs a covariate column".into()));
    }
    let labels = dataset.covariate().map(|c| c.labels());
    let mut out = BTreeMap::new();
    for key in family.keys(values, n_levels) {
        let units = key_units(dataset, exposures, key)
            .into_iter()
            .filter(|&i| mask.map_or(true, |m| m[i]));
        let est = difference_in_means(dataset.outcomes(), dataset.treatment(), units, &key.label(labels))?;
        out.insert(key, est);
    }
    Ok(out)
}

/// Plug-in nuisance values: difference in means on the full sample, pooled
/// for the single-effect null, per exposure or per cell otherwise.
pub fn estimate_tau_plugin(
    dataset: &Dataset,
    exposures: &ExposureVector,
    family: &NullFamily,
    values: &[ExposureValue],
) -> Result<NuisanceParams> {
    let est = estimate_by_key(dataset, exposures, family, values, None)?;
    Ok(NuisanceParams::new(
        est.into_iter().map(|(k, e)| (k, e.tau_hat)).collect(),
        Provenance::PlugIn,
    ))
}
