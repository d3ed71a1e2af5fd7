//! Treatment vectors and assignment mechanisms.

use std::collections::BTreeMap;
use std::ops::Deref;

use rand::seq::index;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Binary treatment per unit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct TreatmentVector(Vec<u8>);

impl TreatmentVector {
    pub fn new(values: Vec<u8>) -> Result<Self> {
        if let Some((unit, &value)) = values.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(Error::InvalidTreatment { unit, value });
        }
        Ok(TreatmentVector(values))
    }

    pub fn n_treated(&self) -> usize {
        self.0.iter().map(|&v| v as usize).sum()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }

    /// Same units with arms swapped.
    pub fn flipped(&self) -> Self {
        TreatmentVector(self.0.iter().map(|&v| 1 - v).collect())
    }
}

impl Deref for TreatmentVector {
    type Target = [u8];
    fn deref(&self) -> &[u8] {
        &self.0
    }
}

/// A design `p` over `{0,1}^N` that is uniform on its support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssignmentMechanism {
    /// Exactly `n_treated` of `n_units` treated, all such vectors equally likely.
    Complete { n_units: usize, n_treated: usize },
    /// Complete randomization within each stratum.
    Stratified {
        /// Stratum index per unit.
        strata: Vec<usize>,
        /// Treated count per stratum index.
        n_treated: Vec<usize>,
        labels: Vec<String>,
        members: Vec<Vec<usize>>,
    },
}

impl AssignmentMechanism {
    pub fn complete(n_units: usize, n_treated: usize) -> Result<Self> {
        if n_treated > n_units {
            return Err(Error::InfeasibleCounts(format!(
                "{n_treated} treated out of {n_units} units"
            )));
        }
        Ok(AssignmentMechanism::Complete { n_units, n_treated })
    }

    /// Complete randomization that keeps the observed number treated.
    pub fn complete_like(t: &[u8]) -> Self {
        AssignmentMechanism::Complete {
            n_units: t.len(),
            n_treated: t.iter().map(|&v| v as usize).sum(),
        }
    }

    pub fn stratified(unit_labels: &[String], n_treated: &BTreeMap<String, usize>) -> Result<Self> {
        let labels: Vec<String> = {
            let mut l: Vec<String> = unit_labels.to_vec();
            l.sort();
            l.dedup();
            l
        };
        let mut members = vec![Vec::new(); labels.len()];
        let strata: Vec<usize> = unit_labels
            .iter()
            .enumerate()
            .map(|(i, lab)| {
                let s = labels.binary_search(lab).expect("label collected above");
                members[s].push(i);
                s
            })
            .collect();
        for key in n_treated.keys() {
            if labels.binary_search(key).is_err() {
                return Err(Error::InfeasibleCounts(format!("stratum `{key}` has no units")));
            }
        }
        let mut counts = Vec::with_capacity(labels.len());
        for (s, label) in labels.iter().enumerate() {
            let k = *n_treated
                .get(label)
                .ok_or_else(|| Error::InfeasibleCounts(format!("no treated count for stratum `{label}`")))?;
            if k > members[s].len() {
                return Err(Error::InfeasibleCounts(format!(
                    "stratum `{label}`: {k} treated out of {} units",
                    members[s].len()
                )));
            }
            counts.push(k);
        }
        Ok(AssignmentMechanism::Stratified {
            strata,
            n_treated: counts,
            labels,
            members,
        })
    }

    /// Stratified design that keeps each stratum's observed treated count.
    pub fn stratified_like(unit_labels: &[String], t: &[u8]) -> Result<Self> {
        if unit_labels.len() != t.len() {
            return Err(Error::LengthMismatch {
                what: "strata",
                got: unit_labels.len(),
                expected: t.len(),
            });
        }
        let mut counts = BTreeMap::new();
        for (lab, &ti) in unit_labels.iter().zip(t) {
            *counts.entry(lab.clone()).or_insert(0) += ti as usize;
        }
        Self::stratified(unit_labels, &counts)
    }

    pub fn n_units(&self) -> usize {
        match self {
            AssignmentMechanism::Complete { n_units, .. } => *n_units,
            AssignmentMechanism::Stratified { strata, .. } => strata.len(),
        }
    }

    /// Fills `out` with a uniform draw from the support.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<u8>) {
        out.clear();
        out.resize(self.n_units(), 0);
        match self {
            AssignmentMechanism::Complete { n_units, n_treated } => {
                for i in index::sample(rng, *n_units, *n_treated) {
                    out[i] = 1;
                }
            }
            AssignmentMechanism::Stratified {
                n_treated, members, ..
            } => {
                for (list, &k) in members.iter().zip(n_treated) {
                    for j in index::sample(rng, list.len(), k) {
                        out[list[j]] = 1;
                    }
                }
            }
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> TreatmentVector {
        let mut out = Vec::new();
        self.draw_into(rng, &mut out);
        TreatmentVector(out)
    }

    /// Whether `p(t) > 0`.
    pub fn supports(&self, t: &[u8]) -> bool {
        if t.len() != self.n_units() || t.iter().any(|&v| v > 1) {
            return false;
        }
        match self {
            AssignmentMechanism::Complete { n_treated, .. } => {
                t.iter().map(|&v| v as usize).sum::<usize>() == *n_treated
            }
            AssignmentMechanism::Stratified {
                n_treated, members, ..
            } => members
                .iter()
                .zip(n_treated)
                .all(|(list, &k)| list.iter().map(|&i| t[i] as usize).sum::<usize>() == k),
        }
    }
}
