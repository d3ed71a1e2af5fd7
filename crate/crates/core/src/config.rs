//! Serializable settings for a single test, shared by the command line and
//! the C interface.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assignment::AssignmentMechanism;
use crate::conditioning::ConditioningConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exposure::{Comparator, ExposureMapping};
use crate::graph::Graph;
use crate::inference::{
    run_ci_test, run_oracle_test, run_permutation_variant, run_plugin_test, run_ss_test, CiConfig, Instance,
    StatKind, TestReport, TestSpec,
};
use crate::nullspec::{NuisanceParams, NullFamily, NullSpec, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TechniqueName {
    Oracle,
    #[serde(alias = "plugin")]
    PlugIn,
    #[serde(alias = "ci")]
    ConfidenceInterval,
    #[serde(alias = "ss")]
    SampleSplit,
    Permutation,
}

impl std::str::FromStr for TechniqueName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidConfig(format!("unknown technique `{s}`")))
    }
}

/// Everything needed to run one test on a loaded network and dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestSettings {
    pub family: NullFamily,
    pub statistic: StatKind,
    pub technique: TechniqueName,
    /// Effect under the oracle technique, shared by every parameter.
    pub tau: Option<f64>,
    /// Per-parameter effects under the oracle technique, keyed by `all`,
    /// `pi=<k>` or `pi=<k>,x=<label>`. Entries override `tau`.
    pub tau_map: BTreeMap<String, f64>,
    pub threshold: f64,
    pub comparator: Comparator,
    pub epsilon: f64,
    pub b: usize,
    pub alpha: f64,
    pub max_attempts_per_accept: usize,
    pub min_arm_units: usize,
    pub ci: CiConfig,
}

impl Default for TestSettings {
    fn default() -> Self {
        let cond = ConditioningConfig::default();
        TestSettings {
            family: NullFamily::ConstantAll,
            statistic: StatKind::Multiple,
            technique: TechniqueName::PlugIn,
            tau: None,
            tau_map: BTreeMap::new(),
            threshold: 0.5,
            comparator: Comparator::StrictGreater,
            epsilon: cond.epsilon,
            b: 149,
            alpha: 0.05,
            max_attempts_per_accept: cond.max_attempts_per_accept,
            min_arm_units: cond.min_arm_units,
            ci: CiConfig::default(),
        }
    }
}

impl TestSettings {
    pub fn spec(&self) -> TestSpec {
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

    pub fn mapping(&self) -> Result<ExposureMapping> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::InvalidConfig(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        Ok(ExposureMapping::fraction_threshold(self.threshold, self.comparator))
    }

    /// The oracle null built from `tau` and `tau_map`.
    pub fn oracle_null(&self, dataset: &Dataset) -> Result<NullSpec> {
        let values = self.mapping()?.values();
        let covariate = dataset.covariate();
        let labels = covariate.map(|c| c.labels());
        let keys = self.family.keys(&values, covariate.map_or(0, |c| c.n_levels()));
        let mut params = BTreeMap::new();
        let mut used = 0;
        for key in keys {
            let label = key.label(labels);
            let tau = match self.tau_map.get(&label) {
                Some(&v) => {
                    used += 1;
                    v
                }
                None => self.tau.ok_or_else(|| Error::MissingParameter(label.clone()))?,
            };
            params.insert(key, tau);
        }
        if used < self.tau_map.len() {
            let known: Vec<String> = params.keys().map(|k| k.label(labels)).collect();
            let unknown: Vec<&String> = self.tau_map.keys().filter(|k| !known.contains(k)).collect();
            return Err(Error::InvalidConfig(format!(
                "tau map names unknown parameters {unknown:?}; expected some of {known:?}"
            )));
        }
        Ok(NullSpec::new(self.family.clone(), NuisanceParams::new(params, Provenance::Oracle)))
    }

    pub fn validate(&self) -> Result<()> {
        self.mapping()?;
        self.spec().validate()?;
        if self.technique == TechniqueName::ConfidenceInterval {
            self.ci.validate()?;
        }
        Ok(())
    }
}

/// The assignment design implied by the dataset: complete randomization with
/// the observed number of treated units, or within declared strata.
pub fn infer_mechanism(dataset: &Dataset) -> Result<AssignmentMechanism> {
    match dataset.strata() {
        Some(labels) => AssignmentMechanism::stratified_like(labels, dataset.treatment()),
        None => Ok(AssignmentMechanism::complete_like(dataset.treatment())),
    }
}

/// Runs the configured technique on `(graph, dataset)`.
pub fn run_with_settings(graph: &Graph, dataset: &Dataset, settings: &TestSettings, seed: u64) -> Result<TestReport> {
    settings.validate()?;
    let mapping = settings.mapping()?;
    let mechanism = infer_mechanism(dataset)?;
    let instance = Instance {
        graph,
        dataset,
        mapping: &mapping,
        mechanism: &mechanism,
    };
    let spec = settings.spec();
    match settings.technique {
        TechniqueName::Oracle => run_oracle_test(instance, &spec, &settings.oracle_null(dataset)?, seed),
        TechniqueName::PlugIn => run_plugin_test(instance, &spec, seed),
        TechniqueName::ConfidenceInterval => run_ci_test(instance, &spec, &settings.ci, seed),
        TechniqueName::SampleSplit => run_ss_test(instance, &spec, seed),
        TechniqueName::Permutation => run_permutation_variant(instance, &spec, seed),
    }
}
