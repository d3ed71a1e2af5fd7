//! Conditional randomization tests for heterogeneous treatment effects under
//! network interference.
//!
//! The crate covers exposure mappings over a fixed network, imputation under
//! constant-effect nulls, the rejection-sampled conditioning sets built from
//! focal units, variance-ratio test statistics, four ways of handling the
//! unknown effect (known value, plug-in, confidence-grid, sample splitting)
//! and a Monte Carlo harness for size and power studies.

pub mod assignment;
pub mod conditioning;
pub mod config;
pub mod data;
pub mod error;
pub mod exposure;
pub mod fixtures;
pub mod graph;
pub mod inference;
pub mod nullspec;
pub mod rng;
pub mod simulation;
pub mod stats;

pub use assignment::{AssignmentMechanism, TreatmentVector};
pub use data::{Covariate, Dataset};
pub use error::{Error, ErrorKind, Result};
pub use exposure::{Comparator, ExposureMapping, ExposureRule, ExposureValue, ExposureVector};
pub use graph::Graph;
pub use nullspec::{NullFamily, NullSpec, NuisanceParams};

/// Stable text label for an exposure stratum, e.g. `pi=1` or `pi=0,x=f`.
pub fn cell_label(value: ExposureValue, covariate: Option<&str>) -> String {
    match covariate {
        Some(x) => format!("pi={},x={}", value.0, x),
        None => format!("pi={}", value.0),
    }
}
