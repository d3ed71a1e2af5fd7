//! Small worked instances used in tests and documentation.
//!
//! The ten-unit network below reproduces the textbook example's exposure
//! pattern under the `>= 0.5` fraction-of-treated-neighbors mapping. Outcomes
//! are `y_i = i + 1` so imputed values can be read off symbolically.

use crate::assignment::TreatmentVector;
use crate::data::{Covariate, Dataset};
use crate::exposure::{Comparator, ExposureMapping};
use crate::graph::Graph;

pub const EXAMPLE_ONE_EDGES: [(usize, usize); 10] = [
    (0, 1),
    (0, 4),
    (2, 3),
    (2, 9),
    (5, 6),
    (5, 7),
    (5, 9),
    (6, 8),
    (6, 9),
    (7, 8),
];

pub const EXAMPLE_ONE_TREATMENT: [u8; 10] = [0, 0, 0, 1, 1, 1, 0, 1, 1, 0];

/// The permuted assignment `t~` discussed with the example.
pub const EXAMPLE_ONE_PERMUTED: [u8; 10] = [1, 1, 1, 1, 1, 0, 0, 0, 0, 0];

/// Covariate of the second example, by unit.
pub const EXAMPLE_TWO_X: [&str; 10] = ["m", "m", "m", "f", "f", "m", "f", "m", "f", "f"];

#[derive(Debug, Clone)]
pub struct Fixture {
    pub graph: Graph,
    pub dataset: Dataset,
    pub mapping: ExposureMapping,
}

fn base(covariate: Option<Covariate>) -> Fixture {
    let graph = Graph::new(10, &EXAMPLE_ONE_EDGES).expect("valid fixture graph");
    let y = (1..=10).map(|v| v as f64).collect();
    let t = TreatmentVector::new(EXAMPLE_ONE_TREATMENT.to_vec()).expect("binary");
    Fixture {
        graph,
        dataset: Dataset::new(y, t, covariate).expect("aligned"),
        mapping: ExposureMapping::fraction_threshold(0.5, Comparator::GreaterOrEqual),
    }
}

pub fn example_one() -> Fixture {
    base(None)
}

/// Same network and treatment with the binary covariate `x ∈ {f, m}`.
pub fn example_two() -> Fixture {
    base(Some(Covariate::from_labels(&EXAMPLE_TWO_X)))
}
