//! Experimental network and the degree-based sparsity diagnostics.

use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exposure::{ExposureValue, ExposureVector};

/// Undirected simple graph over units `0..n_units`.
///
/// Adjacency is stored as sorted, deduplicated neighbor lists. The graph is
/// immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    n_edges: usize,
    symmetrized: bool,
}

impl Graph {
    /// Builds an undirected graph. Each pair is an unordered edge; duplicates
    /// (including reversed pairs) collapse into one edge.
    pub fn new(n_units: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n_units];
        for &(a, b) in edges {
            for index in [a, b] {
                if index >= n_units {
                    return Err(Error::IndexOutOfRange { index, n_units });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        let mut n_edges = 0;
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
            n_edges += list.len();
        }
        Ok(Graph {
            adjacency,
            n_edges: n_edges / 2,
            symmetrized: false,
        })
    }

    /// Builds a graph from directed arcs, symmetrizing them. The
    /// [`was_symmetrized`](Self::was_symmetrized) flag records whether any arc
    /// lacked its reverse.
    pub fn from_directed(n_units: usize, arcs: &[(usize, usize)]) -> Result<Self> {
        let mut graph = Graph::new(n_units, arcs)?;
        let mut seen: Vec<Vec<usize>> = vec![Vec::new(); n_units];
        for &(a, b) in arcs {
            seen[a].push(b);
        }
        for list in &mut seen {
            list.sort_unstable();
            list.dedup();
        }
        graph.symmetrized = (0..n_units).any(|i| seen[i] != graph.adjacency[i]);
        Ok(graph)
    }

    pub fn n_units(&self) -> usize {
        self.adjacency.len()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency
            .get(i)
            .is_some_and(|list| list.binary_search(&j).is_ok())
    }

    pub fn was_symmetrized(&self) -> bool {
        self.symmetrized
    }

    /// Each undirected edge once, as `(low, high)`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, list)| list.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Dense 0/1 adjacency matrix, row-major.
    pub fn dense(&self) -> Vec<Vec<u8>> {
        let n = self.n_units();
        let mut m = vec![vec![0u8; n]; n];
        for (i, list) in self.adjacency.iter().enumerate() {
            for &j in list {
                m[i][j] = 1;
            }
        }
        m
    }
}

/// Sample versions of the two sparsity bounds on the degree distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeDiagnostics {
    /// `(1/N) Σ_i deg(i)^3`
    pub third_moment: f64,
    /// `(1/N) Σ_i Σ_{j≠i} (A^3)_{ij}`
    pub path3_density: f64,
    pub max_degree: usize,
    pub mean_degree: f64,
    pub isolated_units: usize,
}

/// Computes the degree diagnostics from neighbor lists.
///
/// Row sums of `A^3` are `Σ_{j∈N(i)} Σ_{k∈N(j)} deg(k)`; the diagonal entry is
/// twice the number of triangles through `i`.
pub fn degree_diagnostics(g: &Graph) -> DegreeDiagnostics {
    let n = g.n_units();
    if n == 0 {
        return DegreeDiagnostics {
            third_moment: 0.0,
            path3_density: 0.0,
            max_degree: 0,
            mean_degree: 0.0,
            isolated_units: 0,
        };
    }
    let degrees: Vec<usize> = (0..n).map(|i| g.degree(i)).collect();
    let neighbor_degree_sum: Vec<u64> = (0..n)
        .map(|j| g.neighbors(j).iter().map(|&k| degrees[k] as u64).sum())
        .collect();

    let mut third = 0u64;
    let mut off_diagonal = 0u64;
    for (i, &d) in degrees.iter().enumerate() {
        let d = d as u64;
        third += d * d * d;
        let row: u64 = g.neighbors(i).iter().map(|&j| neighbor_degree_sum[j]).sum();
        let closed: u64 = g
            .neighbors(i)
            .iter()
            .map(|&j| sorted_intersection_len(g.neighbors(i), g.neighbors(j)) as u64)
            .sum();
        off_diagonal += row - closed;
    }
    DegreeDiagnostics {
        third_moment: third as f64 / n as f64,
        path3_density: off_diagonal as f64 / n as f64,
        max_degree: degrees.iter().copied().max().unwrap_or(0),
        mean_degree: degrees.iter().sum::<usize>() as f64 / n as f64,
        isolated_units: degrees.iter().filter(|&&d| d == 0).count(),
    }
}

fn sorted_intersection_len(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// One `(π[, x])` stratum of the overlap check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapCell {
    pub exposure: ExposureValue,
    pub covariate: Option<String>,
    pub n_units: usize,
    pub n_treated: usize,
    /// Treated share within the stratum.
    pub proportion: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapReport {
    pub eta: f64,
    pub cells: Vec<OverlapCell>,
    pub pass: bool,
}

/// Checks that the treated share in every `(π[, x])` stratum lies strictly
/// inside `(eta, 1 - eta)`.
///
/// Strata are the declared exposure values, crossed with the covariate levels
/// when the dataset carries a covariate.
pub fn overlap_check(
    dataset: &Dataset,
    exposures: &ExposureVector,
    values: &[ExposureValue],
    eta: f64,
) -> Result<OverlapReport> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidConfig(format!("eta must lie in (0, 1), got {eta}")));
    }
    let n = dataset.n_units();
    if exposures.len() != n {
        return Err(Error::LengthMismatch {
            what: "exposures",
            got: exposures.len(),
            expected: n,
        });
    }
    let levels: Vec<Option<u32>> = match dataset.covariate() {
        Some(cov) => (0..cov.n_levels() as u32).map(Some).collect(),
        None => vec![None],
    };
    let mut cells = Vec::new();
    for &value in values {
        for &level in &levels {
            let members = (0..n).filter(|&i| {
                exposures[i] == value
                    && level.map_or(true, |l| dataset.covariate().unwrap().level(i) == l)
            });
            let (mut n_units, mut n_treated) = (0, 0);
            for i in members {
                n_units += 1;
                n_treated += dataset.treatment()[i] as usize;
            }
            let label = level.map(|l| dataset.covariate().unwrap().label(l).to_string());
            if n_units == 0 {
                return Err(Error::EmptyCell(crate::cell_label(value, label.as_deref())));
            }
            let proportion = n_treated as f64 / n_units as f64;
            cells.push(OverlapCell {
                exposure: value,
                covariate: label,
                n_units,
                n_treated,
                proportion,
                pass: proportion > eta && proportion < 1.0 - eta,
            });
        }
    }
    let pass = cells.iter().all(|c| c.pass);
    Ok(OverlapReport { eta, cells, pass })
}
