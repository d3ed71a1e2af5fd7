//! Confidence-grid technique: maximize the p-value over a Neyman confidence
//! region for the effect and add `γ`.

use serde::{Deserialize, Serialize};

use super::estimate::estimate_by_key;
use super::{empirical_pvalue, PreparedTest, TestReport, Technique};
use crate::error::{Error, Result};
use crate::inference::quantile::normal_quantile;
use crate::nullspec::NuisanceKey;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiConfig {
    pub gamma: f64,
    /// Points per parameter axis, endpoints included.
    pub grid_size: usize,
    /// Cap on the number of points of a multi-parameter grid. When the full
    /// product exceeds it, every axis is thinned to the same size.
    pub grid_budget: usize,
}

impl Default for CiConfig {
    fn default() -> Self {
        CiConfig {
            gamma: 0.001,
            grid_size: 20,
            grid_budget: 10_000,
        }
    }
}

impl CiConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidConfig(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.grid_size < 2 || self.grid_budget < 2 {
            return Err(Error::InvalidConfig("grid size and budget must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridEvaluation {
    /// One value per axis, in axis order.
    pub tau: Vec<f64>,
    pub pvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisInterval {
    pub parameter: String,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupGrid {
    pub gamma: f64,
    pub axes: Vec<AxisInterval>,
    pub truncated: bool,
    pub max_grid_pvalue: f64,
    pub evaluations: Vec<GridEvaluation>,
}

/// `m` evenly spaced points from `lower` to `upper` inclusive.
pub fn uniform_grid(lower: f64, upper: f64, m: usize) -> Vec<f64> {
    match m {
        0 => Vec::new(),
        1 => vec![0.5 * (lower + upper)],
        _ => (0..m)
            .map(|j| {
                if j == m - 1 {
                    upper
                } else {
                    lower + (upper - lower) * j as f64 / (m - 1) as f64
                }
            })
            .collect(),
    }
}

/// Largest `m` with `m^j <= budget`.
fn per_axis_points(budget: usize, j: usize) -> usize {
    let mut m = 1usize;
    while (m + 1).checked_pow(j as u32).is_some_and(|v| v <= budget) {
        m += 1;
    }
    m
}

impl<'a> PreparedTest<'a> {
    /// Grid p-values for every group, reusing this test's draws and observed
    /// focal units at every grid point.
    ///
    /// Each group's region covers only the parameters its statistic depends
    /// on; with `J` such parameters every interval has level `1 - γ/J`.
    pub fn ci(&self, cfg: &CiConfig) -> Result<TestReport> {
        cfg.validate()?;
        let ds = self.instance.dataset;
        let labels = ds.covariate().map(|c| c.labels());
        let estimates = estimate_by_key(ds, &self.exposures, &self.spec.family, &self.values, None).map_err(
            |e| match e {
                Error::EmptyArm { cell, .. } => Error::DegenerateInterval(cell),
                other => other,
            },
        )?;
        let mut warnings = self.warnings.clone();
        let mut reports = Vec::with_capacity(self.groups.len());
        for g in &self.groups {
            let keys: Vec<NuisanceKey> = g
                .strata
                .iter()
                .map(|&s| self.spec.family.key(self.strata[s].exposure, self.strata[s].level))
                .collect();
            let mut axes: Vec<NuisanceKey> = Vec::new();
            for k in &keys {
                if !axes.contains(k) {
                    axes.push(*k);
                }
            }
            let stratum_axis: Vec<usize> = keys.iter().map(|k| axes.iter().position(|a| a == k).unwrap()).collect();
            let j = axes.len();
            let full = cfg.grid_size.checked_pow(j as u32);
            let (m, truncated) = match full {
                Some(total) if total <= cfg.grid_budget => (cfg.grid_size, false),
                _ => (per_axis_points(cfg.grid_budget, j).clamp(2, cfg.grid_size), true),
            };
            if truncated {
                warnings.push(format!(
                    "{}: grid thinned to {m} points per axis to respect the budget of {}",
                    g.key, cfg.grid_budget
                ));
            }
            let z = normal_quantile(1.0 - cfg.gamma / (2.0 * j as f64));
            let mut intervals = Vec::with_capacity(j);
            let mut grids = Vec::with_capacity(j);
            for key in &axes {
                let est = estimates[key];
                let se = est.se.ok_or_else(|| Error::DegenerateInterval(key.label(labels)))?;
                let (lower, upper) = (est.tau_hat - z * se, est.tau_hat + z * se);
                grids.push(uniform_grid(lower, upper, m));
                intervals.push(AxisInterval {
                    parameter: key.label(labels),
                    estimate: est.tau_hat,
                    se,
                    z,
                    lower,
                    upper,
                    points: m,
                });
            }

            // table[(d * S + k) * m + i]: stratum k of draw d at grid value i of its axis.
            let s_count = g.strata.len();
            let b = g.draws.len();
            let mut table = vec![0.0; b * s_count * m];
            for (d, draw) in g.draws.iter().enumerate() {
                for (k, parts) in draw.iter().enumerate() {
                    let grid = &grids[stratum_axis[k]];
                    for (i, &tau) in grid.iter().enumerate() {
                        table[(d * s_count + k) * m + i] = super::stratum_stat(parts, tau);
                    }
                }
            }

            let n_points = m.pow(j as u32);
            let mut idx = vec![0usize; j];
            let mut buf = vec![0.0; s_count];
            let mut stats = vec![0.0; b];
            let mut evaluations = Vec::with_capacity(n_points);
            let mut best: Option<(f64, Vec<f64>)> = None;
            for _ in 0..n_points {
                for (d, slot) in stats.iter_mut().enumerate() {
                    for k in 0..s_count {
                        buf[k] = table[(d * s_count + k) * m + idx[stratum_axis[k]]];
                    }
                    *slot = g.combine(&buf);
                }
                let p = empirical_pvalue(g.observed_stat, &stats);
                if best.as_ref().map_or(true, |(bp, _)| p > *bp) {
                    best = Some((p, stats.clone()));
                }
                evaluations.push(GridEvaluation {
                    tau: idx.iter().enumerate().map(|(a, &i)| grids[a][i]).collect(),
                    pvalue: p,
                });
                for a in (0..j).rev() {
                    idx[a] += 1;
                    if idx[a] < m {
                        break;
                    }
                    idx[a] = 0;
                }
            }
            let (max_p, best_stats) = best.expect("grid is nonempty");
            let pvalue = (max_p + cfg.gamma).min(1.0);
            let grid = GroupGrid {
                gamma: cfg.gamma,
                axes: intervals,
                truncated,
                max_grid_pvalue: max_p,
                evaluations,
            };
            reports.push(self.group_report(g, pvalue, &best_stats, None, Some(grid)));
        }
        Ok(self.assemble(
            Technique::ConfidenceInterval {
                gamma: cfg.gamma,
                grid_size: cfg.grid_size,
                grid_budget: cfg.grid_budget,
            },
            None,
            reports,
            warnings,
        ))
    }
}
