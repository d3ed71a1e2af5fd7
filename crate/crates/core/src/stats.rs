//! Conditional variances and variance-ratio test statistics.

use serde::Serialize;

use crate::error::{Error, Result};

/// Running count, mean and sum of squared deviations (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Moments::default();
        for &x in xs {
            m.push(x);
        }
        m
    }

    /// Pools two groups after shifting every value of `other` by `shift`.
    pub fn merged_shifted(&self, other: &Moments, shift: f64) -> Moments {
        if other.n == 0 {
            return *self;
        }
        let other_mean = other.mean + shift;
        if self.n == 0 {
            return Moments {
                n: other.n,
                mean: other_mean,
                m2: other.m2,
            };
        }
        let n = self.n + other.n;
        let d = other_mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64,
        }
    }

    /// Sample variance with denominator `n - 1`; `None` below two values.
    pub fn variance(&self) -> Option<f64> {
        (self.n >= 2).then(|| (self.m2 / (self.n - 1) as f64).max(0.0))
    }
}

/// Sample variance of `y` over units with `focal[i]` and `t[i] == arm`.
pub fn conditional_variance(y: &[f64], t: &[u8], focal: &[bool], arm: u8, cell: &str) -> Result<f64> {
    let mut m = Moments::default();
    for i in 0..y.len() {
        if focal[i] && t[i] == arm {
            m.push(y[i]);
        }
    }
    m.variance().ok_or_else(|| Error::TooFewUnits {
        cell: cell.to_string(),
        arm,
        count: m.n,
    })
}

/// `max(v1/v0, v0/v1)` with `0/0 = 1` and `x/0 = +inf`.
pub fn variance_ratio(v1: f64, v0: f64) -> f64 {
    match (v1 == 0.0, v0 == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => f64::INFINITY,
        (false, false) => (v1 / v0).max(v0 / v1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestStatisticValue {
    /// At least 1; `+inf` when exactly one arm has zero variance.
    #[serde(serialize_with = "serialize_extended")]
    pub value: f64,
    pub n_treated_used: usize,
    pub n_control_used: usize,
}

/// JSON has no infinity; `+inf` is written as the string `"inf"`.
pub fn serialize_extended<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str(&v.to_string())
    }
}

/// Variance-ratio statistic from per-arm moments.
pub fn ts_from_moments(treated: &Moments, control: &Moments, cell: &str) -> Result<TestStatisticValue> {
    let v1 = treated.variance().ok_or_else(|| Error::TooFewUnits {
        cell: cell.to_string(),
        arm: 1,
        count: treated.n,
    })?;
    let v0 = control.variance().ok_or_else(|| Error::TooFewUnits {
        cell: cell.to_string(),
        arm: 0,
        count: control.n,
    })?;
    Ok(TestStatisticValue {
        value: variance_ratio(v1, v0),
        n_treated_used: treated.n,
        n_control_used: control.n,
    })
}

/// Statistic for one stratum over the units flagged in `focal`. With the
/// exposure-only strata this is the per-exposure statistic; restricted to a
/// covariate level it is the per-cell statistic.
pub fn ts_stratum(y: &[f64], t: &[u8], focal: &[bool], cell: &str) -> Result<TestStatisticValue> {
    let mut arms = [Moments::default(); 2];
    for i in 0..y.len() {
        if focal[i] {
            arms[t[i] as usize].push(y[i]);
        }
    }
    ts_from_moments(&arms[1], &arms[0], cell)
}

/// Statistic over an explicit list of unit indices.
pub fn ts_units(y: &[f64], t: &[u8], units: &[usize], cell: &str) -> Result<TestStatisticValue> {
    let mut arms = [Moments::default(); 2];
    for &i in units {
        arms[t[i] as usize].push(y[i]);
    }
    ts_from_moments(&arms[1], &arms[0], cell)
}

/// Weighted sum `Σ w_s TS_s`. Zero-weight components are skipped, so an
/// infinite statistic only propagates when its weight is positive.
pub fn ts_combined(values: &[f64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::WeightMismatch(format!(
            "{} statistics but {} weights",
            values.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::WeightMismatch("weights must be finite and nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::WeightMismatch(format!("weights sum to {total}, not 1")));
    }
    Ok(combine_unchecked(values, weights))
}

pub(crate) fn combine_unchecked(values: &[f64], weights: &[f64]) -> f64 {
    values
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, &w)| w * v)
        .sum()
}
