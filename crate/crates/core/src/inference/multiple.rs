//! Family-wise decisions over per-cell p-values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjustment {
    /// Reject when `p <= α / m`.
    Bonferroni,
    /// Step-down: sort ascending, reject while `p_(i) <= α / (m - i + 1)`.
    Holm,
    /// Marginal tests at level `α` (`p < α`), no correction. The "any
    /// rejection" flag is the event counted by a family-wise error rate.
    UnadjustedAny,
}

impl Adjustment {
    pub const ALL: [Adjustment; 3] = [Adjustment::Bonferroni, Adjustment::Holm, Adjustment::UnadjustedAny];

    pub fn name(self) -> &'static str {
        match self {
            Adjustment::Bonferroni => "bonferroni",
            Adjustment::Holm => "holm",
            Adjustment::UnadjustedAny => "unadjusted_any",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decisions {
    pub method: Adjustment,
    pub alpha: f64,
    pub reject: BTreeMap<String, bool>,
    pub any_reject: bool,
}

pub fn adjust_multiple(pvalues: &BTreeMap<String, f64>, alpha: f64, method: Adjustment) -> Decisions {
    let m = pvalues.len() as f64;
    let mut reject: BTreeMap<String, bool> = pvalues.keys().map(|k| (k.clone(), false)).collect();
    match method {
        Adjustment::Bonferroni => {
            for (k, &p) in pvalues {
                reject.insert(k.clone(), p <= alpha / m);
            }
        }
        Adjustment::UnadjustedAny => {
            for (k, &p) in pvalues {
                reject.insert(k.clone(), p < alpha);
            }
        }
        Adjustment::Holm => {
            let mut order: Vec<(&String, f64)> = pvalues.iter().map(|(k, &p)| (k, p)).collect();
            order.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
            for (i, (k, p)) in order.into_iter().enumerate() {
                if p <= alpha / (m - i as f64) {
                    reject.insert(k.clone(), true);
                } else {
                    break;
                }
            }
        }
    }
    let any_reject = reject.values().any(|&r| r);
    Decisions {
        method,
        alpha,
        reject,
        any_reject,
    }
}
