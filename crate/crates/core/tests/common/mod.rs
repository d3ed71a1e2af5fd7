//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls into the crate's exposure, conditioning or statistic
//! code.

#![allow(dead_code)]

/// Exposure under a `>= thr` or `> thr` fraction-of-treated-neighbors rule,
/// computed from a plain edge list.
pub fn exposures(n: usize, edges: &[(usize, usize)], t: &[u8], thr: f64, strict: bool) -> Vec<u32> {
    let mut treated = vec![0usize; n];
    let mut deg = vec![0usize; n];
    for &(a, b) in edges {
        deg[a] += 1;
        deg[b] += 1;
        treated[a] += t[b] as usize;
        treated[b] += t[a] as usize;
    }
    (0..n)
        .map(|i| {
            if deg[i] == 0 {
                return 0;
            }
            let f = treated[i] as f64 / deg[i] as f64;
            (if strict { f > thr } else { f >= thr }) as u32
        })
        .collect()
}

/// All 0/1 vectors of length `n` with exactly `k` ones, in lexicographic
/// order of the set bits.
pub fn all_assignments(n: usize, k: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            out.push((0..n).map(|i| ((mask >> i) & 1) as u8).collect());
        }
    }
    out
}

/// Two-pass sample variance.
pub fn var(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

pub fn ratio(v1: f64, v0: f64) -> f64 {
    if v1 == 0.0 && v0 == 0.0 {
        1.0
    } else if v1 == 0.0 || v0 == 0.0 {
        f64::INFINITY
    } else {
        (v1 / v0).max(v0 / v1)
    }
}

/// Variance-ratio statistic over `units` with outcomes `y` and arms `t`.
pub fn stat(y: &[f64], t: &[u8], units: &[usize]) -> f64 {
    let a1: Vec<f64> = units.iter().filter(|&&i| t[i] == 1).map(|&i| y[i]).collect();
    let a0: Vec<f64> = units.iter().filter(|&&i| t[i] == 0).map(|&i| y[i]).collect();
    ratio(var(&a1), var(&a0))
}

/// One conditioning stratum as plain data.
#[derive(Debug, Clone)]
pub struct BruteStratum {
    pub exposure: u32,
    pub members: Vec<usize>,
}

/// Focal units of each stratum under `t_new`, or `None` when `t_new` fails
/// the acceptance rule `R > eps` for both arms and at least `min_arm`
/// focal units per arm.
pub fn accept(
    strata: &[BruteStratum],
    pi_new: &[u32],
    t_new: &[u8],
    eps: f64,
    min_arm: usize,
) -> Option<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    for s in strata {
        let focal: Vec<usize> = s.members.iter().copied().filter(|&i| pi_new[i] == s.exposure).collect();
        for arm in 0..2u8 {
            let c = focal.iter().filter(|&&i| t_new[i] == arm).count();
            if c as f64 / s.members.len() as f64 <= eps || c < min_arm {
                return None;
            }
        }
        out.push(focal);
    }
    Some(out)
}

/// Imputed outcome under a constant effect `tau` for a unit whose exposure
/// is unchanged.
pub fn impute(y: f64, t_obs: u8, t_new: u8, tau: f64) -> f64 {
    y + tau * (t_new as f64 - t_obs as f64)
}
