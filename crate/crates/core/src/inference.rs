//! Tail-exponent and flow-exponent estimators.
//!
//! `pareto_mle` is the primary tail fit, `hill_estimator` the cross-check and
//! `select_xmin` the KS-minimizing choice of tail onset. `alpha_from_flows`
//! regresses log-wealth growth on log gross-product growth, and
//! `AccountingAlpha` measures wealth created per unit of gross product.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fewest tail samples accepted by any fit.
pub const MIN_TAIL: usize = 10;
/// Fewest samples accepted by [`select_xmin`].
pub const MIN_SELECT: usize = 100;
/// Largest number of x_min candidates scanned by [`select_xmin`].
pub const MAX_CANDIDATES: usize = 200;
/// Fewest trajectory points accepted by [`alpha_from_flows`].
pub const MIN_FLOW_POINTS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParetoFit {
    pub alpha_hat: f64,
    pub x_min: f64,
    /// `alpha_hat / sqrt(n_tail)`.
    pub stderr: f64,
    pub ks_distance: f64,
    pub n_tail: usize,
}

/// Continuous Pareto MLE above `x_min`: `n / sum(ln(x / x_min))`.
pub fn pareto_mle(samples: &[f64], x_min: f64) -> Result<ParetoFit> {
    if !(x_min > 0.0 && x_min.is_finite()) {
        return Err(Error::domain(format!("x_min must be positive, got {x_min}")));
    }
    let mut tail: Vec<f64> = samples.iter().copied().filter(|&x| x >= x_min).collect();
    tail.sort_by(f64::total_cmp);
    let log_sum: f64 = tail.iter().map(|&x| (x / x_min).ln()).sum();
    fit_sorted_tail(&tail, x_min, log_sum)
}

fn fit_sorted_tail(tail: &[f64], x_min: f64, log_sum: f64) -> Result<ParetoFit> {
    let n = tail.len();
    if n < MIN_TAIL {
        return Err(Error::insufficient(format!(
            "{n} samples at or above x_min = {x_min}, need {MIN_TAIL}"
        )));
    }
    if !(log_sum > 0.0) {
        return Err(Error::insufficient(format!(
            "all tail samples equal x_min = {x_min}; exponent unbounded"
        )));
    }
    let alpha_hat = n as f64 / log_sum;
    Ok(ParetoFit {
        alpha_hat,
        x_min,
        stderr: alpha_hat / (n as f64).sqrt(),
        ks_distance: ks_distance_sorted(tail, |x| 1.0 - (x_min / x).powf(alpha_hat)),
        n_tail: n,
    })
}

/// Kolmogorov–Smirnov sup distance between an ascending sample and `cdf`.
pub fn ks_distance_sorted(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i as f64 + 1.0) / n - f);
    }
    d.clamp(0.0, 1.0)
}

/// Hill estimator over the `k` largest order statistics, with `x_(n-k)` as threshold.
pub fn hill_estimator(samples: &[f64], k: usize) -> Result<f64> {
    let n = samples.len();
    if k < MIN_TAIL || k >= n {
        return Err(Error::parameter(format!(
            "Hill tail count k = {k} must satisfy {MIN_TAIL} <= k < n = {n}"
        )));
    }
    let mut desc = samples.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let threshold = desc[k];
    if !(threshold > 0.0) {
        return Err(Error::domain(format!("Hill threshold {threshold} is not positive")));
    }
    let log_sum: f64 = desc[..k].iter().map(|&x| (x / threshold).ln()).sum();
    if !(log_sum > 0.0) {
        return Err(Error::insufficient("top order statistics are all tied"));
    }
    Ok(k as f64 / log_sum)
}

/// Tail onset minimizing the KS distance of the MLE fit above it.
pub fn select_xmin(samples: &[f64]) -> Result<f64> {
    Ok(fit_tail(samples)?.x_min)
}

/// [`select_xmin`] followed by [`pareto_mle`] at the chosen onset.
pub fn fit_tail(samples: &[f64]) -> Result<ParetoFit> {
    let n = samples.len();
    if n < MIN_SELECT {
        return Err(Error::insufficient(format!(
            "x_min selection needs {MIN_SELECT} samples, got {n}"
        )));
    }
    if let Some(bad) = samples.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::domain(format!("tail fit requires positive samples, got {bad}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);

    // suffix sums of ln x, so each candidate's MLE is O(1)
    let mut suffix_ln = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix_ln[i] = suffix_ln[i + 1] + sorted[i].ln();
    }

    let mut best: Option<ParetoFit> = None;
    for start in candidate_starts(&sorted) {
        let x_min = sorted[start];
        let n_tail = n - start;
        let log_sum = suffix_ln[start] - n_tail as f64 * x_min.ln();
        let Ok(fit) = fit_sorted_tail(&sorted[start..], x_min, log_sum) else {
            continue;
        };
        if best.is_none_or(|b| fit.ks_distance < b.ks_distance) {
            best = Some(fit);
        }
    }
    best.ok_or_else(|| Error::insufficient("no x_min candidate leaves 10 tail samples"))
}

/// Indices of the first occurrence of each candidate value, log-spaced in value.
fn candidate_starts(sorted: &[f64]) -> Vec<usize> {
    let n = sorted.len();
    // first index of every distinct value that still leaves MIN_TAIL points
    let mut firsts = Vec::new();
    for i in 0..=(n - MIN_TAIL) {
        if i == 0 || sorted[i] != sorted[i - 1] {
            firsts.push(i);
        }
    }
    if firsts.len() <= MAX_CANDIDATES {
        return firsts;
    }
    let lo = sorted[firsts[0]].ln();
    let hi = sorted[*firsts.last().unwrap()].ln();
    let mut picked = Vec::with_capacity(MAX_CANDIDATES);
    let mut cursor = 0;
    for c in 0..MAX_CANDIDATES {
        let target = lo + (hi - lo) * c as f64 / (MAX_CANDIDATES - 1) as f64;
        while cursor + 1 < firsts.len() && sorted[firsts[cursor]].ln() < target {
            cursor += 1;
        }
        if picked.last() != Some(&firsts[cursor]) {
            picked.push(firsts[cursor]);
        }
    }
    picked
}

/// One sampled point of a flow trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowPoint {
    pub mean_log_wealth: f64,
    pub log_omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowFit {
    pub alpha_hat: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    pub alpha_stderr: f64,
    pub n_increments: usize,
}

/// Least squares of increments `d(mean ln x) = slope * d(ln omega)` through the
/// origin; `alpha_hat = 1 / slope`.
pub fn alpha_from_flows(trajectory: &[FlowPoint]) -> Result<FlowFit> {
    if trajectory.len() < MIN_FLOW_POINTS {
        return Err(Error::insufficient(format!(
            "flow regression needs {MIN_FLOW_POINTS} points, got {}",
            trajectory.len()
        )));
    }
    let mut dx = Vec::with_capacity(trajectory.len() - 1);
    let mut dy = Vec::with_capacity(trajectory.len() - 1);
    for w in trajectory.windows(2) {
        let d_omega = w[1].log_omega - w[0].log_omega;
        if !(d_omega > 0.0) {
            return Err(Error::insufficient(
                "gross product must increase strictly between trajectory points",
            ));
        }
        dx.push(d_omega);
        dy.push(w[1].mean_log_wealth - w[0].mean_log_wealth);
    }
    let sxx: f64 = dx.iter().map(|x| x * x).sum();
    let sxy: f64 = dx.iter().zip(&dy).map(|(x, y)| x * y).sum();
    let slope = sxy / sxx;
    let m = dx.len();
    let rss: f64 = dx.iter().zip(&dy).map(|(x, y)| (y - slope * x).powi(2)).sum();
    let slope_stderr = (rss / (m as f64 - 1.0) / sxx).sqrt();
    Ok(FlowFit {
        alpha_hat: 1.0 / slope,
        slope,
        slope_stderr,
        alpha_stderr: slope_stderr / (slope * slope),
        n_increments: m,
    })
}

/// Effective correlation exponent `1 + dLambda / dOmega` from per-window
/// wealth and gross-product increments (ratio-of-sums estimator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccountingAlpha {
    pub alpha_hat: f64,
    pub stderr: f64,
    pub n_windows: usize,
}

pub fn alpha_from_accounting(windows: &[(f64, f64)]) -> Result<AccountingAlpha> {
    let used: Vec<(f64, f64)> = windows.iter().copied().filter(|w| w.1 > 0.0).collect();
    let n = used.len();
    if n < 2 {
        return Err(Error::insufficient(format!(
            "accounting exponent needs 2 windows with gross product, got {n}"
        )));
    }
    let d_lambda: f64 = used.iter().map(|w| w.0).sum();
    let d_omega: f64 = used.iter().map(|w| w.1).sum();
    let ratio = d_lambda / d_omega;
    // linearized variance of a ratio of sums
    let mean_omega = d_omega / n as f64;
    let var: f64 = used
        .iter()
        .map(|&(l, o)| (l - ratio * o).powi(2))
        .sum::<f64>()
        / (n as f64 - 1.0);
    Ok(AccountingAlpha {
        alpha_hat: 1.0 + ratio,
        stderr: (var / n as f64).sqrt() / mean_omega,
        n_windows: n,
    })
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
