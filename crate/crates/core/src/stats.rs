//! Goodness-of-fit statistics and pass/fail reports for Monte Carlo checks.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::seeding::replicate_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sample is empty")]
    Empty,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("observed and expected vectors differ in length ({0} vs {1})")]
    Length(usize, usize),
    #[error("expected probabilities must be nonnegative and sum to one")]
    Probabilities,
    #[error("a cell with zero expected probability has observations")]
    ImpossibleCell,
    #[error("need at least two nonempty cells")]
    Degenerate,
    #[error("rate and horizon must be positive")]
    Rate,
    #[error("significance must lie in (0, 1), got {0}")]
    Significance(f64),
}

fn sorted_finite(sample: &[f64]) -> Result<Vec<f64>, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::Empty);
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// `sup_x |F_n(x) - F(x)|` against a continuous reference CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64, StatsError> {
    let s = sorted_finite(sample)?;
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

/// KS distance on `[0, censor)` for a sample censored at a common time:
/// `(value, censored)` pairs, censored values are ignored except in `n`.
pub fn ks_statistic_censored(
    sample: &[(f64, bool)],
    censor: f64,
    cdf: impl Fn(f64) -> f64,
) -> Result<f64, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::Empty);
    }
    let observed: Vec<f64> = sample.iter().filter(|(_, c)| !c).map(|(x, _)| *x).collect();
    let n = sample.len() as f64;
    let mut s = observed;
    if s.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    s.sort_by(f64::total_cmp);
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    // Just below the censoring time the empirical CDF equals the
    // uncensored fraction.
    d = d.max((cdf(censor) - s.len() as f64 / n).abs());
    Ok(d)
}

/// Two-sample KS statistic; ties are handled by stepping over all equal
/// values at once.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let a = sorted_finite(a)?;
    let b = sorted_finite(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Pearson statistic `Σ (O - nπ)² / (nπ)`.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<f64, StatsError> {
    if observed.len() != probs.len() {
        return Err(StatsError::Length(observed.len(), probs.len()));
    }
    if probs.iter().any(|&p| !(p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(StatsError::Probabilities);
    }
    let n: u64 = observed.iter().sum();
    if n == 0 {
        return Err(StatsError::Empty);
    }
    let mut chi = 0.0;
    for (&o, &p) in observed.iter().zip(probs) {
        if p == 0.0 {
            if o > 0 {
                return Err(StatsError::ImpossibleCell);
            }
            continue;
        }
        let e = n as f64 * p;
        chi += (o as f64 - e).powi(2) / e;
    }
    Ok(chi)
}

/// Pearson test that two count vectors over the same cells share one
/// distribution. Returns the statistic and its degrees of freedom; cells
/// empty in both samples are dropped.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<(f64, usize), StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::Length(a.len(), b.len()));
    }
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(StatsError::Empty);
    }
    let total = na + nb;
    let mut chi = 0.0;
    let mut cells = 0;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        cells += 1;
        let (ea, eb) = (na * col / total, nb * col / total);
        chi += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    if cells < 2 {
        return Err(StatsError::Degenerate);
    }
    Ok((chi, cells - 1))
}

/// Merges adjacent cells (in the given order) until every merged cell has
/// expected count at least `min_expected`; returns the merged observed
/// counts and probabilities.
pub fn pool_cells(observed: &[u64], probs: &[f64], min_expected: f64) -> (Vec<u64>, Vec<f64>) {
    let n: u64 = observed.iter().sum();
    let mut obs = Vec::new();
    let mut ps = Vec::new();
    let (mut o, mut p) = (0u64, 0.0);
    for (&oi, &pi) in observed.iter().zip(probs) {
        o += oi;
        p += pi;
        if p * n as f64 >= min_expected {
            obs.push(o);
            ps.push(p);
            o = 0;
            p = 0.0;
        }
    }
    if p > 0.0 || o > 0 {
        match (obs.last_mut(), ps.last_mut()) {
            (Some(lo), Some(lp)) => {
                *lo += o;
                *lp += p;
            }
            _ => {
                obs.push(o);
                ps.push(p);
            }
        }
    }
    (obs, ps)
}

/// Upper `significance` quantile of the chi-square law with `df` degrees.
pub fn chi_square_critical(df: usize, significance: f64) -> Result<f64, StatsError> {
    if !(significance > 0.0 && significance < 1.0) {
        return Err(StatsError::Significance(significance));
    }
    if df == 0 {
        return Err(StatsError::Degenerate);
    }
    let dist = ChiSquared::new(df as f64).map_err(|_| StatsError::Degenerate)?;
    Ok(dist.inverse_cdf(1.0 - significance))
}

/// `(count - rate·horizon) / sqrt(rate·horizon)`.
pub fn poisson_rate_test(count: u64, horizon: f64, rate: f64) -> Result<f64, StatsError> {
    if !(rate > 0.0 && horizon > 0.0) {
        return Err(StatsError::Rate);
    }
    let mean = rate * horizon;
    Ok((count as f64 - mean) / mean.sqrt())
}

/// Critical value of the two-sample KS statistic at `significance`,
/// calibrated by random relabelling of the pooled sample. Valid for
/// discrete data, where the asymptotic Kolmogorov law is not.
pub fn permutation_ks_threshold(
    a: &[f64],
    b: &[f64],
    significance: f64,
    permutations: usize,
    seed: u64,
) -> Result<f64, StatsError> {
    if !(significance > 0.0 && significance < 1.0) {
        return Err(StatsError::Significance(significance));
    }
    sorted_finite(a)?;
    sorted_finite(b)?;
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut rng = replicate_rng(seed, 0);
    let mut stats = Vec::with_capacity(permutations);
    for _ in 0..permutations {
        pooled.shuffle(&mut rng);
        let (x, y) = pooled.split_at(a.len());
        stats.push(two_sample_ks(x, y)?);
    }
    stats.sort_by(f64::total_cmp);
    let idx = (((1.0 - significance) * permutations as f64).ceil() as usize).clamp(1, permutations) - 1;
    Ok(stats[idx])
}

/// Rate MLE of an exponential sample censored on the right:
/// `#observed / Σ times`.
pub fn exponential_rate_censored(sample: &[(f64, bool)]) -> Result<f64, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::Empty);
    }
    let events = sample.iter().filter(|(_, c)| !c).count();
    let exposure: f64 = sample.iter().map(|(t, _)| t).sum();
    if events == 0 || !(exposure > 0.0) {
        return Err(StatsError::Degenerate);
    }
    Ok(events as f64 / exposure)
}

/// Mean and standard error.
pub fn mean_and_se(sample: &[f64]) -> Result<(f64, f64), StatsError> {
    if sample.len() < 2 {
        return Err(StatsError::Empty);
    }
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Outcome of one check. `pass` is `statistic <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
    pub n: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl TestReport {
    pub fn new(test: impl Into<String>, statistic: f64, threshold: f64, n: u64, seed: u64) -> Self {
        Self {
            test: test.into(),
            statistic,
            threshold,
            pass: statistic <= threshold,
            n,
            seed,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }

    /// One JSON object with keys in lexicographic order.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report is serializable");
        serde_json::to_string(&value).expect("value is serializable")
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{} {}: statistic={:.6} threshold={:.6} n={} seed={}",
            if self.pass { "PASS" } else { "FAIL" },
            self.test,
            self.statistic,
            self.threshold,
            self.n,
            self.seed
        )
    }
}
