//! Prelimit merger rates `R_j(K, n)` of the lookdown genealogy and their
//! limits `R_j(n)`.
//!
//! With `N = s_K n` individuals, one birth of size `ℓ` hits exactly a given
//! `j`-subset of the lowest `k` levels with probability
//! `C(N+ℓ-k, ℓ+1-j) / C(N+ℓ, ℓ+1)`, so
//! `R_j(K, n) = r_K N b Σ_{ℓ ≥ j-1} p_ℓ C(N+ℓ-k, ℓ+1-j) / C(N+ℓ, ℓ+1)`.

use std::fmt::Write as _;

use rayon::prelude::*;
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::offspring::{Moment, OffspringLaw};
use crate::quad;
use crate::regime::{Regime, RegimeConfig};

/// Relative tail tolerance of the adaptive sum.
pub const TRUNCATION_TOL: f64 = 1e-10;
/// Terms summed directly before the tail of a heavy-tailed law is replaced
/// by its Euler–Maclaurin integral.
pub const DIRECT_TERMS: u64 = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("invalid level selection arguments N={size}, l={offspring}, k={k}, j={j}")]
    Selection { size: f64, offspring: u64, k: usize, j: usize },
    #[error("merger size j={j} must lie in 2..={k}")]
    MergerSize { j: usize, k: usize },
    #[error("rescaled size n={0} must be positive")]
    Size(f64),
    #[error("scaling parameter K={0} must be at least 1")]
    Scale(f64),
    #[error("birth rate b={0} must be positive")]
    BirthRate(f64),
    #[error("regime {regime} does not accept offspring law {law}")]
    Mismatch { regime: Regime, law: String },
    #[error("population size s_K n = {size} is below the sample size {k}")]
    TooSmall { size: f64, k: usize },
    #[error("grid point n={n} lies below c_0/2 = {lower}")]
    Grid { n: f64, lower: f64 },
}

/// How `s_K n` is turned into a population size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SizeMode {
    /// Real `N = s_K n`, as in the analysis.
    #[default]
    Real,
    /// `N = round(s_K n)`, matching what a simulation can realize.
    Rounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateQuery {
    pub regime: Regime,
    pub big_k: f64,
    pub k: usize,
    pub j: usize,
    pub n: f64,
    pub b: f64,
    pub offspring: OffspringLaw,
    pub size_mode: SizeMode,
}

impl RateQuery {
    pub fn new(
        regime: Regime,
        offspring: OffspringLaw,
        b: f64,
        big_k: f64,
        k: usize,
        j: usize,
        n: f64,
    ) -> Result<Self, RateError> {
        let q = Self {
            regime,
            big_k,
            k,
            j,
            n,
            b,
            offspring,
            size_mode: SizeMode::Real,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn from_config(cfg: &RegimeConfig, k: usize, j: usize, n: f64) -> Result<Self, RateError> {
        Self::new(
            cfg.regime(),
            cfg.offspring().clone(),
            cfg.b(),
            cfg.big_k() as f64,
            k,
            j,
            n,
        )
    }

    pub fn with_size_mode(mut self, mode: SizeMode) -> Self {
        self.size_mode = mode;
        self
    }

    pub fn with_k(&self, big_k: f64) -> Result<Self, RateError> {
        let mut q = self.clone();
        q.big_k = big_k;
        q.validate()?;
        Ok(q)
    }

    fn validate(&self) -> Result<(), RateError> {
        if self.j < 2 || self.j > self.k {
            return Err(RateError::MergerSize { j: self.j, k: self.k });
        }
        if !(self.n > 0.0 && self.n.is_finite()) {
            return Err(RateError::Size(self.n));
        }
        if !(self.big_k >= 1.0 && self.big_k.is_finite()) {
            return Err(RateError::Scale(self.big_k));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(RateError::BirthRate(self.b));
        }
        if !self.regime.accepts(&self.offspring) {
            return Err(RateError::Mismatch {
                regime: self.regime,
                law: self.offspring.to_string(),
            });
        }
        Ok(())
    }

    /// `N = s_K n`.
    pub fn population_size(&self) -> f64 {
        let s = self.regime.mass_scale(self.big_k) * self.n;
        match self.size_mode {
            SizeMode::Real => s,
            SizeMode::Rounded => s.round(),
        }
    }

    fn prefactor(&self) -> f64 {
        self.regime.time_scale(self.big_k) * self.population_size() * self.b
    }
}

fn ln_choose(x: f64, y: f64) -> f64 {
    ln_gamma(x + 1.0) - ln_gamma(y + 1.0) - ln_gamma(x - y + 1.0)
}

/// `C(N+ℓ-k, ℓ+1-j) / C(N+ℓ, ℓ+1)` through log-Gamma; `N` may be real.
pub fn level_selection_prob(size: f64, offspring: u64, k: usize, j: usize) -> Result<f64, RateError> {
    let bad = || RateError::Selection { size, offspring, k, j };
    if !(size >= k as f64) || j > k || j as u64 > offspring + 1 {
        return Err(bad());
    }
    let l = offspring as f64;
    let v = ln_choose(size + l - k as f64, l + 1.0 - j as f64) - ln_choose(size + l, l + 1.0);
    Ok(v.exp())
}

/// Same quantity as a finite product, exact to rounding for any size:
/// `∏_{i<j}(ℓ+1-i) ∏_{1≤i≤k-j}(N-i) / ∏_{i<k}(N+ℓ-i)`.
pub(crate) fn selection_product(size: f64, l: f64, k: usize, j: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..j {
        v *= (l + 1.0 - i as f64) / (size + l - i as f64);
    }
    for i in 1..=k - j {
        v *= (size - i as f64) / (size + l - (j + i - 1) as f64);
    }
    v
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Default, Clone, Copy)]
struct Accumulator {
    sum: f64,
    compensation: f64,
}

impl Accumulator {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// `R_j(K, n)` with the series truncated adaptively.
///
/// Light tails stop once `r_K N b P(Z > ℓ)` falls below `1e-10` of the
/// partial sum. For the power-law families the first [`DIRECT_TERMS`] terms
/// are summed and the rest is replaced by the midpoint Euler–Maclaurin
/// formula `∫_{L-1/2}^∞ f + f'(L-1/2)/24`, using the smooth extensions of
/// the pmf and of the selection probability.
pub fn rate_prelimit(q: &RateQuery) -> Result<f64, RateError> {
    q.validate()?;
    let size = q.population_size();
    if size < q.k as f64 {
        return Err(RateError::TooSmall { size, k: q.k });
    }
    let (k, j) = (q.k, q.j);
    let first = (j as u64 - 1).max(1);
    let term = |l: u64| q.offspring.pmf(l) * selection_product(size, l as f64, k, j);
    let mut acc = Accumulator::default();
    match &q.offspring {
        OffspringLaw::ExplicitFinite { .. } => {
            for l in first..=q.offspring.support_max().unwrap_or(0) {
                acc.add(term(l));
            }
        }
        OffspringLaw::Geometric { .. } => {
            let mut l = first;
            loop {
                acc.add(term(l));
                if q.offspring.survival(l + 1) < TRUNCATION_TOL * acc.value() {
                    break;
                }
                l += 1;
            }
        }
        OffspringLaw::StableTail { .. } | OffspringLaw::NeveuTail => {
            let last = first.max(DIRECT_TERMS);
            let mut stopped = false;
            for l in first..last {
                acc.add(term(l));
                if q.offspring.survival(l + 1) < TRUNCATION_TOL * acc.value() {
                    stopped = true;
                    break;
                }
            }
            if !stopped {
                acc.add(tail_integral(&q.offspring, size, k, j, last as f64));
            }
        }
    }
    Ok(q.prefactor() * acc.value())
}

/// `Σ_{ℓ ≥ from} p_ℓ h(ℓ)` for a smooth summand, by the midpoint rule's
/// Euler–Maclaurin expansion.
fn tail_integral(law: &OffspringLaw, size: f64, k: usize, j: usize, from: f64) -> f64 {
    let f = |x: f64| law.pmf_real(x) * selection_product(size, x, k, j);
    let a = from - 0.5;
    let integral = quad::integrate_to_infinity(f, a, size + a, 0.0, 1e-13);
    let h = 1e-2 * a;
    let derivative = (f(a + h) - f(a - h)) / (2.0 * h);
    integral + derivative / 24.0
}

/// `R_j(K, n)` by direct summation over `ℓ ≤ l_max`.
pub fn rate_prelimit_oracle(q: &RateQuery, l_max: u64) -> Result<f64, RateError> {
    q.validate()?;
    let size = q.population_size();
    if size < q.k as f64 {
        return Err(RateError::TooSmall { size, k: q.k });
    }
    let mut acc = Accumulator::default();
    for l in (q.j as u64 - 1).max(1)..=l_max {
        acc.add(q.offspring.pmf(l) * selection_product(size, l as f64, q.k, q.j));
    }
    Ok(q.prefactor() * acc.value())
}

/// The `K → ∞` limit `R_j(n)`; `big_k` is ignored.
pub fn rate_limit(q: &RateQuery) -> Result<f64, RateError> {
    q.validate()?;
    let (k, j, n, b) = (q.k as f64, q.j as f64, q.n, q.b);
    let p0 = q.offspring.tail_constant();
    Ok(match q.regime {
        Regime::FiniteVariance => {
            if q.j == 2 {
                match (q.offspring.mean(), q.offspring.second_moment()) {
                    (Moment::Finite(m), Moment::Finite(m2)) => b * (m + m2) / n,
                    _ => f64::INFINITY,
                }
            } else {
                0.0
            }
        }
        Regime::Stable { alpha } => p0 * b / n.powf(alpha - 1.0) * ln_beta(j - alpha, k - j + alpha).exp(),
        Regime::Neveu => b * p0 * ln_beta(j - 1.0, k - j + 1.0).exp(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub big_k: f64,
    pub j: usize,
    pub n: f64,
    pub prelimit: f64,
    pub limit: f64,
}

impl ConvergenceRow {
    pub fn gap(&self) -> f64 {
        (self.prelimit - self.limit).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub regime: Regime,
    pub k: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    /// `sup_{n, j} |R_j(K, n) - R_j(n)|` for each `K`, in input order.
    pub fn sup_gaps(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(kk, _)| *kk == r.big_k) {
                Some(e) => e.1 = e.1.max(r.gap()),
                None => out.push((r.big_k, r.gap())),
            }
        }
        out
    }

    /// Supremum over `n` for each `(K, j)`.
    pub fn sup_gaps_by_j(&self) -> Vec<(f64, usize, f64)> {
        let mut out: Vec<(f64, usize, f64)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(kk, j, _)| *kk == r.big_k && *j == r.j) {
                Some(e) => e.2 = e.2.max(r.gap()),
                None => out.push((r.big_k, r.j, r.gap())),
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("K,j,n,prelimit,limit,gap\n");
        for r in &self.rows {
            let _ = writeln!(s, "{:?},{},{:?},{:?},{:?},{:?}", r.big_k, r.j, r.n, r.prelimit, r.limit, r.gap());
        }
        s
    }
}

/// Evaluates `R_j(K, n)` against `R_j(n)` for every `K` in `ks`, `n` in
/// `n_grid` and `2 ≤ j ≤ k`. Grid points must lie at or above `c_0/2`.
pub fn convergence_report(cfg: &RegimeConfig, k: usize, ks: &[f64], n_grid: &[f64]) -> Result<ConvergenceReport, RateError> {
    let lower = cfg.default_c0() / 2.0;
    if let Some(&n) = n_grid.iter().find(|&&n| n < lower * (1.0 - 1e-12)) {
        return Err(RateError::Grid { n, lower });
    }
    let mut cells = Vec::new();
    for &big_k in ks {
        for j in 2..=k {
            for &n in n_grid {
                cells.push((big_k, j, n));
            }
        }
    }
    let rows = cells
        .into_par_iter()
        .map(|(big_k, j, n)| {
            let q = RateQuery::new(cfg.regime(), cfg.offspring().clone(), cfg.b(), big_k, k, j, n)?;
            Ok(ConvergenceRow {
                big_k,
                j,
                n,
                prelimit: rate_prelimit(&q)?,
                limit: rate_limit(&q)?,
            })
        })
        .collect::<Result<Vec<_>, RateError>>()?;
    Ok(ConvergenceReport {
        regime: cfg.regime(),
        k,
        rows,
    })
}
