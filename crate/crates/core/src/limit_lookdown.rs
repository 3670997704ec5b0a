//! The limiting lookdown driven by `Λ`, projected onto levels `1..=k`.
//!
//! For fixed `k` the projection is a finite-rate Markov jump process: each
//! `J ⊂ [k]` with `|J| ≥ 2` fires at rate `λ̃(|J|)`, and the types at
//! levels `J \ {min J}` become copies of the type at `min J`.

use rand::Rng;
use rand_distr::Exp1;
use thiserror::Error;

use crate::coalescent::{binomial, sample_subset};
pub use crate::lambda::LambdaMeasure;
use crate::lookdown::apply_birth_restricted;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitLookdownError {
    #[error("sample size k must be at least 2, got {0}")]
    SampleSize(usize),
    #[error("initial types must have length k = {k}, got {got}")]
    InitialLength { k: usize, got: usize },
    #[error("horizon must be finite and nonnegative, got {0}")]
    Horizon(f64),
}

/// `λ̃` per subset size on `[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedRates {
    k: usize,
    /// `per_subset[j]` for `j ∈ 2..=k`; entries 0 and 1 are zero.
    per_subset: Vec<f64>,
}

impl RestrictedRates {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Rate of one particular subset of size `j`.
    pub fn rate(&self, j: usize) -> f64 {
        self.per_subset.get(j).copied().unwrap_or(0.0)
    }

    /// Rate of all subsets of size `j` together.
    pub fn size_rate(&self, j: usize) -> f64 {
        binomial(self.k, j) * self.rate(j)
    }

    pub fn total(&self) -> f64 {
        (2..=self.k).map(|j| self.size_rate(j)).sum()
    }

    fn sample_size<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mut u = rng.random::<f64>() * self.total();
        for j in 2..=self.k {
            u -= self.size_rate(j);
            if u < 0.0 {
                return j;
            }
        }
        (2..=self.k).rev().find(|&j| self.size_rate(j) > 0.0).unwrap_or(2)
    }
}

/// `λ̃(J) = a·1{|J|=2} + ∫ u^{|J|}(1-u)^{k-|J|} Λ_0(du)/u²`.
pub fn restricted_event_rates(lambda: &LambdaMeasure, k: usize) -> Result<RestrictedRates, LimitLookdownError> {
    if k < 2 {
        return Err(LimitLookdownError::SampleSize(k));
    }
    let mut per_subset = vec![0.0; k + 1];
    for (j, r) in per_subset.iter_mut().enumerate().skip(2) {
        *r = lambda.collision_rate(k, j);
    }
    Ok(RestrictedRates { k, per_subset })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitEvent {
    pub time: f64,
    /// Sorted levels in `1..=k`.
    pub levels: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitRun {
    pub k: usize,
    pub horizon: f64,
    pub events: Vec<LimitEvent>,
    /// Types at levels `1..=k` after each event, starting with the initial
    /// vector at time 0.
    pub types: Vec<(f64, Vec<u32>)>,
}

pub fn simulate_limit_lookdown<R: Rng + ?Sized>(
    lambda: &LambdaMeasure,
    k: usize,
    initial: Vec<u32>,
    horizon: f64,
    rng: &mut R,
) -> Result<LimitRun, LimitLookdownError> {
    let rates = restricted_event_rates(lambda, k)?;
    simulate_with_rates(&rates, initial, horizon, rng)
}

pub fn simulate_with_rates<R: Rng + ?Sized>(
    rates: &RestrictedRates,
    initial: Vec<u32>,
    horizon: f64,
    rng: &mut R,
) -> Result<LimitRun, LimitLookdownError> {
    let k = rates.k;
    if initial.len() != k {
        return Err(LimitLookdownError::InitialLength { k, got: initial.len() });
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(LimitLookdownError::Horizon(horizon));
    }
    let total = rates.total();
    let mut current = initial;
    let mut run = LimitRun {
        k,
        horizon,
        events: Vec::new(),
        types: vec![(0.0, current.clone())],
    };
    if total <= 0.0 {
        return Ok(run);
    }
    let mut t = 0.0;
    loop {
        let e: f64 = rng.sample(Exp1);
        t += e / total;
        if t > horizon {
            break;
        }
        let j = rates.sample_size(rng);
        let levels: Vec<u64> = sample_subset(k, j, rng).into_iter().map(|i| i as u64 + 1).collect();
        apply_birth_restricted(&mut current, &levels, k, u64::MAX);
        run.types.push((t, current.clone()));
        run.events.push(LimitEvent { time: t, levels });
    }
    Ok(run)
}
