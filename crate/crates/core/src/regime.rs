//! Model parameters and the regime-dependent time and mass scales.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::offspring::{Moment, OffspringLaw};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegimeError {
    #[error("birth rate b = {0} must be positive")]
    BirthRate(f64),
    #[error("death rate d = {0} must be nonnegative")]
    DeathRate(f64),
    #[error("competition c = {0} must be positive")]
    Competition(f64),
    #[error("scaling parameter K must be a positive integer")]
    Scale,
    #[error("stable index alpha = {0} must lie in (1, 2)")]
    Alpha(f64),
    #[error("regime {regime} does not accept offspring law {law}")]
    Mismatch { regime: Regime, law: String },
    #[error("supercriticality b*m - d = {0} must be positive")]
    Subcritical(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Regime {
    FiniteVariance,
    Stable { alpha: f64 },
    Neveu,
}

impl Regime {
    /// `r_K`: model time per unit of rescaled time.
    pub fn time_scale(self, big_k: f64) -> f64 {
        match self {
            Regime::FiniteVariance => big_k,
            Regime::Stable { alpha } => big_k.powf(alpha - 1.0),
            Regime::Neveu => 1.0,
        }
    }

    /// `s_K`: individuals per unit of rescaled size.
    pub fn mass_scale(self, big_k: f64) -> f64 {
        match self {
            Regime::FiniteVariance | Regime::Stable { .. } => big_k,
            Regime::Neveu => big_k * big_k.ln(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::FiniteVariance => "finite-variance",
            Regime::Stable { .. } => "stable",
            Regime::Neveu => "neveu",
        }
    }

    pub fn accepts(self, law: &OffspringLaw) -> bool {
        match (self, law) {
            (Regime::FiniteVariance, OffspringLaw::Geometric { .. })
            | (Regime::FiniteVariance, OffspringLaw::ExplicitFinite { .. })
            | (Regime::Neveu, OffspringLaw::NeveuTail) => true,
            (Regime::Stable { alpha }, OffspringLaw::StableTail { alpha: a }) => alpha == *a,
            _ => false,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Stable { alpha } => write!(f, "stable(alpha={alpha})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Validated model parameters with the derived scales cached.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeConfig {
    b: f64,
    d: f64,
    c: f64,
    big_k: u64,
    regime: Regime,
    offspring: OffspringLaw,
    mean: Moment,
    second_moment: Moment,
    n_star: f64,
}

impl RegimeConfig {
    pub fn new(
        b: f64,
        d: f64,
        c: f64,
        big_k: u64,
        regime: Regime,
        offspring: OffspringLaw,
    ) -> Result<Self, RegimeError> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(RegimeError::BirthRate(b));
        }
        if !(d >= 0.0 && d.is_finite()) {
            return Err(RegimeError::DeathRate(d));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(RegimeError::Competition(c));
        }
        if big_k == 0 {
            return Err(RegimeError::Scale);
        }
        if let Regime::Stable { alpha } = regime {
            if !(alpha > 1.0 && alpha < 2.0) {
                return Err(RegimeError::Alpha(alpha));
            }
        }
        if !regime.accepts(&offspring) {
            return Err(RegimeError::Mismatch {
                regime,
                law: offspring.to_string(),
            });
        }
        let mean = offspring.mean();
        let second_moment = offspring.second_moment();
        let n_star = match (regime, mean) {
            (Regime::Neveu, _) => b * offspring.tail_constant() / c,
            (_, Moment::Finite(m)) => {
                let growth = b * m - d;
                if growth <= 0.0 {
                    return Err(RegimeError::Subcritical(growth));
                }
                growth / c
            }
            // accepts() rules this out
            (_, Moment::Infinite) => unreachable!("finite-mean regime with infinite mean"),
        };
        Ok(Self {
            b,
            d,
            c,
            big_k,
            regime,
            offspring,
            mean,
            second_moment,
            n_star,
        })
    }

    /// Same parameters at a different `K`.
    pub fn with_scale(&self, big_k: u64) -> Result<Self, RegimeError> {
        if big_k == 0 {
            return Err(RegimeError::Scale);
        }
        Ok(Self { big_k, ..self.clone() })
    }

    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn d(&self) -> f64 {
        self.d
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn big_k(&self) -> u64 {
        self.big_k
    }
    pub fn regime(&self) -> Regime {
        self.regime
    }
    pub fn offspring(&self) -> &OffspringLaw {
        &self.offspring
    }
    pub fn mean(&self) -> Moment {
        self.mean
    }
    pub fn second_moment(&self) -> Moment {
        self.second_moment
    }
    pub fn tail_constant(&self) -> f64 {
        self.offspring.tail_constant()
    }

    /// Carrying capacity in rescaled size units.
    pub fn n_star(&self) -> f64 {
        self.n_star
    }

    pub fn time_scale(&self) -> f64 {
        self.regime.time_scale(self.big_k as f64)
    }

    pub fn mass_scale(&self) -> f64 {
        self.regime.mass_scale(self.big_k as f64)
    }

    /// Default initial size `round(s_K n_*)`.
    pub fn default_initial_size(&self) -> u64 {
        (self.mass_scale() * self.n_star).round() as u64
    }

    /// Default lower barrier level `c_0 = n_*/2`.
    pub fn default_c0(&self) -> f64 {
        self.n_star / 2.0
    }

    /// Per-individual death rate at population size `n_individuals`.
    pub fn death_rate_per_capita(&self, n_individuals: u64) -> f64 {
        self.d + self.c * n_individuals as f64 / self.big_k as f64
    }

    /// Total event rate `bN + N(d + cN/K)`.
    pub fn total_event_rate(&self, n_individuals: u64) -> f64 {
        let n = n_individuals as f64;
        n * (self.b + self.death_rate_per_capita(n_individuals))
    }

    /// `N_e = n_*/(b(m + m^(2)))` in the finite-variance regime.
    pub fn effective_population_size(&self) -> Option<f64> {
        match (self.regime, self.mean, self.second_moment) {
            (Regime::FiniteVariance, Moment::Finite(m), Moment::Finite(m2)) => {
                Some(self.n_star / (self.b * (m + m2)))
            }
            _ => None,
        }
    }
}
