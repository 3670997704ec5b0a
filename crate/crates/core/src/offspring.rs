//! Offspring laws `(p_ℓ)_{ℓ≥1}` for the three branching regimes.
//!
//! The heavy-tailed families are defined through exact survival functions
//! (`P(Z ≥ ℓ) = ℓ^{-α}` and `P(Z ≥ ℓ) = 1/ℓ`), which gives O(1) inverse
//! sampling and exact tail constants.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Open01;
use thiserror::Error;

/// Truncation point of the direct part of the ζ(α) sum.
const ZETA_DIRECT_TERMS: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LawError {
    #[error("explicit law must have at least one probability")]
    Empty,
    #[error("probability p_{index} = {value} is negative or not finite")]
    BadProbability { index: usize, value: f64 },
    #[error("explicit probabilities sum to {0}, expected 1 within 1e-12")]
    NotNormalized(f64),
    #[error("geometric parameter q = {0} must lie in (0, 1)")]
    BadGeometric(f64),
    #[error("stable index alpha = {0} must lie in (1, 2)")]
    BadAlpha(f64),
    #[error("cannot parse offspring law `{0}`")]
    Parse(String),
}

/// A moment that may diverge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn finite(self) -> Option<f64> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Moment::Infinite)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OffspringLaw {
    /// `p_1..p_L` with cached cumulative sums.
    ExplicitFinite { probs: Vec<f64>, cdf: Vec<f64> },
    /// `p_ℓ = (1-q) q^{ℓ-1}`.
    Geometric { q: f64 },
    /// `P(Z ≥ ℓ) = ℓ^{-α}`, `α ∈ (1, 2)`.
    StableTail { alpha: f64 },
    /// `P(Z ≥ ℓ) = 1/ℓ`.
    NeveuTail,
}

impl OffspringLaw {
    pub fn explicit(probs: Vec<f64>) -> Result<Self, LawError> {
        if probs.is_empty() {
            return Err(LawError::Empty);
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(LawError::BadProbability { index: i + 1, value: p });
            }
        }
        let mut acc = 0.0;
        let cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if (acc - 1.0).abs() > 1e-12 {
            return Err(LawError::NotNormalized(acc));
        }
        Ok(OffspringLaw::ExplicitFinite { probs, cdf })
    }

    pub fn geometric(q: f64) -> Result<Self, LawError> {
        if !(q > 0.0 && q < 1.0) {
            return Err(LawError::BadGeometric(q));
        }
        Ok(OffspringLaw::Geometric { q })
    }

    pub fn stable(alpha: f64) -> Result<Self, LawError> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(LawError::BadAlpha(alpha));
        }
        Ok(OffspringLaw::StableTail { alpha })
    }

    pub fn neveu() -> Self {
        OffspringLaw::NeveuTail
    }

    /// `P(Z ≥ ℓ)`.
    pub fn survival(&self, l: u64) -> f64 {
        if l <= 1 {
            return 1.0;
        }
        match self {
            OffspringLaw::ExplicitFinite { cdf, .. } => {
                let idx = (l - 1) as usize; // P(Z ≥ l) = 1 - F(l-1)
                if idx > cdf.len() {
                    0.0
                } else {
                    (1.0 - cdf[idx - 1]).max(0.0)
                }
            }
            OffspringLaw::Geometric { q } => q.powf((l - 1) as f64),
            _ => self.survival_real(l as f64),
        }
    }

    fn survival_real(&self, x: f64) -> f64 {
        match self {
            OffspringLaw::StableTail { alpha } => x.powf(-alpha),
            OffspringLaw::NeveuTail => 1.0 / x,
            OffspringLaw::Geometric { q } => q.powf(x - 1.0),
            OffspringLaw::ExplicitFinite { .. } => self.survival(x.ceil() as u64),
        }
    }

    /// `P(Z = ℓ)`; zero for `ℓ = 0`.
    pub fn pmf(&self, l: u64) -> f64 {
        if l == 0 {
            return 0.0;
        }
        match self {
            OffspringLaw::ExplicitFinite { probs, .. } => {
                probs.get((l - 1) as usize).copied().unwrap_or(0.0)
            }
            OffspringLaw::Geometric { q } => (1.0 - q) * q.powf((l - 1) as f64),
            _ => self.pmf_real(l as f64),
        }
    }

    /// Smooth extension `S(x) - S(x+1)` of the pmf for the tail families,
    /// evaluated without cancellation for large `x`.
    pub(crate) fn pmf_real(&self, x: f64) -> f64 {
        match self {
            OffspringLaw::StableTail { alpha } => {
                // x^{-α} (1 - (1 + 1/x)^{-α})
                x.powf(-alpha) * -(-alpha * (1.0 / x).ln_1p()).exp_m1()
            }
            OffspringLaw::NeveuTail => 1.0 / (x * (x + 1.0)),
            OffspringLaw::Geometric { q } => (1.0 - q) * q.powf(x - 1.0),
            OffspringLaw::ExplicitFinite { .. } => self.pmf(x.round() as u64),
        }
    }

    /// Largest ℓ with positive mass, if finite.
    pub fn support_max(&self) -> Option<u64> {
        match self {
            OffspringLaw::ExplicitFinite { probs, .. } => probs
                .iter()
                .rposition(|&p| p > 0.0)
                .map(|i| i as u64 + 1),
            _ => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.sample(Open01);
        self.sample_with_uniform(u)
    }

    /// Deterministic transform of a uniform `u ∈ (0, 1)` into an offspring
    /// count. Tail families invert the survival function; the others invert
    /// the CDF.
    pub fn sample_with_uniform(&self, u: f64) -> u64 {
        match self {
            OffspringLaw::ExplicitFinite { cdf, .. } => {
                let idx = cdf.partition_point(|&c| c < u);
                if idx < cdf.len() {
                    idx as u64 + 1
                } else {
                    // Rounding left the final cumulative sum a hair below u.
                    self.support_max().unwrap_or(1)
                }
            }
            OffspringLaw::Geometric { q } => {
                let z = ((-u).ln_1p() / q.ln()).ceil();
                if z < 1.0 {
                    1
                } else {
                    z as u64
                }
            }
            OffspringLaw::StableTail { alpha } => floor_to_count(u.powf(-1.0 / alpha)),
            OffspringLaw::NeveuTail => floor_to_count(1.0 / u),
        }
    }

    pub fn mean(&self) -> Moment {
        match self {
            OffspringLaw::ExplicitFinite { probs, .. } => Moment::Finite(
                probs
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i + 1) as f64 * p)
                    .sum(),
            ),
            OffspringLaw::Geometric { q } => Moment::Finite(1.0 / (1.0 - q)),
            OffspringLaw::StableTail { alpha } => Moment::Finite(zeta(*alpha)),
            OffspringLaw::NeveuTail => Moment::Infinite,
        }
    }

    pub fn second_moment(&self) -> Moment {
        match self {
            OffspringLaw::ExplicitFinite { probs, .. } => Moment::Finite(
                probs
                    .iter()
                    .enumerate()
                    .map(|(i, p)| ((i + 1) * (i + 1)) as f64 * p)
                    .sum(),
            ),
            OffspringLaw::Geometric { q } => Moment::Finite((1.0 + q) / ((1.0 - q) * (1.0 - q))),
            OffspringLaw::StableTail { .. } | OffspringLaw::NeveuTail => Moment::Infinite,
        }
    }

    /// `p0` in `p_ℓ ∼ p0 / ℓ^{1+α}`; zero for light-tailed laws.
    pub fn tail_constant(&self) -> f64 {
        match self {
            OffspringLaw::StableTail { alpha } => *alpha,
            OffspringLaw::NeveuTail => 1.0,
            _ => 0.0,
        }
    }
}

fn floor_to_count(x: f64) -> u64 {
    if x >= u64::MAX as f64 {
        u64::MAX
    } else {
        (x.floor() as u64).max(1)
    }
}

/// Riemann zeta for `s > 1`: direct sum to 10^6 plus the Euler–Maclaurin
/// tail `∫ + f/2 - f'/12 + f'''/720`.
pub fn zeta(s: f64) -> f64 {
    let n = ZETA_DIRECT_TERMS;
    let mut sum = 0.0;
    // Smallest terms first.
    for l in (1..=n).rev() {
        sum += (l as f64).powf(-s);
    }
    let x = n as f64;
    let f = x.powf(-s);
    let tail = x.powf(1.0 - s) / (s - 1.0) - f / 2.0 + s * f / (12.0 * x)
        - s * (s + 1.0) * (s + 2.0) * f / (720.0 * x * x * x);
    sum + tail
}

impl fmt::Display for OffspringLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OffspringLaw::ExplicitFinite { probs, .. } => {
                write!(f, "explicit(")?;
                for (i, p) in probs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{p:?}")?;
                }
                write!(f, ")")
            }
            OffspringLaw::Geometric { q } => write!(f, "geometric(q={q:?})"),
            OffspringLaw::StableTail { alpha } => write!(f, "stable(alpha={alpha:?})"),
            OffspringLaw::NeveuTail => write!(f, "neveu"),
        }
    }
}

/// Parses `geometric(q=0.5)`, `stable(alpha=1.5)`, `neveu`, `explicit(0.2,0.8)`.
impl FromStr for OffspringLaw {
    type Err = LawError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || LawError::Parse(s.to_string());
        if s == "neveu" || s == "neveu()" {
            return Ok(OffspringLaw::NeveuTail);
        }
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let name = s[..open].trim();
        let inner = &s[open + 1..s.len() - 1];
        let keyed = |key: &str| -> Result<f64, LawError> {
            let (k, v) = inner.split_once('=').ok_or_else(bad)?;
            if k.trim() != key {
                return Err(bad());
            }
            v.trim().parse::<f64>().map_err(|_| bad())
        };
        match name {
            "geometric" => OffspringLaw::geometric(keyed("q")?),
            "stable" => OffspringLaw::stable(keyed("alpha")?),
            "explicit" => {
                let probs = inner
                    .split(',')
                    .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>, _>>()?;
                OffspringLaw::explicit(probs)
            }
            _ => Err(bad()),
        }
    }
}
