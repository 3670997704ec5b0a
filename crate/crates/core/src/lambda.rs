//! Finite measures `Λ = a δ_0 + Λ_0` on `[0, 1]`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use statrs::function::beta::ln_beta;
use thiserror::Error;

use crate::quad;

/// Lower cut-off for quadrature over densities with an integrable
/// singularity at 0.
pub const SINGULARITY_GUARD: f64 = 1e-12;
/// Absolute tolerance of density quadrature.
pub const QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LambdaError {
    #[error("atom at zero must be nonnegative, got {0}")]
    Atom(f64),
    #[error("scale must be positive, got {0}")]
    Scale(f64),
    #[error("beta index alpha = {0} must lie in (1, 2)")]
    Alpha(f64),
    #[error("measure has zero total mass")]
    Zero,
    #[error("cannot parse lambda measure `{0}`")]
    Parse(String),
}

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Density {
    None,
    /// `scale (1-u)^{α-1} u^{1-α}`.
    BetaPaper { alpha: f64, scale: f64 },
    /// `scale` on `(0, 1]`.
    UniformScaled { scale: f64 },
    General { density: DensityFn, total_mass: f64 },
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::None => f.write_str("None"),
            Density::BetaPaper { alpha, scale } => {
                write!(f, "BetaPaper {{ alpha: {alpha}, scale: {scale} }}")
            }
            Density::UniformScaled { scale } => write!(f, "UniformScaled {{ scale: {scale} }}"),
            Density::General { total_mass, .. } => {
                write!(f, "General {{ total_mass: {total_mass} }}")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LambdaMeasure {
    atom: f64,
    density: Density,
}

impl LambdaMeasure {
    pub fn new(atom: f64, density: Density) -> Result<Self, LambdaError> {
        if !(atom >= 0.0 && atom.is_finite()) {
            return Err(LambdaError::Atom(atom));
        }
        match &density {
            Density::BetaPaper { alpha, scale } => {
                if !(*alpha > 1.0 && *alpha < 2.0) {
                    return Err(LambdaError::Alpha(*alpha));
                }
                if !(*scale > 0.0) {
                    return Err(LambdaError::Scale(*scale));
                }
            }
            Density::UniformScaled { scale } if !(*scale > 0.0) => {
                return Err(LambdaError::Scale(*scale));
            }
            _ => {}
        }
        let m = Self { atom, density };
        if m.total_mass() <= 0.0 {
            return Err(LambdaError::Zero);
        }
        Ok(m)
    }

    /// Kingman's coalescent with effective population size `N_e`: `Λ = δ_0/N_e`.
    pub fn kingman(effective_size: f64) -> Result<Self, LambdaError> {
        if !(effective_size > 0.0) {
            return Err(LambdaError::Scale(effective_size));
        }
        Self::new(1.0 / effective_size, Density::None)
    }

    /// `scale (1-u)^{α-1} u^{1-α} du`, the Beta(2-α, α) family up to mass.
    pub fn beta(alpha: f64, scale: f64) -> Result<Self, LambdaError> {
        Self::new(0.0, Density::BetaPaper { alpha, scale })
    }

    /// `scale · du` (Bolthausen–Sznitman).
    pub fn uniform(scale: f64) -> Result<Self, LambdaError> {
        Self::new(0.0, Density::UniformScaled { scale })
    }

    pub fn general(
        atom: f64,
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, LambdaError> {
        let density: DensityFn = Arc::new(density);
        let d = density.clone();
        let total_mass = quad::integrate(move |u| d(u), 0.0, 1.0, QUAD_TOL, 1e-12);
        Self::new(atom, Density::General { density, total_mass })
    }

    pub fn atom(&self) -> f64 {
        self.atom
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn total_mass(&self) -> f64 {
        self.atom
            + match &self.density {
                Density::None => 0.0,
                Density::BetaPaper { alpha, scale } => scale * ln_beta(2.0 - alpha, *alpha).exp(),
                Density::UniformScaled { scale } => *scale,
                Density::General { total_mass, .. } => *total_mass,
            }
    }

    /// `∫ u^{j-2} (1-u)^{n-j} Λ(du)`: rate at which a given set of `j` out of
    /// `n` blocks merges. Caller guarantees `2 ≤ j ≤ n`.
    pub fn collision_rate(&self, n: usize, j: usize) -> f64 {
        debug_assert!(2 <= j && j <= n);
        let atom = if j == 2 { self.atom } else { 0.0 };
        let (nf, jf) = (n as f64, j as f64);
        atom + match &self.density {
            Density::None => 0.0,
            Density::BetaPaper { alpha, scale } => scale * ln_beta(jf - alpha, nf - jf + alpha).exp(),
            Density::UniformScaled { scale } => scale * ln_beta(jf - 1.0, nf - jf + 1.0).exp(),
            Density::General { density, .. } => quad::integrate(
                |u: f64| u.powi(j as i32 - 2) * (1.0 - u).powi((n - j) as i32) * density(u),
                SINGULARITY_GUARD,
                1.0,
                QUAD_TOL,
                1e-12,
            ),
        }
    }

    /// The density part as a closure on `(0, 1]`, for quadrature oracles.
    pub fn density_fn(&self) -> Option<DensityFn> {
        match &self.density {
            Density::None => None,
            Density::BetaPaper { alpha, scale } => {
                let (a, s) = (*alpha, *scale);
                Some(Arc::new(move |u: f64| s * (1.0 - u).powf(a - 1.0) * u.powf(1.0 - a)))
            }
            Density::UniformScaled { scale } => {
                let s = *scale;
                Some(Arc::new(move |_| s))
            }
            Density::General { density, .. } => Some(density.clone()),
        }
    }
}

impl fmt::Display for LambdaMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.density, self.atom) {
            (Density::None, a) => write!(f, "atom(a={a:?})"),
            (Density::BetaPaper { alpha, scale }, a) if a == 0.0 => {
                write!(f, "beta(alpha={alpha:?},scale={scale:?})")
            }
            (Density::UniformScaled { scale }, a) if a == 0.0 => write!(f, "uniform(scale={scale:?})"),
            (d, a) => write!(f, "lambda(atom={a:?},{d:?})"),
        }
    }
}

/// Parses `beta(alpha=1.5,scale=1.0)`, `uniform(scale=1)`, `kingman(ne=0.1875)`
/// and `atom(a=0.5)`.
impl FromStr for LambdaMeasure {
    type Err = LambdaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || LambdaError::Parse(s.to_string());
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let name = s[..open].trim();
        let mut args = std::collections::BTreeMap::new();
        for part in s[open + 1..s.len() - 1].split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            let v: f64 = v.trim().parse().map_err(|_| bad())?;
            args.insert(k.trim().to_string(), v);
        }
        let take = |key: &str, default: Option<f64>| args.get(key).copied().or(default).ok_or_else(bad);
        let allowed: &[&str] = match name {
            "beta" => &["alpha", "scale"],
            "uniform" => &["scale"],
            "kingman" => &["ne"],
            "atom" => &["a"],
            _ => return Err(bad()),
        };
        if args.keys().any(|k| !allowed.contains(&k.as_str())) {
            return Err(bad());
        }
        match name {
            "beta" => Self::beta(take("alpha", None)?, take("scale", Some(1.0))?),
            "uniform" => Self::uniform(take("scale", Some(1.0))?),
            "kingman" => Self::kingman(take("ne", None)?),
            _ => Self::new(take("a", None)?, Density::None),
        }
    }
}
