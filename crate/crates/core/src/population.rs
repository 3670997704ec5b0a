//! Exact event-driven simulation of the logistic branching process.
//!
//! Every individual gives birth at rate `b` to `ℓ ~ (p_ℓ)` children of its
//! own type and dies at rate `d + cN/K`. Time is kept in model units and
//! converted to rescaled units `t / r_K` only when reported.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Exp1, Open01};
use thiserror::Error;

use crate::regime::RegimeConfig;

/// Label standing for the point `x_0` used after extinction.
pub const EXTINCT_LABEL: u32 = 0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PopulationError {
    #[error("horizon {0} must be finite and nonnegative")]
    Horizon(f64),
    #[error("observation grid must be sorted and lie in [0, {horizon}]")]
    Grid { horizon: f64 },
    #[error("type label 0 is reserved for the extinct state")]
    ReservedLabel,
    #[error("lyapunov function needs n > 0 and 0 < eps < n_*, got n = {n}, eps = {eps}")]
    Lyapunov { n: f64, eps: f64 },
}

/// Types of the living individuals, one label per individual.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PopulationState {
    types: Vec<u32>,
    time: f64,
}

impl PopulationState {
    pub fn from_types(types: Vec<u32>) -> Result<Self, PopulationError> {
        if types.contains(&EXTINCT_LABEL) {
            return Err(PopulationError::ReservedLabel);
        }
        Ok(Self { types, time: 0.0 })
    }

    /// `n` individuals labelled `1..=n`, so every family is trackable.
    pub fn distinct(n: u64) -> Self {
        Self {
            types: (1..=n as u32).collect(),
            time: 0.0,
        }
    }

    /// `n` individuals with i.i.d. uniform labels in `1..=alphabet`.
    pub fn iid_uniform<R: Rng + ?Sized>(n: u64, alphabet: u32, rng: &mut R) -> Self {
        Self {
            types: (0..n).map(|_| rng.random_range(1..=alphabet)).collect(),
            time: 0.0,
        }
    }

    pub fn from_counts(counts: &BTreeMap<u32, u64>) -> Result<Self, PopulationError> {
        let mut types = Vec::new();
        for (&label, &count) in counts {
            types.extend(std::iter::repeat_n(label, count as usize));
        }
        Self::from_types(types)
    }

    pub fn size(&self) -> u64 {
        self.types.len() as u64
    }

    /// Model time of the state.
    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn counts(&self) -> BTreeMap<u32, u64> {
        let mut out = BTreeMap::new();
        for &t in &self.types {
            *out.entry(t).or_insert(0) += 1;
        }
        out
    }

    /// `ρ^K`: type frequencies, or `δ_{x_0}` once extinct.
    pub fn frequencies(&self) -> Vec<(u32, f64)> {
        if self.types.is_empty() {
            return vec![(EXTINCT_LABEL, 1.0)];
        }
        let n = self.types.len() as f64;
        self.counts()
            .into_iter()
            .map(|(t, c)| (t, c as f64 / n))
            .collect()
    }

    pub fn types(&self) -> &[u32] {
        &self.types
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PopulationEvent {
    Birth { label: u32, offspring: u64 },
    Death { label: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EventCounts {
    pub births: u64,
    pub offspring_total: u64,
    pub deaths: u64,
}

/// Gillespie stepper for one replicate.
pub struct PopulationSim<'a> {
    cfg: &'a RegimeConfig,
    state: PopulationState,
    counts: EventCounts,
}

impl<'a> PopulationSim<'a> {
    pub fn new(cfg: &'a RegimeConfig, initial: PopulationState) -> Self {
        Self {
            cfg,
            state: initial,
            counts: EventCounts::default(),
        }
    }

    pub fn state(&self) -> &PopulationState {
        &self.state
    }

    pub fn into_state(self) -> PopulationState {
        self.state
    }

    pub fn event_counts(&self) -> EventCounts {
        self.counts
    }

    /// Model time of the next event, or `None` once extinct.
    pub fn next_event_time<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        let n = self.state.size();
        if n == 0 {
            return None;
        }
        let e: f64 = rng.sample(Exp1);
        Some(self.state.time + e / self.cfg.total_event_rate(n))
    }

    /// Applies the event occurring at model time `t`.
    pub fn fire<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) -> PopulationEvent {
        let n = self.state.size();
        debug_assert!(n > 0);
        self.state.time = t;
        let birth_rate = self.cfg.b() * n as f64;
        let total = self.cfg.total_event_rate(n);
        let u: f64 = rng.sample(Open01);
        let idx = rng.random_range(0..n as usize);
        let label = self.state.types[idx];
        if u * total < birth_rate {
            let offspring = self.cfg.offspring().sample(rng);
            self.state
                .types
                .extend(std::iter::repeat_n(label, offspring as usize));
            self.counts.births += 1;
            self.counts.offspring_total += offspring;
            PopulationEvent::Birth { label, offspring }
        } else {
            self.state.types.swap_remove(idx);
            self.counts.deaths += 1;
            PopulationEvent::Death { label }
        }
    }
}

/// Piecewise-constant size path with every jump recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct SizePath {
    time_scale: f64,
    mass_scale: f64,
    /// Model times of the pieces; `times[0] = 0`.
    times: Vec<f64>,
    sizes: Vec<f64>,
    horizon: f64,
}

impl SizePath {
    fn new(time_scale: f64, mass_scale: f64, initial: u64, horizon: f64) -> Self {
        Self {
            time_scale,
            mass_scale,
            times: vec![0.0],
            sizes: vec![initial as f64],
            horizon,
        }
    }

    /// Builds a path directly in rescaled units from `(time, n)` pieces.
    pub fn from_rescaled(points: &[(f64, f64)], horizon: f64) -> Self {
        assert!(!points.is_empty() && points[0].0 == 0.0);
        Self {
            time_scale: 1.0,
            mass_scale: 1.0,
            times: points.iter().map(|p| p.0).collect(),
            sizes: points.iter().map(|p| p.1).collect(),
            horizon,
        }
    }

    fn push(&mut self, t: f64, size: u64) {
        self.times.push(t);
        self.sizes.push(size as f64);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Horizon in rescaled time.
    pub fn horizon(&self) -> f64 {
        self.horizon / self.time_scale
    }

    /// `(rescaled time, n^K)` pieces.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times
            .iter()
            .zip(&self.sizes)
            .map(|(t, s)| (t / self.time_scale, s / self.mass_scale))
    }

    pub fn min_rescaled(&self) -> f64 {
        self.pieces().map(|p| p.1).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySummary {
    /// Observation times in rescaled units.
    pub grid: Vec<f64>,
    /// `n^K` at each grid point.
    pub sizes: Vec<f64>,
    /// `ρ^K` at each grid point, when requested.
    pub frequencies: Option<Vec<Vec<(u32, f64)>>>,
    pub extinct: bool,
    pub size_path: Option<SizePath>,
    pub final_state: PopulationState,
    pub events: EventCounts,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimOptions {
    /// Rescaled observation times; empty means `{0, T}`.
    pub grid: Vec<f64>,
    pub record_frequencies: bool,
    pub record_size_path: bool,
}

pub(crate) fn validate_grid(grid: &[f64], horizon: f64) -> Result<Vec<f64>, PopulationError> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(PopulationError::Horizon(horizon));
    }
    if grid.is_empty() {
        return Ok(if horizon > 0.0 { vec![0.0, horizon] } else { vec![0.0] });
    }
    let ok = grid.windows(2).all(|w| w[0] <= w[1])
        && grid[0] >= 0.0
        && *grid.last().unwrap() <= horizon;
    if !ok {
        return Err(PopulationError::Grid { horizon });
    }
    Ok(grid.to_vec())
}

/// Simulates up to rescaled time `horizon`.
///
/// Grid points that coincide with a jump report the left limit.
pub fn simulate_population<R: Rng + ?Sized>(
    cfg: &RegimeConfig,
    initial: PopulationState,
    horizon: f64,
    opts: &SimOptions,
    rng: &mut R,
) -> Result<TrajectorySummary, PopulationError> {
    let grid = validate_grid(&opts.grid, horizon)?;
    let r_k = cfg.time_scale();
    let s_k = cfg.mass_scale();
    let model_horizon = horizon * r_k;

    let mut path = opts
        .record_size_path
        .then(|| SizePath::new(r_k, s_k, initial.size(), model_horizon));
    let mut sizes = Vec::with_capacity(grid.len());
    let mut freqs = opts.record_frequencies.then(Vec::new);
    let mut sim = PopulationSim::new(cfg, initial);
    let mut next_grid = 0;

    let mut observe = |sim: &PopulationSim, upto: f64, sizes: &mut Vec<f64>, next: &mut usize| {
        while *next < grid.len() && grid[*next] * r_k <= upto {
            sizes.push(sim.state().size() as f64 / s_k);
            if let Some(f) = freqs.as_mut() {
                f.push(sim.state().frequencies());
            }
            *next += 1;
        }
    };

    loop {
        match sim.next_event_time(rng) {
            Some(t) if t <= model_horizon => {
                observe(&sim, t, &mut sizes, &mut next_grid);
                sim.fire(t, rng);
                if let Some(p) = path.as_mut() {
                    p.push(t, sim.state().size());
                }
            }
            _ => {
                observe(&sim, f64::INFINITY, &mut sizes, &mut next_grid);
                break;
            }
        }
    }
    let extinct = sim.state().size() == 0;
    let events = sim.event_counts();
    let mut final_state = sim.into_state();
    if !extinct {
        final_state.time = model_horizon;
    }
    Ok(TrajectorySummary {
        grid,
        sizes,
        frequencies: freqs,
        extinct,
        size_path: path,
        final_state,
        events,
    })
}

/// Exit rule defining `τ_K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSpec {
    /// `inf{t : |n(t) - center| > eps}`.
    Band { center: f64, eps: f64 },
    /// `inf{t : n(t) < level}`, e.g. `level = c_0/2`.
    LowerBarrier { level: f64 },
}

impl ThresholdSpec {
    fn exits(&self, n: f64) -> bool {
        match *self {
            ThresholdSpec::Band { center, eps } => (n - center).abs() > eps,
            ThresholdSpec::LowerBarrier { level } => n < level,
        }
    }
}

/// First exit time in rescaled units, checked at every jump.
pub fn tau_k(path: &SizePath, spec: ThresholdSpec) -> Option<f64> {
    path.pieces().find(|&(_, n)| spec.exits(n)).map(|(t, _)| t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupationMeasure {
    pub edges: Vec<f64>,
    /// Time spent in `[edges[i], edges[i+1])`.
    pub mass: Vec<f64>,
    /// Time spent outside the bins.
    pub outside: f64,
    /// `min(t, τ_K)`.
    pub total: f64,
    pub tau: Option<f64>,
}

impl OccupationMeasure {
    /// Fraction of the accounted time spent in `[lo, hi)`, resolved on
    /// bin edges.
    pub fn fraction_in(&self, lo: f64, hi: f64) -> f64 {
        if self.total == 0.0 {
            return 0.0;
        }
        let inside: f64 = self
            .edges
            .windows(2)
            .zip(&self.mass)
            .filter(|(w, _)| w[0] >= lo && w[1] <= hi)
            .map(|(_, m)| m)
            .sum();
        inside / self.total
    }
}

/// `Γ_K([0, t] × B) = ∫_0^{t∧τ_K} 1{n(s) ∈ B} ds` over the given bins, with
/// `t` the path horizon.
pub fn occupation_measure(path: &SizePath, edges: &[f64], stop: ThresholdSpec) -> OccupationMeasure {
    assert!(edges.len() >= 2 && edges.windows(2).all(|w| w[0] < w[1]));
    let tau = tau_k(path, stop);
    let end = tau.map_or(path.horizon(), |t| t.min(path.horizon()));
    let mut mass = vec![0.0; edges.len() - 1];
    let mut outside = 0.0;
    let pieces: Vec<(f64, f64)> = path.pieces().collect();
    for (i, &(start, n)) in pieces.iter().enumerate() {
        if start >= end {
            break;
        }
        let stop_t = pieces.get(i + 1).map_or(end, |p| p.0.min(end));
        let dt = stop_t - start;
        let bin = edges.partition_point(|&e| e <= n);
        if bin == 0 || bin == edges.len() {
            outside += dt;
        } else {
            mass[bin - 1] += dt;
        }
    }
    OccupationMeasure {
        edges: edges.to_vec(),
        mass,
        outside,
        total: end,
        tau,
    }
}

/// `V_ε(n) = n/(n_*+ε) - 1 - log(n/(n_*-ε))`.
pub fn lyapunov_v(n: f64, n_star: f64, eps: f64) -> Result<f64, PopulationError> {
    if !(n > 0.0) || !(eps > 0.0 && eps < n_star) {
        return Err(PopulationError::Lyapunov { n, eps });
    }
    Ok(n / (n_star + eps) - 1.0 - (n / (n_star - eps)).ln())
}
