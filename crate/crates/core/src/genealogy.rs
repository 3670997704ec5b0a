//! Ancestral partitions read off lookdown event logs.

use thiserror::Error;

use crate::coalescent::{CoalescentError, Partition, PartitionPath};
use crate::limit_lookdown::LimitRun;
use crate::lookdown::{apply_birth, LogEntry, LookdownEventLog, LookdownMode, LookdownRun};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenealogyError {
    #[error("two events share time {0}")]
    SimultaneousEvents(f64),
    #[error("event times must be increasing within [0, {horizon}], got {time}")]
    EventTime { time: f64, horizon: f64 },
    #[error("event level set {0:?} must hold at least two distinct levels in 1..=k")]
    LevelSet(Vec<u64>),
    #[error("sample size k = {k} exceeds the population size {size} at the horizon")]
    Degenerate { k: usize, size: u64 },
    #[error("sample size must be at least 1")]
    SampleSize,
    #[error("ancestry tracing needs a full oracle-mode log")]
    NotOracle,
    #[error("expected two-element sample paths, got {0}")]
    NotPairs(usize),
    #[error(transparent)]
    Path(#[from] CoalescentError),
}

/// Events touching at least two of the lowest `k` levels, in forward
/// rescaled time.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingPath {
    k: usize,
    horizon: f64,
    events: Vec<(f64, Vec<u64>)>,
}

impl CountingPath {
    /// `events` must have strictly increasing times in `[0, horizon]`, each
    /// with a sorted level set `J ⊂ [k]`, `|J| ≥ 2`.
    pub fn new(k: usize, horizon: f64, events: Vec<(f64, Vec<u64>)>) -> Result<Self, GenealogyError> {
        if k == 0 {
            return Err(GenealogyError::SampleSize);
        }
        let mut prev = f64::NEG_INFINITY;
        for (t, levels) in &events {
            if *t == prev {
                return Err(GenealogyError::SimultaneousEvents(*t));
            }
            if !(*t > prev && *t >= 0.0 && *t <= horizon) {
                return Err(GenealogyError::EventTime { time: *t, horizon });
            }
            let sorted = levels.windows(2).all(|w| w[0] < w[1]);
            if levels.len() < 2 || !sorted || levels[0] == 0 || *levels.last().unwrap() > k as u64 {
                return Err(GenealogyError::LevelSet(levels.clone()));
            }
            prev = *t;
        }
        Ok(Self { k, horizon, events })
    }

    /// From a lookdown run; oracle logs are restricted to `[k]` first.
    /// Runs that end with fewer than `k` particles are rejected as
    /// degenerate.
    pub fn from_lookdown_run(run: &LookdownRun) -> Result<Self, GenealogyError> {
        let k = run.log.k();
        if run.final_size < k as u64 {
            return Err(GenealogyError::Degenerate { k, size: run.final_size });
        }
        Self::from_log(&run.log, run.time_scale, run.horizon)
    }

    /// From any log; model times are divided by `time_scale`.
    pub fn from_log(log: &LookdownEventLog, time_scale: f64, horizon: f64) -> Result<Self, GenealogyError> {
        let k = log.k();
        let restricted;
        let log = match log.mode() {
            LookdownMode::Oracle => {
                restricted = log.restrict(k);
                &restricted
            }
            LookdownMode::Scalable => log,
        };
        let events = log
            .entries()
            .iter()
            .filter_map(|e| match e {
                LogEntry::Birth { time, levels, .. } => Some((rescale(*time, time_scale), levels.clone())),
                LogEntry::Death { .. } => None,
            })
            .collect();
        Self::new(k, horizon, events)
    }

    pub fn from_limit_run(run: &LimitRun) -> Result<Self, GenealogyError> {
        let events = run.events.iter().map(|e| (e.time, e.levels.clone())).collect();
        Self::new(run.k, run.horizon, events)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn events(&self) -> &[(f64, Vec<u64>)] {
        &self.events
    }

    /// Event times of one particular set `J`.
    pub fn times_of(&self, levels: &[u64]) -> Vec<f64> {
        self.events.iter().filter(|(_, j)| j == levels).map(|(t, _)| *t).collect()
    }
}

fn rescale(model_time: f64, time_scale: f64) -> f64 {
    model_time / time_scale
}

/// Current level of each sampled lineage, read backward in time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AncestralLevelMap {
    levels: Vec<u64>,
}

impl AncestralLevelMap {
    /// Sample `i` starts at level `i`.
    pub fn new(k: usize) -> Self {
        Self {
            levels: (1..=k as u64).collect(),
        }
    }

    pub fn level(&self, sample: usize) -> u64 {
        self.levels[sample]
    }

    pub fn levels(&self) -> &[u64] {
        &self.levels
    }

    /// Undoes one birth with level set `J` (sorted): lineages in `J` move to
    /// the parent level `min J`, the others close the gaps left by the
    /// inserted levels below them.
    pub fn apply(&mut self, levels: &[u64]) {
        let parent = levels[0];
        let inserted = &levels[1..];
        for v in self.levels.iter_mut() {
            if levels.binary_search(v).is_ok() {
                *v = parent;
            } else {
                *v -= inserted.partition_point(|&j| j < *v) as u64;
            }
        }
    }
}

/// The ancestral partition process of the sample at levels `1..=k` at the
/// horizon, as a function of backward time.
pub fn psi(path: &CountingPath) -> Result<PartitionPath, GenealogyError> {
    let k = path.k;
    let mut map = AncestralLevelMap::new(k);
    let mut partition = Partition::singletons(k);
    let mut out = PartitionPath::new(partition.clone(), path.horizon);
    for (t, levels) in path.events.iter().rev() {
        map.apply(levels);
        let parent = levels[0];
        let merged: Vec<usize> = partition
            .blocks()
            .iter()
            .enumerate()
            .filter(|(_, b)| map.level((b[0] - 1) as usize) == parent)
            .map(|(i, _)| i)
            .collect();
        if merged.len() >= 2 {
            partition.merge(&merged);
            out.push(path.horizon - t, merged)?;
        }
        debug_assert!({
            let mut occupied: Vec<u64> = partition.blocks().iter().map(|b| map.level((b[0] - 1) as usize)).collect();
            occupied.sort_unstable();
            occupied.iter().enumerate().all(|(i, &l)| l == i as u64 + 1)
        });
    }
    Ok(out)
}

/// Ancestral partitions by following every individual's parent through a
/// full oracle log. `initial_size` is `N(0)`.
pub fn trace_ancestry_oracle(
    log: &LookdownEventLog,
    initial_size: u64,
    time_scale: f64,
    horizon: f64,
) -> Result<PartitionPath, GenealogyError> {
    if log.mode() != LookdownMode::Oracle {
        return Err(GenealogyError::NotOracle);
    }
    let k = log.k();
    // parent[id], birth time; founders are born at -∞.
    let mut parent: Vec<usize> = (0..initial_size as usize).collect();
    let mut born: Vec<f64> = vec![f64::NEG_INFINITY; initial_size as usize];
    let mut alive: Vec<usize> = (0..initial_size as usize).collect();
    let mut births: Vec<f64> = Vec::new();
    for entry in log.entries() {
        match entry {
            LogEntry::Birth { time, levels, .. } => {
                let t = rescale(*time, time_scale);
                let p = alive[(levels[0] - 1) as usize];
                let first_child = parent.len();
                // Give every inserted copy its own identity.
                let mut ids = alive.clone();
                apply_birth(&mut ids, levels);
                let mut next = first_child;
                for &lv in &levels[1..] {
                    ids[(lv - 1) as usize] = next;
                    parent.push(p);
                    born.push(t);
                    next += 1;
                }
                alive = ids;
                births.push(t);
            }
            LogEntry::Death { .. } => {
                alive.pop();
            }
        }
    }
    if (alive.len() as u64) < k as u64 {
        return Err(GenealogyError::Degenerate { k, size: alive.len() as u64 });
    }
    let mut ancestor: Vec<usize> = alive[..k].to_vec();
    let mut partition = Partition::singletons(k);
    let mut out = PartitionPath::new(partition.clone(), horizon);
    for &t in births.iter().rev() {
        for a in ancestor.iter_mut() {
            while born[*a] >= t {
                *a = parent[*a];
            }
        }
        let blocks = partition.blocks();
        // One birth event has a single parent, so at most one new block.
        let mut merged = Vec::new();
        for (i, b) in blocks.iter().enumerate() {
            let root = ancestor[(b[0] - 1) as usize];
            if blocks.iter().enumerate().any(|(j, c)| j != i && ancestor[(c[0] - 1) as usize] == root) {
                merged.push(i);
            }
        }
        if merged.len() >= 2 {
            partition.merge(&merged);
            out.push(horizon - t, merged)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTime {
    pub time: f64,
    pub censored: bool,
}

/// First merger times of two-element sample paths, censored at the horizon.
pub fn pair_coalescence_times(paths: &[PartitionPath]) -> Result<Vec<PairTime>, GenealogyError> {
    paths
        .iter()
        .map(|p| {
            if p.initial().size() != 2 {
                return Err(GenealogyError::NotPairs(p.initial().size()));
            }
            Ok(match p.first_merger() {
                Some(time) => PairTime { time, censored: false },
                None => PairTime {
                    time: p.horizon(),
                    censored: true,
                },
            })
        })
        .collect()
}
