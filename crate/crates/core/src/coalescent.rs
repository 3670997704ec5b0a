//! Partitions of `[k]` and the Λ-coalescent on them.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Exp1;
use thiserror::Error;

use crate::lambda::LambdaMeasure;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoalescentError {
    #[error("merger of {j} blocks out of {n} is not defined (need 2 <= j <= n)")]
    MergerSize { n: usize, j: usize },
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("transition times must be strictly increasing")]
    Times,
}

/// Partition of `{1, ..., k}`; blocks sorted, ordered by least element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    blocks: Vec<Vec<u32>>,
}

impl Partition {
    pub fn singletons(k: usize) -> Self {
        Self {
            blocks: (1..=k as u32).map(|i| vec![i]).collect(),
        }
    }

    pub fn from_blocks(mut blocks: Vec<Vec<u32>>) -> Result<Self, CoalescentError> {
        for b in blocks.iter_mut() {
            if b.is_empty() {
                return Err(CoalescentError::Partition("empty block".into()));
            }
            b.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        let mut all: Vec<u32> = blocks.iter().flatten().copied().collect();
        all.sort_unstable();
        if all.iter().enumerate().any(|(i, &x)| x != i as u32 + 1) {
            return Err(CoalescentError::Partition(
                "blocks must be disjoint and cover 1..=k".into(),
            ));
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[Vec<u32>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Number of elements `k`.
    pub fn size(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// Merges the blocks at the given indices (into the current canonical
    /// order). Returns `false` and leaves the partition untouched when fewer
    /// than two distinct indices are given.
    pub fn merge(&mut self, indices: &[usize]) -> bool {
        let mut idx = indices.to_vec();
        idx.sort_unstable();
        idx.dedup();
        if idx.len() < 2 {
            return false;
        }
        let mut merged = Vec::new();
        for &i in idx.iter().rev() {
            merged.extend(self.blocks.remove(i));
        }
        merged.sort_unstable();
        let pos = self.blocks.partition_point(|b| b[0] < merged[0]);
        self.blocks.insert(pos, merged);
        true
    }

    /// Restriction to `{1, ..., m}`.
    pub fn restrict(&self, m: usize) -> Partition {
        let blocks = self
            .blocks
            .iter()
            .map(|b| b.iter().copied().filter(|&x| x as usize <= m).collect::<Vec<_>>())
            .filter(|b| !b.is_empty())
            .collect();
        Partition { blocks }
    }

    /// `true` if `self` is obtained from `finer` by merging blocks.
    pub fn is_coarsening_of(&self, finer: &Partition) -> bool {
        finer.blocks.iter().all(|fb| {
            self.blocks
                .iter()
                .any(|b| fb.iter().all(|x| b.binary_search(x).is_ok()))
        })
    }
}

/// `1,2|3|4`.
impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            for (j, x) in b.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{x}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for Partition {
    type Err = CoalescentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let blocks = s
            .split('|')
            .map(|b| {
                b.split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<u32>()
                            .map_err(|_| CoalescentError::Partition(s.to_string()))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Partition::from_blocks(blocks)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub time: f64,
    /// Indices of the merged blocks in the partition just before `time`.
    pub merged: Vec<usize>,
}

/// Càdlàg piecewise-constant path of partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPath {
    initial: Partition,
    transitions: Vec<Transition>,
    horizon: f64,
}

impl PartitionPath {
    pub fn new(initial: Partition, horizon: f64) -> Self {
        Self {
            initial,
            transitions: Vec::new(),
            horizon,
        }
    }

    pub fn initial(&self) -> &Partition {
        &self.initial
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn push(&mut self, time: f64, merged: Vec<usize>) -> Result<(), CoalescentError> {
        if let Some(last) = self.transitions.last() {
            if time <= last.time {
                return Err(CoalescentError::Times);
            }
        }
        let mut m = merged;
        m.sort_unstable();
        self.transitions.push(Transition { time, merged: m });
        Ok(())
    }

    /// The partitions visited, starting with the initial one.
    pub fn states(&self) -> Vec<(f64, Partition)> {
        let mut cur = self.initial.clone();
        let mut out = vec![(0.0, cur.clone())];
        for tr in &self.transitions {
            cur.merge(&tr.merged);
            out.push((tr.time, cur.clone()));
        }
        out
    }

    /// Partition at time `t` (right-continuous).
    pub fn at(&self, t: f64) -> Partition {
        let mut cur = self.initial.clone();
        for tr in self.transitions.iter().take_while(|tr| tr.time <= t) {
            cur.merge(&tr.merged);
        }
        cur
    }

    /// Time of the first merger, if any.
    pub fn first_merger(&self) -> Option<f64> {
        self.transitions.first().map(|t| t.time)
    }

    /// Sequence of visited partitions without holding times.
    pub fn jump_chain(&self) -> Vec<Partition> {
        self.states().into_iter().map(|(_, p)| p).collect()
    }

    /// `p0 -> p1 -> ...` rendering of the jump chain, used as a category key.
    pub fn jump_chain_key(&self) -> String {
        self.jump_chain()
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(" -> ")
    }
}

/// `λ_{n,j} = ∫ u^{j-2}(1-u)^{n-j} Λ(du)`.
pub fn merge_rate(lambda: &LambdaMeasure, n: usize, j: usize) -> Result<f64, CoalescentError> {
    if j < 2 || j > n {
        return Err(CoalescentError::MergerSize { n, j });
    }
    Ok(lambda.collision_rate(n, j))
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Cached `λ_{n,j}` and `C(n,j) λ_{n,j}` for `n ≤ k`.
#[derive(Debug, Clone)]
pub struct RateTable {
    rates: Vec<Vec<f64>>,
    /// `weighted[n][j] = C(n,j) λ_{n,j}`.
    weighted: Vec<Vec<f64>>,
    totals: Vec<f64>,
}

impl RateTable {
    pub fn new(lambda: &LambdaMeasure, k: usize) -> Self {
        let mut rates = vec![Vec::new(); k + 1];
        let mut weighted = vec![Vec::new(); k + 1];
        let mut totals = vec![0.0; k + 1];
        for n in 2..=k {
            rates[n] = vec![0.0; n + 1];
            weighted[n] = vec![0.0; n + 1];
            for j in 2..=n {
                let r = lambda.collision_rate(n, j);
                rates[n][j] = r;
                weighted[n][j] = binomial(n, j) * r;
                totals[n] += weighted[n][j];
            }
        }
        Self { rates, weighted, totals }
    }

    pub fn rate(&self, n: usize, j: usize) -> f64 {
        self.rates[n][j]
    }

    /// Total rate of leaving a state with `n` blocks.
    pub fn total(&self, n: usize) -> f64 {
        self.totals.get(n).copied().unwrap_or(0.0)
    }

    /// Draws the merger size given that an event happens with `n` blocks.
    pub fn sample_merger_size<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> usize {
        let mut u = rng.random::<f64>() * self.totals[n];
        for j in 2..=n {
            u -= self.weighted[n][j];
            if u < 0.0 {
                return j;
            }
        }
        // Rounding: fall back to the largest size with positive rate.
        (2..=n).rev().find(|&j| self.weighted[n][j] > 0.0).unwrap_or(2)
    }
}

/// Law of the merger size at the first event from `n` blocks.
pub fn jump_chain(lambda: &LambdaMeasure, n: usize) -> Result<Vec<f64>, CoalescentError> {
    if n < 2 {
        return Err(CoalescentError::MergerSize { n, j: 2 });
    }
    let w: Vec<f64> = (2..=n).map(|j| binomial(n, j) * lambda.collision_rate(n, j)).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Uniform `j`-subset of `0..n`, sorted (Floyd's algorithm).
pub(crate) fn sample_subset<R: Rng + ?Sized>(n: usize, j: usize, rng: &mut R) -> Vec<usize> {
    debug_assert!(j <= n);
    let mut chosen: Vec<usize> = Vec::with_capacity(j);
    for i in n - j..n {
        let t = rng.random_range(0..=i);
        if chosen.contains(&t) {
            chosen.push(i);
        } else {
            chosen.push(t);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Exact simulation of the Λ-coalescent started from `initial` up to `horizon`.
pub fn simulate_coalescent<R: Rng + ?Sized>(
    lambda: &LambdaMeasure,
    initial: Partition,
    horizon: f64,
    rng: &mut R,
) -> PartitionPath {
    let table = RateTable::new(lambda, initial.num_blocks().max(2));
    simulate_with_table(&table, initial, horizon, rng)
}

pub fn simulate_with_table<R: Rng + ?Sized>(
    table: &RateTable,
    initial: Partition,
    horizon: f64,
    rng: &mut R,
) -> PartitionPath {
    let mut path = PartitionPath::new(initial.clone(), horizon);
    let mut current = initial;
    let mut t = 0.0;
    loop {
        let n = current.num_blocks();
        if n < 2 {
            break;
        }
        let total = table.total(n);
        if total <= 0.0 {
            break;
        }
        let e: f64 = rng.sample(Exp1);
        t += e / total;
        if t > horizon {
            break;
        }
        let j = table.sample_merger_size(n, rng);
        let merged = sample_subset(n, j, rng);
        current.merge(&merged);
        path.push(t, merged).expect("holding times are positive");
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::replicate_rng;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn partition_canonical_form_and_merge() {
        let mut p = Partition::from_blocks(vec![vec![3], vec![2, 1], vec![4]]).unwrap();
        assert_eq!(p.to_string(), "1,2|3|4");
        assert!(p.merge(&[1, 2]));
        assert_eq!(p.to_string(), "1,2|3,4");
        assert!(!p.merge(&[0]));
        let mut q = Partition::singletons(4);
        q.merge(&[0, 3]);
        assert_eq!(q.to_string(), "1,4|2|3");
        assert!(q.is_coarsening_of(&Partition::singletons(4)));
        assert!(!Partition::singletons(4).is_coarsening_of(&q));
        assert_eq!(q.restrict(3).to_string(), "1|2|3");
        assert_eq!("1,4|2|3".parse::<Partition>().unwrap(), q);
        assert!(Partition::from_blocks(vec![vec![1], vec![1, 2]]).is_err());
        assert!(Partition::from_blocks(vec![vec![1], vec![3]]).is_err());
    }

    #[test]
    fn merge_rate_examples() {
        let u = LambdaMeasure::uniform(1.0).unwrap();
        assert!((merge_rate(&u, 3, 3).unwrap() - 0.5).abs() < 1e-14);
        assert!((merge_rate(&u, 3, 2).unwrap() - 0.5).abs() < 1e-14);
        let k = LambdaMeasure::new(0.5, crate::lambda::Density::None).unwrap();
        assert_eq!(merge_rate(&k, 4, 2).unwrap(), 0.5);
        assert_eq!(merge_rate(&k, 4, 3).unwrap(), 0.0);
        assert_eq!(RateTable::new(&k, 4).total(4), 3.0);
        let b = LambdaMeasure::beta(1.5, 1.0).unwrap();
        assert!((merge_rate(&b, 2, 2).unwrap() - FRAC_PI_2).abs() < 1e-12);
        assert!(merge_rate(&u, 3, 1).is_err());
        assert!(merge_rate(&u, 3, 4).is_err());
    }

    #[test]
    fn jump_chain_examples() {
        let k = LambdaMeasure::kingman(0.3).unwrap();
        for n in 2..8 {
            let jc = jump_chain(&k, n).unwrap();
            assert_eq!(jc[0], 1.0);
            assert!(jc[1..].iter().all(|&p| p == 0.0));
        }
        let u = LambdaMeasure::uniform(7.0).unwrap();
        let jc = jump_chain(&u, 3).unwrap();
        assert!((jc[0] - 0.75).abs() < 1e-14 && (jc[1] - 0.25).abs() < 1e-14);
        let near = jump_chain(&LambdaMeasure::beta(1.99, 1.0).unwrap(), 3).unwrap();
        let mid = jump_chain(&LambdaMeasure::beta(1.5, 1.0).unwrap(), 3).unwrap();
        assert!(near[0] > 0.99 && near[0] > mid[0]);
        assert!(jump_chain(&u, 1).is_err());
    }

    #[test]
    fn pair_coalescence_is_exponential_one() {
        let u = LambdaMeasure::uniform(1.0).unwrap();
        let reps = 100_000;
        let mut sum = 0.0;
        for r in 0..reps {
            let mut rng = replicate_rng(4, r);
            let p = simulate_coalescent(&u, Partition::singletons(2), 1e9, &mut rng);
            sum += p.first_merger().unwrap();
        }
        let mean = sum / reps as f64;
        assert!((mean - 1.0).abs() < 3.0 / (reps as f64).sqrt(), "{mean}");
    }

    #[test]
    fn triple_merger_probability_is_a_quarter() {
        let u = LambdaMeasure::uniform(2.5).unwrap();
        let reps = 40_000u64;
        let mut triples = 0;
        for r in 0..reps {
            let mut rng = replicate_rng(6, r);
            let p = simulate_coalescent(&u, Partition::singletons(3), 1e9, &mut rng);
            if p.transitions()[0].merged.len() == 3 {
                triples += 1;
            }
        }
        let f = triples as f64 / reps as f64;
        assert!((f - 0.25).abs() < 3.0 * (0.25f64 * 0.75 / reps as f64).sqrt(), "{f}");
    }

    #[test]
    fn kingman_only_binary_and_paths_coarsen() {
        let k = LambdaMeasure::kingman(0.2).unwrap();
        let b = LambdaMeasure::beta(1.3, 2.0).unwrap();
        for r in 0..200 {
            let mut rng = replicate_rng(8, r);
            let p = simulate_coalescent(&k, Partition::singletons(6), 100.0, &mut rng);
            assert!(p.transitions().iter().all(|t| t.merged.len() == 2));
            let q = simulate_coalescent(&b, Partition::singletons(6), 100.0, &mut rng);
            for path in [p, q] {
                let states = path.states();
                for w in states.windows(2) {
                    assert!(w[1].0 > w[0].0);
                    assert!(w[1].1.num_blocks() < w[0].1.num_blocks());
                    assert!(w[1].1.is_coarsening_of(&w[0].1));
                }
                assert_eq!(states.last().unwrap().1.num_blocks(), 1);
            }
        }
    }

    #[test]
    fn subset_sampler_uniform() {
        let mut rng = replicate_rng(10, 0);
        let mut counts = std::collections::HashMap::new();
        let draws = 150_000;
        for _ in 0..draws {
            *counts.entry(sample_subset(6, 2, &mut rng)).or_insert(0u64) += 1;
        }
        assert_eq!(counts.len(), 15);
        let e = draws as f64 / 15.0;
        let chi: f64 = counts.values().map(|&o| (o as f64 - e).powi(2) / e).sum();
        // chi-square(14) at 1e-3: 36.12
        assert!(chi < 36.12, "{chi}");
    }
}
