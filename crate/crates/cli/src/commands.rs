use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use coalhaus::coalescent::{merge_rate, simulate_coalescent, Partition, PartitionPath};
use coalhaus::genealogy::{psi, CountingPath};
use coalhaus::lambda::LambdaMeasure;
use coalhaus::limit_lookdown::{restricted_event_rates, simulate_with_rates};
use coalhaus::lookdown::{simulate_lookdown, LogEntry, LookdownMode, LookdownOptions};
use coalhaus::population::{simulate_population, PopulationState, SimOptions};
use coalhaus::rates::convergence_report;
use coalhaus::regime::RegimeConfig;
use coalhaus::seeding::run_replicates;
use coalhaus::stats::{
    chi_square_critical, chi_square_homogeneity, exponential_rate_censored, permutation_ks_threshold, two_sample_ks,
    TestReport,
};

use crate::config::{parse_grid, ExperimentConfig, ValidationError};
use crate::error::CliError;
use crate::output::{config_hash, ensure_writable, fmt_f64, parse_stamp, read_file, write_file, CsvTable, Stamp};
use crate::Scenario;

/// Resolved config plus the values every command needs.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub hash: String,
    pub seed: u64,
    pub reps: u64,
}

impl Context {
    pub fn new(cfg: ExperimentConfig) -> Result<Self, CliError> {
        let seed = cfg.parsed("experiment", "seed")?.unwrap_or(0);
        let reps = cfg.parsed("experiment", "reps")?.unwrap_or(1);
        if reps == 0 {
            return Err(CliError::invalid("reps must be positive"));
        }
        Ok(Self { hash: config_hash(&cfg), cfg, seed, reps })
    }

    fn stamp(&self) -> Stamp {
        Stamp::new(&self.hash, self.seed)
    }

    fn or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.cfg.parsed(section, key)?.unwrap_or(default))
    }

    fn required<T: FromStr>(&self, section: &str, key: &'static str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.cfg.parsed(section, key)?.ok_or(ValidationError::Missing(key))?)
    }

    fn sample_size(&self) -> Result<usize, CliError> {
        let k: usize = self.required("experiment", "k")?;
        if k == 0 {
            return Err(CliError::invalid("k must be positive"));
        }
        Ok(k)
    }

    fn lambda(&self) -> Result<LambdaMeasure, CliError> {
        let s = self.cfg.get("experiment", "lambda").ok_or(ValidationError::Missing("lambda"))?;
        s.parse().map_err(CliError::invalid)
    }

    fn horizon(&self, default: f64) -> Result<f64, CliError> {
        let h: f64 = self.or("experiment", "horizon", default)?;
        if !(h > 0.0) {
            return Err(CliError::invalid(format!("horizon = {h} must be positive")));
        }
        Ok(h)
    }

    /// `<out>_<suffix>.csv`, checked for writability.
    fn prefixed(&self, suffix: &str) -> Result<PathBuf, CliError> {
        let prefix = self.cfg.get("experiment", "out").ok_or(ValidationError::Missing("out"))?;
        let path = PathBuf::from(format!("{prefix}_{suffix}.csv"));
        ensure_writable(&path)?;
        Ok(path)
    }

    /// `--out` as a plain path; `None` means standard output.
    fn out_file(&self) -> Result<Option<PathBuf>, CliError> {
        match self.cfg.get("experiment", "out") {
            Some(p) => {
                let path = PathBuf::from(p);
                ensure_writable(&path)?;
                Ok(Some(path))
            }
            None => Ok(None),
        }
    }
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, bytes),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

fn collect<T, E: std::fmt::Display>(results: Vec<Result<T, E>>) -> Result<Vec<T>, CliError> {
    results.into_iter().map(|r| r.map_err(CliError::invalid)).collect()
}

fn join_levels(levels: &[u64]) -> String {
    levels.iter().map(u64::to_string).collect::<Vec<_>>().join("-")
}

fn alphabet(ctx: &Context) -> Result<u32, CliError> {
    let a: u32 = ctx.or("experiment", "alphabet", 2)?;
    if a == 0 {
        return Err(CliError::invalid("alphabet must be positive"));
    }
    Ok(a)
}

fn initial_size(ctx: &Context, rc: &RegimeConfig) -> Result<u64, CliError> {
    ctx.or("experiment", "initial_size", rc.default_initial_size())
}

pub fn run_population(ctx: &Context) -> Result<(), CliError> {
    let rc = ctx.cfg.regime_config()?;
    let horizon = ctx.horizon(1.0)?;
    let grid = match ctx.cfg.get("experiment", "grid") {
        Some(g) => parse_grid(g)?,
        None => (0..=10).map(|i| horizon * i as f64 / 10.0).collect(),
    };
    if grid.windows(2).any(|w| w[0] > w[1]) || grid[0] < 0.0 || *grid.last().unwrap() > horizon {
        return Err(CliError::invalid(format!("grid must be sorted within [0, {horizon}]")));
    }
    let alphabet = alphabet(ctx)?;
    let n0 = initial_size(ctx, &rc)?;
    let traj_path = ctx.prefixed("trajectory")?;
    let freq_path = ctx.prefixed("frequency")?;

    let opts = SimOptions { grid, record_frequencies: true, record_size_path: false };
    let runs = collect(run_replicates(ctx.seed, ctx.reps, |_, rng| {
        let init = PopulationState::iid_uniform(n0, alphabet, rng);
        simulate_population(&rc, init, horizon, &opts, rng)
    }))?;

    let mut traj = CsvTable::new(&ctx.stamp(), &["rep", "t_rescaled", "n", "extinct"]);
    let mut freq = CsvTable::new(&ctx.stamp(), &["rep", "t_rescaled", "type", "freq"]);
    for (rep, run) in runs.iter().enumerate() {
        let rep = rep.to_string();
        for (i, (&t, &n)) in run.grid.iter().zip(&run.sizes).enumerate() {
            let t = fmt_f64(t);
            traj.row([rep.as_str(), &t, &fmt_f64(n), if n == 0.0 { "1" } else { "0" }]);
            for &(ty, f) in &run.frequencies.as_ref().expect("frequencies were requested")[i] {
                freq.row([rep.as_str(), &t, &ty.to_string(), &fmt_f64(f)]);
            }
        }
    }
    write_file(&traj_path, &traj.into_bytes())?;
    write_file(&freq_path, &freq.into_bytes())
}

pub fn run_lookdown(ctx: &Context) -> Result<(), CliError> {
    let rc = ctx.cfg.regime_config()?;
    let k = ctx.sample_size()?;
    let mode = match ctx.cfg.get("experiment", "mode").unwrap_or("scalable") {
        "scalable" => LookdownMode::Scalable,
        "oracle" => LookdownMode::Oracle,
        other => return Err(CliError::invalid(format!("unknown mode `{other}`"))),
    };
    let horizon = ctx.horizon(1.0)?;
    let alphabet = alphabet(ctx)?;
    let n0 = initial_size(ctx, &rc)?;
    let path = ctx.prefixed("events")?;

    let opts = LookdownOptions { k, mode, grid: vec![] };
    let runs = collect(run_replicates(ctx.seed, ctx.reps, |_, rng| {
        let init = PopulationState::iid_uniform(n0, alphabet, rng).types().to_vec();
        simulate_lookdown(&rc, init, horizon, &opts, rng)
    }))?;

    let stamp = ctx
        .stamp()
        .with("horizon", fmt_f64(horizon))
        .with("time_scale", fmt_f64(rc.time_scale()))
        .with("k", k)
        .with("reps", ctx.reps);
    let mut table = CsvTable::new(&stamp, &["rep", "t_model", "kind", "levels"]);
    for (rep, run) in runs.iter().enumerate() {
        let rep = rep.to_string();
        for entry in run.log.entries() {
            match entry {
                LogEntry::Birth { time, levels, .. } => table.row([rep.as_str(), &fmt_f64(*time), "birth", &join_levels(levels)]),
                LogEntry::Death { time, level } => table.row([rep.as_str(), &fmt_f64(*time), "death", &level.to_string()]),
            }
        }
        // Closing row carrying the final population size.
        table.row([rep.as_str(), &fmt_f64(horizon * run.time_scale), "end", &run.final_size.to_string()]);
    }
    write_file(&path, &table.into_bytes())
}

pub fn run_limit(ctx: &Context) -> Result<(), CliError> {
    let lambda = ctx.lambda()?;
    let k = ctx.sample_size()?;
    let horizon = ctx.horizon(1.0)?;
    let path = ctx.prefixed("events")?;
    let rates = restricted_event_rates(&lambda, k).map_err(CliError::invalid)?;
    let runs = collect(run_replicates(ctx.seed, ctx.reps, |_, rng| {
        simulate_with_rates(&rates, (1..=k as u32).collect(), horizon, rng)
    }))?;

    let stamp = ctx
        .stamp()
        .with("horizon", fmt_f64(horizon))
        .with("time_scale", "1.0")
        .with("k", k)
        .with("reps", ctx.reps);
    let mut table = CsvTable::new(&stamp, &["rep", "t", "levels"]);
    for (rep, run) in runs.iter().enumerate() {
        let rep = rep.to_string();
        for e in &run.events {
            table.row([rep.as_str(), &fmt_f64(e.time), &join_levels(&e.levels)]);
        }
    }
    write_file(&path, &table.into_bytes())
}

fn partition_rows(table: &mut CsvTable, rep: usize, path: &PartitionPath) {
    let rep = rep.to_string();
    for (t, p) in path.states() {
        table.row([rep.as_str(), &fmt_f64(t), &p.to_string()]);
    }
}

pub fn run_coalescent(ctx: &Context) -> Result<(), CliError> {
    let lambda = ctx.lambda()?;
    let k = ctx.sample_size()?;
    let horizon = ctx.horizon(f64::INFINITY)?;
    let path = ctx.prefixed("partitions")?;
    let paths = run_replicates(ctx.seed, ctx.reps, |_, rng| {
        simulate_coalescent(&lambda, Partition::singletons(k), horizon, rng)
    });
    let mut table = CsvTable::new(&ctx.stamp().with("horizon", fmt_f64(horizon)), &["rep", "t", "partition"]);
    for (rep, p) in paths.iter().enumerate() {
        partition_rows(&mut table, rep, p);
    }
    write_file(&path, &table.into_bytes())
}

fn stamp_value<T: FromStr>(stamp: &BTreeMap<String, String>, key: &'static str) -> Result<T, CliError> {
    stamp
        .get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| CliError::invalid(format!("event file stamp lacks a valid `{key}`")))
}

/// Reads an event CSV written by `simulate-lookdown` or `simulate-limit`
/// and writes the partition path of the lowest `k` levels per replicate.
/// Lookdown replicates that end with fewer than `k` particles are skipped.
pub fn genealogy(ctx: &Context, events: &Path) -> Result<(), CliError> {
    let text = read_file(events)?;
    let stamp = text
        .lines()
        .next()
        .and_then(parse_stamp)
        .ok_or_else(|| CliError::invalid("event file has no stamp line"))?;
    let horizon: f64 = stamp_value(&stamp, "horizon")?;
    let time_scale: f64 = stamp_value(&stamp, "time_scale")?;
    let logged_k: usize = stamp_value(&stamp, "k")?;
    let reps: usize = stamp_value(&stamp, "reps")?;
    let seed: u64 = stamp_value(&stamp, "seed")?;
    let k: usize = ctx.or("experiment", "k", logged_k)?;
    if k == 0 || k > logged_k {
        return Err(CliError::invalid(format!("k must lie in 1..={logged_k}, the range recorded in the log")));
    }
    let out = ctx.out_file()?.ok_or(ValidationError::Missing("out"))?;

    let bad = |m: String| CliError::invalid(format!("{}: {m}", events.display()));
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(|e| bad(e.to_string()))?.iter().map(String::from).collect();
    let lookdown = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["rep", "t_model", "kind", "levels"] => true,
        ["rep", "t", "levels"] => false,
        _ => return Err(bad(format!("unrecognised header {header:?}"))),
    };

    let mut per_rep: Vec<Vec<(f64, Vec<u64>)>> = vec![Vec::new(); reps];
    let mut final_size: Vec<Option<u64>> = vec![None; reps];
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| record.get(i).ok_or_else(|| bad(format!("short row {record:?}")));
        let rep: usize = field(0)?.parse().map_err(|_| bad(format!("bad rep in {record:?}")))?;
        if rep >= reps {
            return Err(bad(format!("replicate {rep} outside 0..{reps}")));
        }
        let t: f64 = field(1)?.parse().map_err(|_| bad(format!("bad time in {record:?}")))?;
        let (kind, levels) = if lookdown { (field(2)?, field(3)?) } else { ("birth", field(2)?) };
        match kind {
            "birth" => {
                let levels: Vec<u64> = levels
                    .split('-')
                    .map(|l| l.parse().map_err(|_| bad(format!("bad levels in {record:?}"))))
                    .collect::<Result<_, _>>()?;
                let low: Vec<u64> = levels.into_iter().filter(|&l| l <= k as u64).collect();
                if low.len() >= 2 {
                    per_rep[rep].push((t / time_scale, low));
                }
            }
            "death" => {}
            "end" => final_size[rep] = Some(levels.parse().map_err(|_| bad(format!("bad size in {record:?}")))?),
            other => return Err(bad(format!("unknown event kind `{other}`"))),
        }
    }

    let out_stamp = Stamp::new(&ctx.hash, seed).with("source_hash", stamp.get("config_hash").cloned().unwrap_or_default());
    let mut table = CsvTable::new(&out_stamp, &["rep", "t", "partition"]);
    let mut skipped = 0;
    for (rep, events) in per_rep.into_iter().enumerate() {
        if lookdown && final_size[rep].is_none_or(|n| n < k as u64) {
            skipped += 1;
            continue;
        }
        let path = CountingPath::new(k, horizon, events).map_err(CliError::invalid)?;
        partition_rows(&mut table, rep, &psi(&path).map_err(CliError::invalid)?);
    }
    if skipped > 0 {
        eprintln!("skipped {skipped} replicates with fewer than {k} particles at the horizon");
    }
    write_file(&out, &table.into_bytes())
}

pub fn verify_rates_defaults() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    for (key, value) in [("b", "1"), ("d", "1"), ("c", "1"), ("K", "100")] {
        cfg.set("regime", key, value);
    }
    cfg.set("experiment", "K_list", "100,1000,10000,100000");
    cfg
}

pub fn verify_rates(ctx: &Context) -> Result<(), CliError> {
    let rc = ctx.cfg.regime_config()?;
    let k = ctx.sample_size()?;
    let ks: Vec<f64> = ctx.cfg.list("experiment", "K_list")?.ok_or(ValidationError::Missing("K_list"))?;
    let n_grid = match ctx.cfg.get("experiment", "n_grid") {
        Some(g) => parse_grid(g)?,
        None => parse_grid(&format!("{}:10:0.5", fmt_f64(rc.default_c0() / 2.0)))?,
    };
    let out = ctx.out_file()?;
    let report = convergence_report(&rc, k, &ks, &n_grid).map_err(CliError::invalid)?;

    let mut table = CsvTable::new(&ctx.stamp(), &["K", "j", "n", "prelimit", "limit", "gap"]);
    for r in &report.rows {
        table.row([fmt_f64(r.big_k), r.j.to_string(), fmt_f64(r.n), fmt_f64(r.prelimit), fmt_f64(r.limit), fmt_f64(r.gap())]);
    }
    for (big_k, gap) in report.sup_gaps() {
        eprintln!("K={big_k}: sup gap {gap:e}");
    }
    emit(out.as_deref(), &table.into_bytes())
}

pub fn rates(ctx: &Context, n: usize) -> Result<(), CliError> {
    let lambda = ctx.lambda()?;
    if n < 2 {
        return Err(CliError::invalid("n must be at least 2"));
    }
    let out = ctx.out_file()?;
    let mut table = CsvTable::new(&ctx.stamp(), &["n", "j", "rate"]);
    for j in 2..=n {
        let rate = merge_rate(&lambda, n, j).map_err(CliError::invalid)?;
        table.row([n.to_string(), j.to_string(), fmt_f64(rate)]);
    }
    emit(out.as_deref(), &table.into_bytes())
}

pub fn scenario_defaults(scenario: Scenario) -> ExperimentConfig {
    let regime: &[(&str, &str)] = match scenario {
        Scenario::KingmanDefault => &[
            ("regime", "finite-variance"),
            ("b", "2"),
            ("d", "1"),
            ("c", "1"),
            ("K", "100"),
            ("offspring", "geometric(q=0.5)"),
        ],
        Scenario::BetaDefault => &[("regime", "stable"), ("alpha", "1.5"), ("b", "1"), ("d", "1"), ("c", "1"), ("K", "200")],
        Scenario::BolthausenSznitmanDefault => &[("regime", "neveu"), ("b", "1"), ("d", "0"), ("c", "1"), ("K", "200")],
        Scenario::LimitLookdown => &[],
    };
    let experiment: &[(&str, &str)] = match scenario {
        Scenario::KingmanDefault => &[("k", "2"), ("horizon", "1"), ("reps", "500")],
        Scenario::BetaDefault => &[("k", "3"), ("horizon", "2"), ("reps", "1000"), ("lambda", "beta(alpha=1.5)")],
        Scenario::BolthausenSznitmanDefault => &[("k", "3"), ("horizon", "3"), ("reps", "1000"), ("lambda", "uniform(scale=1)")],
        Scenario::LimitLookdown => &[("k", "4"), ("horizon", "60"), ("reps", "2000"), ("lambda", "uniform(scale=1)")],
    };
    let mut cfg = ExperimentConfig::default();
    for (key, value) in regime {
        cfg.set("regime", key, *value);
    }
    for (key, value) in experiment {
        cfg.set("experiment", key, *value);
    }
    cfg.set("experiment", "seed", "1");
    cfg.set("thresholds", "significance", "0.001");
    cfg.set("thresholds", "permutations", "1000");
    cfg.set("thresholds", "mean_tolerance", "0.15");
    cfg
}

fn scenario_name(s: Scenario) -> &'static str {
    match s {
        Scenario::KingmanDefault => "kingman-default",
        Scenario::BetaDefault => "beta-default",
        Scenario::BolthausenSznitmanDefault => "bolthausen-sznitman-default",
        Scenario::LimitLookdown => "limit-lookdown",
    }
}

/// Partition paths of the lowest `k` levels of scalable lookdown runs,
/// dropping runs that end with fewer than `k` particles.
fn lookdown_genealogies(rc: &RegimeConfig, k: usize, horizon: f64, reps: u64, seed: u64) -> Result<(Vec<PartitionPath>, usize), CliError> {
    let opts = LookdownOptions { k, mode: LookdownMode::Scalable, grid: vec![] };
    let n0 = rc.default_initial_size() as usize;
    let out = collect(run_replicates(seed, reps, |_, rng| {
        let run = simulate_lookdown(rc, vec![0; n0], horizon, &opts, rng).map_err(|e| e.to_string())?;
        match CountingPath::from_lookdown_run(&run) {
            Ok(p) => psi(&p).map(Some).map_err(|e| e.to_string()),
            Err(_) => Ok(None),
        }
    }))?;
    let excluded = out.iter().filter(|p| p.is_none()).count();
    Ok((out.into_iter().flatten().collect(), excluded))
}

/// Counts per category for two samples; categories with fewer than
/// `min_total` observations overall are pooled into one cell.
fn pooled_counts<K: Ord>(a: impl IntoIterator<Item = K>, b: impl IntoIterator<Item = K>, min_total: u64) -> (Vec<u64>, Vec<u64>) {
    let mut table: BTreeMap<K, (u64, u64)> = BTreeMap::new();
    a.into_iter().for_each(|x| table.entry(x).or_default().0 += 1);
    b.into_iter().for_each(|x| table.entry(x).or_default().1 += 1);
    let (mut xs, mut ys, mut rest) = (Vec::new(), Vec::new(), (0, 0));
    for (x, y) in table.into_values() {
        if x + y >= min_total {
            xs.push(x);
            ys.push(y);
        } else {
            rest.0 += x;
            rest.1 += y;
        }
    }
    if rest.0 + rest.1 > 0 {
        xs.push(rest.0);
        ys.push(rest.1);
    }
    (xs, ys)
}

fn homogeneity_report(name: &str, a: Vec<u64>, b: Vec<u64>, significance: f64, seed: u64) -> Result<TestReport, CliError> {
    let n = a.iter().sum::<u64>() + b.iter().sum::<u64>();
    if a.len() < 2 {
        return Ok(TestReport::new(name, 0.0, 0.0, n, seed).with_meta("note", "single category"));
    }
    let (chi, df) = chi_square_homogeneity(&a, &b).map_err(CliError::invalid)?;
    let threshold = chi_square_critical(df, significance).map_err(CliError::invalid)?;
    Ok(TestReport::new(name, chi, threshold, n, seed).with_meta("df", df))
}

fn kingman_reports(ctx: &Context, significance: f64) -> Result<Vec<TestReport>, CliError> {
    let rc = ctx.cfg.regime_config()?;
    let ne = rc
        .effective_population_size()
        .ok_or_else(|| CliError::invalid("kingman comparison needs the finite-variance regime"))?;
    let k = ctx.sample_size()?;
    if k < 2 {
        return Err(CliError::invalid("k must be at least 2"));
    }
    let horizon = ctx.horizon(1.0)?;
    let permutations: usize = ctx.or("thresholds", "permutations", 1000)?;
    let tolerance: f64 = ctx.or("thresholds", "mean_tolerance", 0.15)?;

    let (paths, excluded) = lookdown_genealogies(&rc, k, horizon, ctx.reps, ctx.seed)?;
    if paths.is_empty() {
        return Err(CliError::invalid("every replicate went below k particles"));
    }
    let lambda = LambdaMeasure::kingman(ne).map_err(CliError::invalid)?;
    let direct = run_replicates(ctx.seed.wrapping_add(1), ctx.reps, |_, rng| {
        simulate_coalescent(&lambda, Partition::singletons(k), horizon, rng)
    });
    let first = |ps: &[PartitionPath]| -> Vec<(f64, bool)> {
        ps.iter().map(|p| p.first_merger().map_or((horizon, true), |t| (t, false))).collect()
    };
    let (a, b) = (first(&paths), first(&direct));
    let values = |xs: &[(f64, bool)]| xs.iter().map(|x| x.0).collect::<Vec<_>>();
    let d = two_sample_ks(&values(&a), &values(&b)).map_err(CliError::invalid)?;
    let threshold = permutation_ks_threshold(&values(&a), &values(&b), significance, permutations, ctx.seed.wrapping_add(2))
        .map_err(CliError::invalid)?;
    let ks = TestReport::new("first_merger_time_ks", d, threshold, (a.len() + b.len()) as u64, ctx.seed)
        .with_meta("excluded", excluded);

    let pairs = (k * (k - 1) / 2) as f64;
    let expected = ne / pairs;
    let mean = 1.0 / exponential_rate_censored(&a).map_err(CliError::invalid)?;
    let rel = (mean - expected).abs() / expected;
    let mean_report = TestReport::new("first_merger_mean_relative_error", rel, tolerance, a.len() as u64, ctx.seed)
        .with_meta("mean", fmt_f64(mean))
        .with_meta("expected", fmt_f64(expected));
    Ok(vec![ks, mean_report])
}

fn multiple_merger_reports(ctx: &Context, significance: f64) -> Result<Vec<TestReport>, CliError> {
    let rc = ctx.cfg.regime_config()?;
    let lambda = ctx.lambda()?;
    let k = ctx.sample_size()?;
    let horizon = ctx.horizon(1.0)?;
    let (paths, excluded) = lookdown_genealogies(&rc, k, horizon, ctx.reps, ctx.seed)?;
    let direct = run_replicates(ctx.seed.wrapping_add(1), ctx.reps, |_, rng| {
        simulate_coalescent(&lambda, Partition::singletons(k), f64::INFINITY, rng)
    });
    let sizes = |ps: &[PartitionPath]| -> Vec<usize> { ps.iter().filter_map(|p| p.transitions().first().map(|t| t.merged.len())).collect() };
    let (a, b) = pooled_counts(sizes(&paths), sizes(&direct), 10);
    Ok(vec![homogeneity_report("first_merger_size_chi_square", a, b, significance, ctx.seed)?
        .with_meta("excluded", excluded)
        .with_meta("lambda", lambda)])
}

fn limit_lookdown_reports(ctx: &Context, significance: f64) -> Result<Vec<TestReport>, CliError> {
    let lambda = ctx.lambda()?;
    let k = ctx.sample_size()?;
    let horizon = ctx.horizon(1.0)?;
    let rates = restricted_event_rates(&lambda, k).map_err(CliError::invalid)?;
    let via_lookdown = collect(run_replicates(ctx.seed, ctx.reps, |_, rng| -> Result<String, String> {
        let run = simulate_with_rates(&rates, (1..=k as u32).collect(), horizon, rng).map_err(|e| e.to_string())?;
        let path = CountingPath::from_limit_run(&run).map_err(|e| e.to_string())?;
        Ok(psi(&path).map_err(|e| e.to_string())?.jump_chain_key())
    }))?;
    let direct = run_replicates(ctx.seed.wrapping_add(1), ctx.reps, |_, rng| {
        simulate_coalescent(&lambda, Partition::singletons(k), horizon, rng).jump_chain_key()
    });
    let (a, b) = pooled_counts(via_lookdown, direct, 10);
    Ok(vec![homogeneity_report("jump_chain_chi_square", a, b, significance, ctx.seed)?.with_meta("lambda", lambda)])
}

pub fn compare(ctx: &Context, scenario: Scenario) -> Result<(), CliError> {
    let significance: f64 = ctx.or("thresholds", "significance", 1e-3)?;
    if !(significance > 0.0 && significance < 1.0) {
        return Err(CliError::invalid(format!("significance = {significance} must lie in (0, 1)")));
    }
    let out = ctx.out_file()?;
    let reports = match scenario {
        Scenario::KingmanDefault => kingman_reports(ctx, significance)?,
        Scenario::BetaDefault | Scenario::BolthausenSznitmanDefault => multiple_merger_reports(ctx, significance)?,
        Scenario::LimitLookdown => limit_lookdown_reports(ctx, significance)?,
    };
    let mut text = String::new();
    let mut failed = 0;
    for r in reports {
        let r = r.with_meta("config_hash", &ctx.hash).with_meta("scenario", scenario_name(scenario));
        eprintln!("{}", r.summary_line());
        failed += usize::from(!r.pass);
        text.push_str(&r.to_json());
        text.push('\n');
    }
    emit(out.as_deref(), text.as_bytes())?;
    match failed {
        0 => Ok(()),
        n => Err(CliError::ChecksFailed(n)),
    }
}

pub fn report(files: &[PathBuf]) -> Result<(), CliError> {
    if files.is_empty() {
        return Err(CliError::Usage("report needs at least one file".into()));
    }
    let (mut total, mut failed) = (0, 0);
    for file in files {
        for (i, line) in read_file(file)?.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let r: TestReport = serde_json::from_str(line)
                .map_err(|e| CliError::invalid(format!("{}:{}: {e}", file.display(), i + 1)))?;
            println!("{}", r.summary_line());
            total += 1;
            failed += usize::from(!r.pass);
        }
    }
    println!("{} of {total} checks passed", total - failed);
    match failed {
        0 => Ok(()),
        n => Err(CliError::ChecksFailed(n)),
    }
}
