//! End-to-end checks across modules at small scale.

use coalhaus::coalescent::{simulate_coalescent, Partition};
use coalhaus::genealogy::{pair_coalescence_times, psi, CountingPath};
use coalhaus::lambda::LambdaMeasure;
use coalhaus::limit_lookdown::simulate_limit_lookdown;
use coalhaus::lookdown::{simulate_lookdown, LookdownMode, LookdownOptions};
use coalhaus::offspring::OffspringLaw;
use coalhaus::regime::{Regime, RegimeConfig};
use coalhaus::seeding::run_replicates;
use coalhaus::stats::ks_statistic;

// Asymptotic two-sided KS critical value at level 1e-3 is 1.95/sqrt(n).
fn ks_bound(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}

#[test]
fn kingman_first_merger_is_exponential() {
    let ne = 0.5;
    let k = 4;
    let lambda = LambdaMeasure::kingman(ne).unwrap();
    let times: Vec<f64> = run_replicates(11, 4000, |_, rng| {
        simulate_coalescent(&lambda, Partition::singletons(k), f64::INFINITY, rng).first_merger().unwrap()
    });
    let rate = 6.0 / ne;
    let d = ks_statistic(&times, |t| 1.0 - (-rate * t).exp()).unwrap();
    assert!(d < ks_bound(times.len()), "KS {d}");
}

#[test]
fn limit_lookdown_pair_times_match_total_mass() {
    // For a pair every event hitting both levels merges them; the rate is
    // the total mass of Λ.
    let lambda = LambdaMeasure::beta(1.5, 2.0).unwrap();
    let rate = lambda.total_mass();
    let paths: Vec<_> = run_replicates(12, 4000, |_, rng| {
        let run = simulate_limit_lookdown(&lambda, 2, vec![1, 2], 50.0, rng).unwrap();
        psi(&CountingPath::from_limit_run(&run).unwrap()).unwrap()
    });
    let times: Vec<f64> = pair_coalescence_times(&paths).unwrap().into_iter().map(|p| p.time).collect();
    let d = ks_statistic(&times, |t| 1.0 - (-rate * t).exp()).unwrap();
    assert!(d < ks_bound(times.len()), "KS {d}");
}

#[test]
fn lookdown_genealogies_only_coarsen() {
    let cfg = RegimeConfig::new(1.0, 1.0, 1.0, 30, Regime::Stable { alpha: 1.5 }, OffspringLaw::stable(1.5).unwrap()).unwrap();
    let opts = LookdownOptions { k: 5, mode: LookdownMode::Scalable, grid: vec![] };
    let n0 = cfg.default_initial_size() as usize;
    let paths = run_replicates(13, 50, |_, rng| {
        let run = simulate_lookdown(&cfg, vec![0; n0], 1.0, &opts, rng).unwrap();
        CountingPath::from_lookdown_run(&run).ok().map(|p| psi(&p).unwrap())
    });
    let mut seen = 0;
    for path in paths.into_iter().flatten() {
        seen += 1;
        let states = path.states();
        assert_eq!(states[0].1, Partition::singletons(5));
        for w in states.windows(2) {
            assert!(w[0].0 < w[1].0);
            assert!(w[1].1.is_coarsening_of(&w[0].1));
            assert!(w[1].1.num_blocks() < w[0].1.num_blocks());
        }
    }
    assert!(seen > 0);
}
