use brwlab::offspring::OffspringDistribution;
use brwlab::simulator::{
    estimate_generation_means, estimate_survival, estimate_tail, run_episode_at, EpisodeConfig, PreparedConfig,
};
use proptest::prelude::*;

fn law(which: u8) -> OffspringDistribution {
    match which % 3 {
        0 => OffspringDistribution::binary(),
        1 => OffspringDistribution::geometric(),
        _ => OffspringDistribution::poisson(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn episodes_respect_their_invariants(dim in 1usize..=6, which in 0u8..3, cap in 0u32..64, seed in any::<u64>(), index in 0u64..1000) {
        let cfg = EpisodeConfig::new(dim, law(which), cap, seed);
        let r = run_episode_at(&cfg, index).unwrap();
        prop_assert!(r.local_times[0] >= 1);
        prop_assert!(r.survival_depth <= cap);
        prop_assert!(r.total_progeny >= r.local_times[0]);
        prop_assert_eq!(&r, &run_episode_at(&cfg, index).unwrap());
    }

    #[test]
    fn tail_estimates_are_nonincreasing(dim in 1usize..=3, seed in any::<u64>()) {
        let cfg = EpisodeConfig::new(dim, OffspringDistribution::binary(), 64, seed);
        let tail = estimate_tail(&cfg, &[1, 2, 3, 5, 8, 13], 2000).unwrap();
        let p = tail.estimates();
        prop_assert_eq!(p[0], 1.0);
        prop_assert!(p.windows(2).all(|w| w[0] >= w[1]));
        for q in &tail.probabilities {
            prop_assert!(q.lower <= q.estimate && q.estimate <= q.upper);
        }
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let cfg = EpisodeConfig::new(2, OffspringDistribution::geometric(), 256, 77);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| estimate_tail(&cfg, &[1, 4, 16, 64], 20_000).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.probabilities, b.probabilities);
    assert_eq!(a.truncation_fraction, b.truncation_fraction);
}

#[test]
fn generation_sizes_have_mean_one() {
    let mut cfg = EpisodeConfig::new(1, OffspringDistribution::binary(), 16, 3);
    cfg.tracked.clear();
    let means = estimate_generation_means(&cfg, 200_000).unwrap();
    for (r, (m, se)) in means.means.iter().zip(&means.std_errors).enumerate() {
        assert!((m - 1.0).abs() <= 4.0 * se.max(1e-12), "generation {r}: {m} +- {se}");
    }
}

/// Survival to the cap, which is the truncation fraction of an uncapped run
/// cut there, scales like `2 / (sigma^2 g)`.
#[test]
fn truncation_decays_like_one_over_cap() {
    for mu in [OffspringDistribution::binary(), OffspringDistribution::geometric()] {
        let variance = mu.variance();
        let cfg = EpisodeConfig::new(1, mu, 128, 9);
        let table = estimate_survival(&cfg, &[8, 32, 128], 100_000).unwrap();
        for row in &table.rows {
            let scaled = row.probability.estimate * row.r as f64 * variance / 2.0;
            assert!((1.0 / 3.0..=3.0).contains(&scaled), "r={}: {scaled}", row.r);
        }
        // and the simulator's own truncation flag agrees with survival
        let prepared = PreparedConfig::new(&EpisodeConfig { max_generation: 32, ..cfg.clone() }).unwrap();
        let truncated = (0..20_000).filter(|&i| prepared.run(i).truncated).count() as f64 / 20_000.0;
        let survive = table.rows[1].probability.estimate;
        assert!(truncated <= survive * 1.2 + 0.005, "{truncated} vs {survive}");
    }
}
