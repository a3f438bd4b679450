//! Monte Carlo for the branching random walk: episodes, and the estimators
//! built on batches of them.
//!
//! Episode `i` of a run always draws from the stream keyed by `(seed, i)` and
//! every accumulator merges exactly (integer counts and sums), so results do
//! not depend on how rayon schedules the batches.

mod episode;
mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use episode::{run_episode, run_episode_at, EpisodeConfig, EpisodeResult, PreparedConfig, MAX_SIM_DIM, SITE_BOX};
pub use stats::{bootstrap_mean_interval, wilson, IntMoments, Proportion, Z95};

use crate::error::{LabError, Result};

const CHUNK: u64 = 256;

/// Fold episodes `0..episodes` into per-chunk accumulators and merge them.
/// `merge` must be commutative and associative.
pub fn fold_episodes<A, I, F, M>(prepared: &PreparedConfig, episodes: u64, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, u64, &EpisodeResult) + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    let chunks = episodes.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for i in c * CHUNK..((c + 1) * CHUNK).min(episodes) {
                fold(&mut acc, i, &prepared.run(i));
            }
            acc
        })
        .reduce(&init, &merge)
}

/// One value per episode, in episode order.
pub fn map_episodes<T, F>(prepared: &PreparedConfig, episodes: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&EpisodeResult) -> T + Sync + Send,
{
    (0..episodes).into_par_iter().map(|i| f(&prepared.run(i))).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurvivalRow {
    pub r: u32,
    pub probability: Proportion,
    /// `r P(survive r) sigma^2 / 2`, which tends to one.
    pub scaled: f64,
    pub scaled_lower: f64,
    pub scaled_upper: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurvivalTable {
    pub variance: f64,
    pub episodes: u64,
    pub rows: Vec<SurvivalRow>,
}

/// `P(generation r is nonempty)` for each `r`, from one batch run to the
/// largest `r`.
pub fn estimate_survival(config: &EpisodeConfig, r_values: &[u32], episodes: u64) -> Result<SurvivalTable> {
    let r_max = *r_values.iter().max().ok_or_else(|| LabError::Config("no survival depths requested".into()))?;
    let mut cfg = config.clone();
    cfg.max_generation = r_max;
    cfg.stop_at_max_depth = true;
    cfg.tracked.clear();
    cfg.saturate_at = None;
    let prepared = PreparedConfig::new(&cfg)?;
    let mut sorted: Vec<u32> = r_values.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let counts = fold_episodes(
        &prepared,
        episodes,
        || vec![0u64; sorted.len()],
        |acc, _, res| {
            for (slot, &r) in acc.iter_mut().zip(&sorted) {
                if res.survival_depth >= r {
                    *slot += 1;
                }
            }
        },
        |a, b| a.into_iter().zip(b).map(|(x, y)| x + y).collect(),
    );
    let variance = config.offspring.variance();
    let rows = r_values
        .iter()
        .map(|r| {
            let idx = sorted.binary_search(r).unwrap();
            let probability = wilson(counts[idx], episodes, Z95);
            let scale = *r as f64 * variance / 2.0;
            SurvivalRow {
                r: *r,
                probability,
                scaled: scale * probability.estimate,
                scaled_lower: scale * probability.lower,
                scaled_upper: scale * probability.upper,
            }
        })
        .collect();
    Ok(SurvivalTable { variance, episodes, rows })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailEstimate {
    pub site: Vec<i64>,
    pub max_generation: u32,
    pub thresholds: Vec<u64>,
    /// `P(L(site) >= n_i)` with Wilson intervals.
    pub probabilities: Vec<Proportion>,
    pub episodes: u64,
    /// Fraction of episodes cut by a cap before their tail events settled.
    pub truncation_fraction: f64,
}

impl TailEstimate {
    pub fn estimates(&self) -> Vec<f64> {
        self.probabilities.iter().map(|p| p.estimate).collect()
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.probabilities.iter().map(|p| p.half_width()).collect()
    }
}

/// Empirical survival function of `L(x)` for the first tracked site `x`,
/// counted up to `config.max_generation`.
pub fn estimate_tail(config: &EpisodeConfig, thresholds: &[u64], episodes: u64) -> Result<TailEstimate> {
    if thresholds.is_empty() || thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::Config("tail thresholds must be nonempty and strictly ascending".into()));
    }
    let site = config.tracked.first().cloned().ok_or_else(|| LabError::Config("no tracked site".into()))?;
    let mut cfg = config.clone();
    cfg.tracked = vec![site.clone()];
    cfg.saturate_at = Some(*thresholds.last().unwrap().max(&1));
    let prepared = PreparedConfig::new(&cfg)?;
    let (counts, truncated) = fold_episodes(
        &prepared,
        episodes,
        || (vec![0u64; thresholds.len()], 0u64),
        |(acc, trunc), _, res| {
            let l = res.local_times[0];
            for (slot, &n) in acc.iter_mut().zip(thresholds) {
                if l >= n {
                    *slot += 1;
                }
            }
            if res.truncated && !res.stopped_early {
                *trunc += 1;
            }
        },
        |(a, ta), (b, tb)| (a.into_iter().zip(b).map(|(x, y)| x + y).collect(), ta + tb),
    );
    Ok(TailEstimate {
        site,
        max_generation: cfg.max_generation,
        thresholds: thresholds.to_vec(),
        probabilities: counts.iter().map(|&c| wilson(c, episodes, Z95)).collect(),
        episodes,
        truncation_fraction: truncated as f64 / episodes as f64,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlockMean {
    pub r: u32,
    pub site: Vec<i64>,
    pub episodes: u64,
    /// Episodes with a visit during generations `r..=2r`.
    pub positive: u64,
    /// `E[sum_{l=r}^{2r} B_l(x) | sum > 0]`, undefined without positive episodes.
    pub mean: Option<f64>,
    pub half_width: Option<f64>,
}

/// Conditional mean number of visits to the first tracked site during
/// generations `r..=2r`, given at least one.
pub fn estimate_block_mean(config: &EpisodeConfig, r: u32, episodes: u64) -> Result<BlockMean> {
    let site = config.tracked.first().cloned().ok_or_else(|| LabError::Config("no tracked site".into()))?;
    let mut cfg = config.clone();
    cfg.tracked = vec![site.clone()];
    cfg.max_generation = 2 * r;
    cfg.count_from_generation = r;
    cfg.saturate_at = None;
    cfg.stop_at_max_depth = false;
    let prepared = PreparedConfig::new(&cfg)?;
    let m = fold_episodes(
        &prepared,
        episodes,
        IntMoments::default,
        |acc, _, res| {
            if res.local_times[0] > 0 {
                acc.push(res.local_times[0]);
            }
        },
        IntMoments::merge,
    );
    let (mean, half_width) = if m.count == 0 {
        (None, None)
    } else {
        let se = if m.count > 1 { m.std_error()? } else { f64::INFINITY };
        (Some(m.mean()), Some(Z95 * se))
    };
    Ok(BlockMean { r, site, episodes, positive: m.count, mean, half_width })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub points: Vec<Vec<i64>>,
    pub max_generation: u32,
    pub episodes: u64,
    pub mean: f64,
    pub std_error: f64,
    /// Percentile bootstrap 95% interval.
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub truncation_fraction: f64,
    /// Heuristic allowance for the visits truncated episodes did not get to
    /// make: their share of the sum plus the truncation fraction times the
    /// mean.
    pub truncation_margin: f64,
}

pub const MAX_JOINT_ORDER: usize = 4;
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 200;

/// `E[prod_i L(x_i)]` over `points` (repeats allowed), with `L` counted up to
/// `config.max_generation`.
pub fn estimate_joint_moments(
    config: &EpisodeConfig,
    points: &[Vec<i64>],
    episodes: u64,
    resamples: usize,
) -> Result<MomentEstimate> {
    if points.is_empty() || points.len() > MAX_JOINT_ORDER {
        return Err(LabError::Config(format!("joint moments need 1..={MAX_JOINT_ORDER} points, got {}", points.len())));
    }
    let mut cfg = config.clone();
    cfg.tracked = Vec::new();
    for p in points {
        if !cfg.tracked.contains(p) {
            cfg.tracked.push(p.clone());
        }
    }
    let slots: Vec<usize> = points.iter().map(|p| cfg.tracked.iter().position(|t| t == p).unwrap()).collect();
    cfg.saturate_at = None;
    cfg.stop_at_max_depth = false;
    let prepared = PreparedConfig::new(&cfg)?;
    let per_episode: Vec<(u64, bool)> = map_episodes(&prepared, episodes, |res| {
        let product = slots.iter().fold(1u64, |acc, &s| acc.saturating_mul(res.local_times[s]));
        (product, res.truncated)
    });
    let mut moments = IntMoments::default();
    let mut truncated = 0u64;
    let mut truncated_sum = 0u128;
    for &(x, t) in &per_episode {
        if x == u64::MAX {
            return Err(LabError::Precision("a local-time product overflowed 64 bits".into()));
        }
        moments.push(x);
        if t {
            truncated += 1;
            truncated_sum += x as u128;
        }
    }
    let values: Vec<f64> = per_episode.iter().map(|&(x, _)| x as f64).collect();
    let (ci_lower, ci_upper) = bootstrap_mean_interval(&values, resamples, 0.95, config.seed ^ 0x5eed_b007);
    let n = episodes as f64;
    let mean = moments.mean();
    let truncation_fraction = truncated as f64 / n;
    Ok(MomentEstimate {
        points: points.to_vec(),
        max_generation: cfg.max_generation,
        episodes,
        mean,
        std_error: moments.std_error()?,
        ci_lower,
        ci_upper,
        truncation_fraction,
        truncation_margin: truncated_sum as f64 / n + truncation_fraction * mean,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenerationMeans {
    pub episodes: u64,
    /// Mean size of generation `r` for `r = 0..=max_generation`.
    pub means: Vec<f64>,
    pub std_errors: Vec<f64>,
}

/// Mean generation sizes, which equal one at criticality.
pub fn estimate_generation_means(config: &EpisodeConfig, episodes: u64) -> Result<GenerationMeans> {
    let mut cfg = config.clone();
    cfg.record_generation_sizes = true;
    cfg.saturate_at = None;
    cfg.stop_at_max_depth = false;
    cfg.max_particles = u64::MAX;
    let prepared = PreparedConfig::new(&cfg)?;
    let len = cfg.max_generation as usize + 1;
    let acc = fold_episodes(
        &prepared,
        episodes,
        || vec![IntMoments::default(); len],
        |acc, _, res| {
            for (m, &s) in acc.iter_mut().zip(&res.generation_sizes) {
                m.push(s);
            }
        },
        |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
    );
    Ok(GenerationMeans {
        episodes,
        means: acc.iter().map(IntMoments::mean).collect(),
        std_errors: acc.iter().map(|m| m.std_error()).collect::<Result<_>>()?,
    })
}
