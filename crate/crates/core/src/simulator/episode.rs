//! One realisation of the branching random walk, explored depth first.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::offspring::{Family, OffspringDistribution};

/// Largest lattice dimension the simulator is compiled for.
pub const MAX_SIM_DIM: usize = 8;

/// Tracked sites must lie in the box `[-SITE_BOX, SITE_BOX]^d`.
pub const SITE_BOX: i64 = 1 << 24;

#[derive(Clone, Debug)]
pub struct EpisodeConfig {
    pub dim: usize,
    pub offspring: OffspringDistribution,
    pub start: Vec<i64>,
    pub tracked: Vec<Vec<i64>>,
    /// Generations `0..=max_generation` are simulated.
    pub max_generation: u32,
    pub max_particles: u64,
    pub seed: u64,
    /// Visits before this generation are not counted.
    pub count_from_generation: u32,
    /// Stop once every tracked site has this many visits.
    pub saturate_at: Option<u64>,
    /// Stop as soon as a particle reaches `max_generation`.
    pub stop_at_max_depth: bool,
    pub record_generation_sizes: bool,
}

impl EpisodeConfig {
    pub fn new(dim: usize, offspring: OffspringDistribution, max_generation: u32, seed: u64) -> Self {
        EpisodeConfig {
            dim,
            offspring,
            start: vec![0; dim],
            tracked: vec![vec![0; dim]],
            max_generation,
            max_particles: 1 << 32,
            seed,
            count_from_generation: 0,
            saturate_at: None,
            stop_at_max_depth: false,
            record_generation_sizes: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.dim > MAX_SIM_DIM {
            return Err(LabError::Config(format!("simulation dimension must be in 1..={MAX_SIM_DIM}, got {}", self.dim)));
        }
        if self.max_particles == 0 {
            return Err(LabError::Config("max_particles must be positive".into()));
        }
        if self.max_generation > 1 << 28 {
            return Err(LabError::Config("max_generation above 2^28".into()));
        }
        if self.start.len() != self.dim || self.tracked.iter().any(|t| t.len() != self.dim) {
            return Err(LabError::Config("start and tracked sites must have the configured dimension".into()));
        }
        let inside = |p: &Vec<i64>| p.iter().all(|c| c.abs() <= SITE_BOX);
        if !inside(&self.start) || !self.tracked.iter().all(inside) {
            return Err(LabError::Config(format!("sites must lie in [-{SITE_BOX}, {SITE_BOX}]^d")));
        }
        if self.saturate_at == Some(0) {
            return Err(LabError::Config("saturate_at must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeResult {
    /// `L(x)` for each tracked site, in configuration order.
    pub local_times: Vec<u64>,
    /// Last nonempty generation seen.
    pub survival_depth: u32,
    pub total_progeny: u64,
    /// A cap was hit: the tree outlives `max_generation`, or `max_particles`
    /// stopped the exploration.
    pub truncated: bool,
    /// Stopped by `saturate_at` or `stop_at_max_depth` once the recorded
    /// quantities were settled.
    pub stopped_early: bool,
    /// Particles per generation, when requested.
    pub generation_sizes: Vec<u64>,
}

impl EpisodeResult {
    pub fn local_time(&self, config: &EpisodeConfig, site: &[i64]) -> Option<u64> {
        config.tracked.iter().position(|t| t == site).map(|i| self.local_times[i])
    }
}

#[derive(Clone, Debug)]
enum Sampler {
    /// `mu(0) = mu(2) = 1/2`.
    Binary,
    /// `mu(n) = 2^{-(n+1)}`.
    Geometric,
    Table { cdf: Vec<f64> },
}

impl Sampler {
    fn new(mu: &OffspringDistribution) -> Self {
        match mu.family() {
            Family::Binary => Sampler::Binary,
            Family::Geometric => Sampler::Geometric,
            _ => {
                let mut acc = 0.0;
                let cdf = mu
                    .table()
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                Sampler::Table { cdf }
            }
        }
    }

    #[inline]
    fn draw(&self, rng: &mut ChaCha8Rng) -> u32 {
        let low = rng.next_u32();
        self.draw_with(low, rng)
    }

    /// An offspring count using the 32 random bits `low` first.
    #[inline]
    fn draw_with(&self, low: u32, rng: &mut ChaCha8Rng) -> u32 {
        match self {
            Sampler::Binary => (low & 1) << 1,
            Sampler::Geometric => {
                if low != 0 {
                    return low.trailing_zeros();
                }
                // 32 failures so far; the law is memoryless
                let mut count = 32;
                loop {
                    let u = rng.next_u64();
                    if u != 0 {
                        return count + u.trailing_zeros();
                    }
                    count += 64;
                }
            }
            Sampler::Table { cdf } => {
                let u: f64 = rng.gen();
                cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u32
            }
        }
    }
}

/// Per-episode state derived once from a configuration.
#[derive(Clone, Debug)]
pub struct PreparedConfig {
    config: EpisodeConfig,
    sampler: Sampler,
}

impl PreparedConfig {
    pub fn new(config: &EpisodeConfig) -> Result<Self> {
        config.validate()?;
        Ok(PreparedConfig { config: config.clone(), sampler: Sampler::new(&config.offspring) })
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    /// The stream for episode `index`: ChaCha keyed by the seed, with the
    /// episode index as stream id, so any episode can be replayed alone.
    fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(index);
        rng
    }

    pub fn run(&self, index: u64) -> EpisodeResult {
        match self.config.dim {
            1 => self.run_dim::<1>(index),
            2 => self.run_dim::<2>(index),
            3 => self.run_dim::<3>(index),
            4 => self.run_dim::<4>(index),
            5 => self.run_dim::<5>(index),
            6 => self.run_dim::<6>(index),
            7 => self.run_dim::<7>(index),
            8 => self.run_dim::<8>(index),
            _ => unreachable!("dimension checked by validate"),
        }
    }

    fn run_dim<const D: usize>(&self, index: u64) -> EpisodeResult {
        struct Frame<const D: usize> {
            pos: [i32; D],
            generation: u32,
            remaining: u32,
        }
        let cfg = &self.config;
        let to_array = |p: &[i64]| -> [i32; D] {
            let mut a = [0i32; D];
            for (slot, &c) in a.iter_mut().zip(p) {
                *slot = c as i32;
            }
            a
        };
        let tracked: Vec<[i32; D]> = cfg.tracked.iter().map(|t| to_array(t)).collect();
        let cap = cfg.max_generation;
        let two_d = 2 * D as u32;
        let reject_below = two_d.wrapping_neg() % two_d;
        let mut rng = self.rng(index);
        let mut result = EpisodeResult {
            local_times: vec![0; tracked.len()],
            survival_depth: 0,
            total_progeny: 1,
            truncated: false,
            stopped_early: false,
            generation_sizes: if cfg.record_generation_sizes { vec![0; cap as usize + 1] } else { Vec::new() },
        };

        // returns true once every tracked site is saturated
        let visit = |pos: &[i32; D], generation: u32, result: &mut EpisodeResult| -> bool {
            if let Some(sizes) = result.generation_sizes.get_mut(generation as usize) {
                *sizes += 1;
            }
            if generation < cfg.count_from_generation {
                return false;
            }
            let mut hit = false;
            for (count, t) in result.local_times.iter_mut().zip(&tracked) {
                if t == pos {
                    *count += 1;
                    hit = true;
                }
            }
            hit && cfg.saturate_at.is_some_and(|s| result.local_times.iter().all(|&c| c >= s))
        };

        let root = to_array(&cfg.start);
        if visit(&root, 0, &mut result) || (cfg.stop_at_max_depth && cap == 0) {
            result.stopped_early = true;
            return result;
        }
        let mut stack: Vec<Frame<D>> = Vec::with_capacity(64);
        let c = self.sampler.draw(&mut rng);
        if c > 0 {
            if cap == 0 {
                result.truncated = true;
            } else {
                stack.push(Frame { pos: root, generation: 0, remaining: c });
            }
        }
        while let Some(top) = stack.last_mut() {
            if top.remaining == 0 {
                stack.pop();
                continue;
            }
            top.remaining -= 1;
            let generation = top.generation + 1;
            let mut pos = top.pos;
            // one draw: the high half picks the step (Lemire's multiply,
            // redrawn on rejection), the low half seeds the offspring count
            let u = rng.next_u64();
            let m = (u >> 32) * two_d as u64;
            let dir = if (m as u32) < reject_below { rng.gen_range(0..two_d) } else { (m >> 32) as u32 } as usize;
            pos[dir >> 1] += 1 - 2 * (dir as i32 & 1);
            result.total_progeny += 1;
            result.survival_depth = result.survival_depth.max(generation);
            if visit(&pos, generation, &mut result) || (cfg.stop_at_max_depth && generation == cap) {
                result.stopped_early = true;
                break;
            }
            if result.total_progeny >= cfg.max_particles {
                result.truncated = true;
                break;
            }
            let c = self.sampler.draw_with(u as u32, &mut rng);
            if c > 0 {
                if generation == cap {
                    result.truncated = true;
                } else {
                    stack.push(Frame { pos, generation, remaining: c });
                }
            }
        }
        result
    }
}

pub fn run_episode(config: &EpisodeConfig) -> Result<EpisodeResult> {
    run_episode_at(config, 0)
}

/// Episode `index` of the stream that `config.seed` defines.
pub fn run_episode_at(config: &EpisodeConfig, index: u64) -> Result<EpisodeResult> {
    Ok(PreparedConfig::new(config)?.run(index))
}
