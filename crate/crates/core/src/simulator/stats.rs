//! Exact integer accumulators and the intervals built from them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Normal quantile for two-sided 95% intervals.
pub const Z95: f64 = 1.959963984540054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Proportion {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

/// Wilson score interval at normal quantile `z`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> Proportion {
    if trials == 0 {
        return Proportion { successes, trials, estimate: f64::NAN, lower: 0.0, upper: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Proportion {
        successes,
        trials,
        estimate: p,
        lower: if successes == 0 { 0.0 } else { (centre - spread).max(0.0) },
        upper: if successes == trials { 1.0 } else { (centre + spread).min(1.0) },
    }
}

/// Count, sum and sum of squares of nonnegative integers, merged exactly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntMoments {
    pub count: u64,
    pub sum: u128,
    pub sum_sq: u128,
    pub overflowed: bool,
}

impl IntMoments {
    pub fn push(&mut self, x: u64) {
        let x = x as u128;
        self.count += 1;
        self.sum += x;
        match x.checked_mul(x).and_then(|sq| self.sum_sq.checked_add(sq)) {
            Some(s) => self.sum_sq = s,
            None => self.overflowed = true,
        }
    }

    pub fn merge(mut self, other: IntMoments) -> IntMoments {
        self.count += other.count;
        self.sum += other.sum;
        match self.sum_sq.checked_add(other.sum_sq) {
            Some(s) => self.sum_sq = s,
            None => self.overflowed = true,
        }
        self.overflowed |= other.overflowed;
        self
    }

    pub fn mean(&self) -> f64 {
        self.sum as f64 / self.count as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> Result<f64> {
        if self.overflowed {
            return Err(LabError::Precision("sum of squares overflowed 128 bits".into()));
        }
        if self.count < 2 {
            return Ok(f64::NAN);
        }
        let n = self.count as f64;
        // centre in exact arithmetic where it fits, then convert
        let n_int = self.count as u128;
        let centred = self
            .sum_sq
            .checked_mul(n_int)
            .map(|a| (a - self.sum * self.sum) as f64 / (n * (n - 1.0)));
        Ok(centred.unwrap_or_else(|| {
            let m = self.mean();
            (self.sum_sq as f64 - n * m * m) / (n - 1.0)
        }))
    }

    pub fn std_error(&self) -> Result<f64> {
        Ok((self.variance()? / self.count as f64).sqrt())
    }
}

/// Percentile bootstrap interval for the mean of `values`.
pub fn bootstrap_mean_interval(values: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    if values.is_empty() || resamples == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let mut s = 0.0;
            for _ in 0..n {
                s += values[rng.gen_range(0..n)];
            }
            s / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let pick = |q: f64| means[((q * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    (pick(tail), pick(1.0 - tail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_brackets_the_estimate() {
        let p = wilson(30, 100, Z95);
        assert!(p.lower < 0.3 && 0.3 < p.upper);
        assert!((p.estimate - 0.3).abs() < 1e-15);
        let all = wilson(10, 10, Z95);
        assert_eq!(all.upper, 1.0);
        assert!(all.lower > 0.6);
    }

    #[test]
    fn integer_moments_merge_exactly() {
        let mut a = IntMoments::default();
        let mut b = IntMoments::default();
        for x in [1u64, 2, 3] {
            a.push(x);
        }
        for x in [4u64, 5] {
            b.push(x);
        }
        let m = a.merge(b);
        assert_eq!(m.mean(), 3.0);
        assert!((m.variance().unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_interval_covers_the_mean() {
        let v: Vec<f64> = (0..1000).map(|i| (i % 7) as f64).collect();
        let mean = v.iter().sum::<f64>() / 1000.0;
        let (lo, hi) = bootstrap_mean_interval(&v, 200, 0.95, 1);
        assert!(lo < mean && mean < hi);
    }
}
