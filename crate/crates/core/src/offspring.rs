//! Offspring laws and their descending binomial moments `b_k = E[C(xi, k)]`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::numeric::{KahanSum, LogFactorials};

/// Orders above this make `k!`-sized intermediate quantities overflow.
pub const MAX_MOMENT_ORDER: usize = 170;
const TRUNCATION_MASS: f64 = 1e-14;
const MOMENT_TAIL: f64 = 1e-13;

/// How an offspring law is described in configuration files.
///
/// ```toml
/// [offspring]
/// family = "explicit"
/// pmf = [0.25, 0.5, 0.25]   # mu(0), mu(1), mu(2)
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum OffspringSpec {
    /// `mu(0) = mu(2) = 1/2`.
    Binary,
    /// `mu(n) = 2^{-(n+1)}`.
    Geometric,
    /// Poisson with mean one.
    Poisson,
    /// Finite support, `pmf[n] = mu(n)`.
    Explicit { pmf: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Binary,
    Geometric,
    Poisson,
    Explicit,
}

/// An exponential envelope `mu(n) <= c * lambda^n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEnvelope {
    pub c: f64,
    pub lambda: f64,
}

impl TailEnvelope {
    /// `b_k <= C/(1-lambda) * (lambda/(1-lambda))^k`, from summing the envelope.
    pub fn moment_bound(&self, k: usize) -> f64 {
        let l = self.lambda;
        self.c / (1.0 - l) * (l / (1.0 - l)).powi(k as i32)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OffspringDistribution {
    spec: OffspringSpec,
    family: Family,
    /// `mu(0..table.len())`; for the infinite families this is truncated where
    /// the remaining mass drops below `1e-14`.
    table: Vec<f64>,
    truncated_mass: f64,
    mean: f64,
    variance: f64,
    critical: bool,
    subexponential: bool,
    justification: String,
    tail: TailEnvelope,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinomialMoments {
    pub b: Vec<f64>,
    /// Certified bound on the absolute summation error of each entry.
    pub error_bound: f64,
}

impl BinomialMoments {
    pub fn max_order(&self) -> usize {
        self.b.len() - 1
    }

    pub fn get(&self, k: usize) -> Result<f64> {
        self.b.get(k).copied().ok_or_else(|| {
            LabError::Domain(format!(
                "binomial moment b_{k} requested but only orders up to {} were computed",
                self.max_order()
            ))
        })
    }
}

fn poisson_table() -> (Vec<f64>, f64) {
    let mut table = Vec::new();
    let mut p = (-1.0f64).exp();
    let mut n = 0usize;
    table.push(p);
    // consecutive ratios are at most 1/2, so the rest is at most twice the next term
    loop {
        n += 1;
        p /= n as f64;
        table.push(p);
        let tail_bound = p / (n as f64 + 1.0) * 2.0;
        if tail_bound < TRUNCATION_MASS {
            return (table, tail_bound);
        }
    }
}

fn geometric_table() -> (Vec<f64>, f64) {
    let mut table = Vec::new();
    let mut p = 0.5f64;
    loop {
        table.push(p);
        p *= 0.5;
        // mass beyond the table is 2^{-(len+1)} * 2 = the current p * 2
        if 2.0 * p < TRUNCATION_MASS {
            return (table, 2.0 * p);
        }
    }
}

pub fn make_distribution(spec: &OffspringSpec) -> Result<OffspringDistribution> {
    let (family, table, truncated_mass, tail, justification) = match spec {
        OffspringSpec::Binary => (
            Family::Binary,
            vec![0.5, 0.0, 0.5],
            0.0,
            TailEnvelope { c: 2.0, lambda: 0.5 },
            "finite support {0, 2}".to_string(),
        ),
        OffspringSpec::Geometric => {
            let (table, mass) = geometric_table();
            (
                Family::Geometric,
                table,
                mass,
                TailEnvelope { c: 0.5, lambda: 0.5 },
                "mu(n) = (1/2) 2^{-n}".to_string(),
            )
        }
        OffspringSpec::Poisson => {
            let (table, mass) = poisson_table();
            (
                Family::Poisson,
                table,
                mass,
                TailEnvelope { c: 2.0 / std::f64::consts::E, lambda: 0.5 },
                "e^{-1}/n! <= (2/e) 2^{-n}".to_string(),
            )
        }
        OffspringSpec::Explicit { pmf } => {
            if pmf.is_empty() {
                return Err(LabError::Validation("offspring pmf has empty support".into()));
            }
            if let Some((n, p)) = pmf.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
                return Err(LabError::Validation(format!("offspring pmf has invalid mass {p} at {n}")));
            }
            let total = pmf.iter().copied().collect::<KahanSum>().value();
            if (total - 1.0).abs() > 1e-12 {
                return Err(LabError::Validation(format!("offspring pmf sums to {total}, not 1")));
            }
            let mut table = pmf.clone();
            while table.len() > 1 && *table.last().unwrap() == 0.0 {
                table.pop();
            }
            let c = table
                .iter()
                .enumerate()
                .map(|(n, p)| p * 2f64.powi(n as i32))
                .fold(0.0, f64::max);
            (
                Family::Explicit,
                table,
                0.0,
                TailEnvelope { c, lambda: 0.5 },
                "finite support".to_string(),
            )
        }
    };
    if table.get(1).copied().unwrap_or(0.0) >= 1.0 {
        return Err(LabError::Validation("offspring law is trivial: mu(1) = 1".into()));
    }
    let (mean, variance) = match family {
        Family::Binary | Family::Poisson => (1.0, 1.0),
        Family::Geometric => (1.0, 2.0),
        Family::Explicit => {
            let mean = table.iter().enumerate().map(|(n, p)| n as f64 * p).collect::<KahanSum>().value();
            let second = table
                .iter()
                .enumerate()
                .map(|(n, p)| (n as f64) * (n as f64) * p)
                .collect::<KahanSum>()
                .value();
            (mean, second - mean * mean)
        }
    };
    Ok(OffspringDistribution {
        spec: spec.clone(),
        family,
        table,
        truncated_mass,
        mean,
        variance,
        critical: (mean - 1.0).abs() <= 1e-9,
        subexponential: true,
        justification,
        tail,
    })
}

impl OffspringDistribution {
    pub fn binary() -> Self {
        make_distribution(&OffspringSpec::Binary).expect("binary law is valid")
    }

    pub fn geometric() -> Self {
        make_distribution(&OffspringSpec::Geometric).expect("geometric law is valid")
    }

    pub fn poisson() -> Self {
        make_distribution(&OffspringSpec::Poisson).expect("Poisson law is valid")
    }

    pub fn spec(&self) -> &OffspringSpec {
        &self.spec
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn name(&self) -> String {
        match self.family {
            Family::Binary => "binary".into(),
            Family::Geometric => "geometric(1/2)".into(),
            Family::Poisson => "poisson(1)".into(),
            Family::Explicit => format!("explicit{:?}", self.table),
        }
    }

    /// `mu(n)`, exact for every `n` (not only inside the stored table).
    pub fn pmf(&self, n: usize) -> f64 {
        match self.family {
            Family::Geometric => 0.5f64.powi(n as i32 + 1),
            Family::Poisson => {
                if n < self.table.len() {
                    self.table[n]
                } else {
                    (-1.0 - LogFactorials::new(n).ln_factorial(n)).exp()
                }
            }
            _ => self.table.get(n).copied().unwrap_or(0.0),
        }
    }

    /// The stored table `mu(0), mu(1), ...` (truncated for infinite families).
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn is_critical(&self) -> bool {
        self.critical
    }

    pub fn is_subexponential(&self) -> bool {
        self.subexponential
    }

    pub fn justification(&self) -> &str {
        &self.justification
    }

    pub fn tail_envelope(&self) -> TailEnvelope {
        self.tail
    }

    pub fn has_finite_support(&self) -> bool {
        matches!(self.family, Family::Binary | Family::Explicit)
    }

    /// Smallest `n` with `P(xi <= n) >= u`, by walking the cumulative sum.
    pub fn quantile(&self, u: f64) -> usize {
        let mut cumulative = 0.0;
        let mut n = 0usize;
        loop {
            cumulative += self.pmf(n);
            if cumulative >= u || (self.has_finite_support() && n + 1 >= self.table.len()) {
                return n;
            }
            n += 1;
            if n > 10_000 {
                return n;
            }
        }
    }

    /// Probability generating function `E[s^xi]`.
    pub fn pgf(&self, s: f64) -> f64 {
        match self.family {
            Family::Geometric => 1.0 / (2.0 - s),
            Family::Poisson => (s - 1.0).exp(),
            _ => self.table.iter().rev().fold(0.0, |acc, p| acc * s + p),
        }
    }

    /// `P(the tree reaches generation r)`, exactly, as `1 - f^{(r)}(0)`.
    pub fn survival_probability(&self, r: usize) -> f64 {
        let mut s = 0.0;
        for _ in 0..r {
            s = self.pgf(s);
        }
        1.0 - s
    }

    pub fn write_pmf_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "n,probability")?;
        for (n, p) in self.table.iter().enumerate() {
            writeln!(out, "{n},{p:e}")?;
        }
        Ok(())
    }
}

/// `b_0..=b_K` by direct summation of `C(n, k) mu(n)`.
///
/// For the infinite families the sum runs until the ratio of consecutive
/// terms is below one and the geometric bound on the rest is below `1e-13`.
pub fn descending_binomial_moments(mu: &OffspringDistribution, max_order: usize) -> Result<BinomialMoments> {
    if max_order > MAX_MOMENT_ORDER {
        return Err(LabError::Precision(format!(
            "binomial moments beyond order {MAX_MOMENT_ORDER} overflow double precision (requested {max_order})"
        )));
    }
    let mut b = Vec::with_capacity(max_order + 1);
    let mut worst_tail = 0.0f64;
    if mu.has_finite_support() {
        let lf = LogFactorials::new(mu.table.len().max(max_order) + 1);
        for k in 0..=max_order {
            let mut acc = KahanSum::default();
            for (n, p) in mu.table.iter().enumerate().skip(k) {
                if *p > 0.0 {
                    acc.add(lf.ln_binomial(n, k).exp() * p);
                }
            }
            b.push(acc.value());
        }
        return Ok(BinomialMoments { b, error_bound: 1e-15 });
    }
    let horizon = 64 * (max_order + 8);
    let lf = LogFactorials::new(horizon + 2);
    let ln_mu = |n: usize| match mu.family {
        Family::Geometric => -((n + 1) as f64) * std::f64::consts::LN_2,
        _ => -1.0 - lf.ln_factorial(n),
    };
    for k in 0..=max_order {
        let mut acc = KahanSum::default();
        let mut n = k;
        loop {
            if n >= horizon {
                return Err(LabError::Precision(format!("b_{k} did not converge within {horizon} terms")));
            }
            let term = (lf.ln_binomial(n, k) + ln_mu(n)).exp();
            acc.add(term);
            let next = (lf.ln_binomial(n + 1, k) + ln_mu(n + 1)).exp();
            let ratio = if term > 0.0 { next / term } else { 0.0 };
            // consecutive-term ratios are nonincreasing for both families once n >= k
            if ratio < 1.0 {
                let tail = next / (1.0 - ratio);
                if tail < MOMENT_TAIL {
                    worst_tail = worst_tail.max(tail);
                    break;
                }
            }
            n += 1;
        }
        b.push(acc.value());
    }
    Ok(BinomialMoments { b, error_bound: worst_tail + 1e-15 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn built_in_laws_have_declared_moments() {
        let bin = OffspringDistribution::binary();
        assert_eq!((bin.mean(), bin.variance()), (1.0, 1.0));
        let geo = OffspringDistribution::geometric();
        assert_eq!((geo.mean(), geo.variance()), (1.0, 2.0));
        let poi = OffspringDistribution::poisson();
        assert!(poi.is_critical());
        assert!(geo.truncated_mass() < 1e-14 && poi.truncated_mass() < 1e-14);
    }

    #[test]
    fn invalid_pmfs_are_rejected() {
        for pmf in [vec![], vec![0.5, -0.1, 0.6], vec![0.5, 0.4], vec![0.0, 1.0]] {
            assert!(matches!(
                make_distribution(&OffspringSpec::Explicit { pmf }),
                Err(LabError::Validation(_))
            ));
        }
    }

    #[test]
    fn degenerate_law_is_accepted_but_not_critical() {
        let dead = make_distribution(&OffspringSpec::Explicit { pmf: vec![1.0] }).unwrap();
        assert!(!dead.is_critical());
        assert_eq!(dead.survival_probability(1), 0.0);
    }

    #[test]
    fn binary_moments() {
        let b = descending_binomial_moments(&OffspringDistribution::binary(), 4).unwrap();
        assert_eq!(b.b, vec![1.0, 1.0, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn moment_order_guard() {
        assert!(matches!(
            descending_binomial_moments(&OffspringDistribution::binary(), 200),
            Err(LabError::Precision(_))
        ));
    }

    #[test]
    fn survival_by_generating_function() {
        let bin = OffspringDistribution::binary();
        assert_eq!(bin.survival_probability(1), 0.5);
        assert_eq!(bin.survival_probability(2), 0.375);
    }

    #[test]
    fn quantiles_invert_the_cdf() {
        let bin = OffspringDistribution::binary();
        assert_eq!(bin.quantile(0.3), 0);
        assert_eq!(bin.quantile(0.7), 2);
        let geo = OffspringDistribution::geometric();
        assert_eq!(geo.quantile(0.5), 0);
        assert_eq!(geo.quantile(0.74), 1);
    }
}
