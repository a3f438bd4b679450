//! Fits of tail laws, the Kolmogorov survival constant, and Paley–Zygmund
//! lower bounds.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::simulator::{SurvivalTable, TailEstimate};

pub const MIN_FIT_POINTS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `log P = a + slope * log n`.
    Power,
    /// `log P = a + slope * sqrt(n)`.
    StretchedExp,
    /// `log P = a + slope * n`.
    Exp,
}

impl FitModel {
    fn abscissa(self, n: f64) -> f64 {
        match self {
            FitModel::Power => n.ln(),
            FitModel::StretchedExp => n.sqrt(),
            FitModel::Exp => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    /// Weighted `R^2` on the transformed scale.
    pub r_squared: f64,
    pub n_min: f64,
    pub n_max: f64,
    pub points_used: usize,
    /// Points in range with zero empirical mass, which have no logarithm.
    pub dropped_zero: usize,
}

/// Weighted least squares `y = a + b x`; returns `(b, a, se(b), R^2)`.
pub fn weighted_line(xs: &[f64], ys: &[f64], ws: &[f64]) -> Result<(f64, f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() != ws.len() {
        return Err(LabError::Fit("fit inputs differ in length".into()));
    }
    if xs.len() < 2 {
        return Err(LabError::Fit("a line needs two points".into()));
    }
    let sw: f64 = ws.iter().sum();
    let mx = xs.iter().zip(ws).map(|(x, w)| w * x).sum::<f64>() / sw;
    let my = ys.iter().zip(ws).map(|(y, w)| w * y).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(ws).map(|(x, w)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).zip(ws).map(|((x, y), w)| w * (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().zip(ws).map(|(y, w)| w * (y - my).powi(2)).sum();
    if !(sxx > 0.0) || !sxx.is_finite() {
        return Err(LabError::Fit("abscissae are degenerate".into()));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = xs.iter().zip(ys).zip(ws).map(|((x, y), w)| w * (y - a - b * x).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    let dof = xs.len().saturating_sub(2).max(1) as f64;
    let se = (ss_res / dof / sxx).sqrt();
    Ok((b, a, se, r2))
}

/// Fit `model` to points `(n_i, p_i)` with half-widths `h_i` of their
/// confidence intervals (all zero means unweighted), restricted to
/// `range = [lo, hi]`.
pub fn fit_points(model: FitModel, ns: &[f64], ps: &[f64], half_widths: &[f64], range: (f64, f64)) -> Result<FitResult> {
    let unweighted = half_widths.iter().all(|&h| h == 0.0);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    let mut dropped_zero = 0;
    let mut n_min = f64::INFINITY;
    let mut n_max = f64::NEG_INFINITY;
    for ((&n, &p), &h) in ns.iter().zip(ps).zip(half_widths) {
        if n < range.0 || n > range.1 {
            continue;
        }
        if !(p > 0.0) {
            dropped_zero += 1;
            continue;
        }
        xs.push(model.abscissa(n));
        ys.push(p.ln());
        // delta method: var(log p) ~ (h / p)^2
        ws.push(if unweighted || h <= 0.0 { 1.0 } else { (p / h).powi(2) });
        n_min = n_min.min(n);
        n_max = n_max.max(n);
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(LabError::Fit(format!(
            "{} usable points in [{}, {}], need {MIN_FIT_POINTS}",
            xs.len(),
            range.0,
            range.1
        )));
    }
    let (slope, intercept, slope_std_error, r_squared) = weighted_line(&xs, &ys, &ws)?;
    Ok(FitResult {
        model,
        slope,
        intercept,
        slope_std_error,
        r_squared,
        n_min,
        n_max,
        points_used: xs.len(),
        dropped_zero,
    })
}

fn tail_points(tail: &TailEstimate) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let ns = tail.thresholds.iter().map(|&n| n as f64).collect();
    (ns, tail.estimates(), tail.half_widths())
}

/// Log-log fit of an estimated tail; the slope estimates `-2/(4-d)`.
pub fn fit_power(tail: &TailEstimate, range: (f64, f64)) -> Result<FitResult> {
    let (ns, ps, hs) = tail_points(tail);
    fit_points(FitModel::Power, &ns, &ps, &hs, range)
}

/// `log P` against `n`.
pub fn fit_exp(tail: &TailEstimate, range: (f64, f64)) -> Result<FitResult> {
    let (ns, ps, hs) = tail_points(tail);
    fit_points(FitModel::Exp, &ns, &ps, &hs, range)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub stretched: FitResult,
    pub exponential: FitResult,
    pub power: FitResult,
    /// Highest `R^2`; ties go to the simpler exponential, then the power law.
    pub preferred: FitModel,
}

impl ModelComparison {
    pub fn from_points(ns: &[f64], ps: &[f64], half_widths: &[f64], range: (f64, f64)) -> Result<Self> {
        let stretched = fit_points(FitModel::StretchedExp, ns, ps, half_widths, range)?;
        let exponential = fit_points(FitModel::Exp, ns, ps, half_widths, range)?;
        let power = fit_points(FitModel::Power, ns, ps, half_widths, range)?;
        let mut preferred = FitModel::Exp;
        let mut best = exponential.r_squared;
        if power.r_squared > best {
            preferred = FitModel::Power;
            best = power.r_squared;
        }
        if stretched.r_squared > best {
            preferred = FitModel::StretchedExp;
        }
        Ok(ModelComparison { stretched, exponential, power, preferred })
    }
}

/// Fits `log P = a - c sqrt(n)`, `log P = a' - c' n` and a power law, and
/// prefers the best `R^2`.
pub fn fit_stretched(tail: &TailEstimate, range: (f64, f64)) -> Result<ModelComparison> {
    let (ns, ps, hs) = tail_points(tail);
    ModelComparison::from_points(&ns, &ps, &hs, range)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PzBound {
    pub p: f64,
    pub epsilon: f64,
    pub m1: f64,
    pub mp: f64,
    pub value: f64,
}

/// `(1-eps)^{p/(p-1)} m1^{p/(p-1)} / mp^{1/(p-1)}`, a lower bound on both
/// `P(X >= eps E[X])` and `P(X >= eps E[X | X > 0])` when `m1 = E[X]` and
/// `mp = E[X^p]`.
pub fn pz_bound(p: f64, epsilon: f64, m1: f64, mp: f64) -> Result<PzBound> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(LabError::Domain(format!("the moment order must exceed 1, got {p}")));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(LabError::Domain(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    if !(m1 >= 0.0) || !(mp >= 0.0) || !m1.is_finite() || !mp.is_finite() {
        return Err(LabError::Domain("moments must be finite and nonnegative".into()));
    }
    // Jensen: mp >= m1^p, up to rounding in the inputs
    if mp < m1.powf(p) * (1.0 - 1e-12) {
        return Err(LabError::Domain(format!("E[X^p] = {mp} is below E[X]^p = {}", m1.powf(p))));
    }
    let q = p / (p - 1.0);
    let value = if m1 == 0.0 {
        0.0
    } else {
        ((1.0 - epsilon).powf(q) * m1.powf(q) / mp.powf(1.0 / (p - 1.0))).min(1.0)
    };
    Ok(PzBound { p, epsilon, m1, mp, value })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PzReport {
    pub bound: PzBound,
    /// `P(X >= eps E[X])`.
    pub truth: f64,
    /// `P(X >= eps E[X | X > 0])`.
    pub conditional_truth: f64,
    pub pass: bool,
}

/// Check the bound against exact probabilities for a finite distribution
/// given as `(value, probability)` atoms.
pub fn pz_verify(atoms: &[(f64, f64)], p: f64, epsilon: f64) -> Result<PzReport> {
    if atoms.is_empty() || atoms.iter().any(|&(x, w)| !(x >= 0.0) || !(w >= 0.0)) {
        return Err(LabError::Domain("atoms need nonnegative values and weights".into()));
    }
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(LabError::Domain(format!("atom weights sum to {total}")));
    }
    let m1: f64 = atoms.iter().map(|&(x, w)| w * x).sum();
    let mp: f64 = atoms.iter().map(|&(x, w)| w * x.powf(p)).sum();
    let positive: f64 = atoms.iter().filter(|a| a.0 > 0.0).map(|a| a.1).sum();
    let bound = pz_bound(p, epsilon, m1, mp.max(m1.powf(p)))?;
    // thresholds are compared with a relative slack so that rounding in
    // the mean cannot move an atom sitting exactly on one
    let mass_above = |threshold: f64| -> f64 {
        atoms
            .iter()
            .filter(|a| a.0 >= threshold * (1.0 - 1e-12))
            .map(|a| a.1)
            .sum()
    };
    let truth = mass_above(epsilon * m1);
    let conditional_truth = if positive > 0.0 { mass_above(epsilon * m1 / positive) } else { 1.0 };
    let slack = 1e-12;
    let pass = bound.value <= truth + slack && bound.value <= conditional_truth + slack;
    Ok(PzReport { bound, truth, conditional_truth, pass })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovRow {
    pub r: u32,
    pub scaled: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovReport {
    pub variance: f64,
    pub rows: Vec<KolmogorovRow>,
    pub tolerance: f64,
    /// `|r P sigma^2 / 2 - 1|` at the largest `r`.
    pub final_deviation: f64,
    pub pass: bool,
}

/// `r P(survive r) sigma^2 / 2` along the table; passes when the value at the
/// largest `r` is within `tolerance` of one.
pub fn kolmogorov_check(table: &SurvivalTable, variance: f64, tolerance: f64) -> Result<KolmogorovReport> {
    if !(variance > 0.0) {
        return Err(LabError::Domain("the offspring variance must be positive".into()));
    }
    let mut rows: Vec<KolmogorovRow> = table
        .rows
        .iter()
        .map(|row| {
            let s = row.r as f64 * variance / 2.0;
            KolmogorovRow {
                r: row.r,
                scaled: s * row.probability.estimate,
                lower: s * row.probability.lower,
                upper: s * row.probability.upper,
            }
        })
        .collect();
    rows.sort_by_key(|row| row.r);
    let last = rows.last().ok_or_else(|| LabError::Fit("empty survival table".into()))?;
    let final_deviation = (last.scaled - 1.0).abs();
    Ok(KolmogorovReport { variance, final_deviation, pass: final_deviation <= tolerance, rows, tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(ns: &[f64], f: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (ns.to_vec(), ns.iter().map(|&n| f(n)).collect(), vec![0.0; ns.len()])
    }

    #[test]
    fn power_law_is_recovered() {
        let ns: Vec<f64> = (0..8).map(|i| 8.0 * 2f64.powi(i)).collect();
        let (n, p, h) = exact(&ns, |n| n.powf(-2.0 / 3.0));
        let fit = fit_points(FitModel::Power, &n, &p, &h, (1.0, 1e9)).unwrap();
        assert!((fit.slope + 2.0 / 3.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn model_comparison_picks_the_true_shape() {
        let ns: Vec<f64> = (1..=10).map(|i| (i * i) as f64 + 8.0).collect();
        let (n, p, h) = exact(&ns, |n| (-n.sqrt()).exp());
        let cmp = ModelComparison::from_points(&n, &p, &h, (0.0, 1e9)).unwrap();
        assert_eq!(cmp.preferred, FitModel::StretchedExp);
        assert!((cmp.stretched.slope + 1.0).abs() < 1e-6);
        let (n, p, h) = exact(&ns, |n| (-n).exp());
        let cmp = ModelComparison::from_points(&n, &p, &h, (0.0, 1e9)).unwrap();
        assert_eq!(cmp.preferred, FitModel::Exp);
    }

    #[test]
    fn too_few_points_is_a_fit_error() {
        let (n, p, h) = exact(&[1.0, 2.0, 3.0], |n| 1.0 / n);
        assert!(matches!(fit_points(FitModel::Power, &n, &p, &h, (0.0, 9.0)), Err(LabError::Fit(_))));
    }

    #[test]
    fn zero_mass_points_are_dropped() {
        let ns = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0];
        let ps = [1.0, 0.5, 1.0 / 3.0, 0.25, 0.2, 1.0 / 6.0, 0.0];
        let fit = fit_points(FitModel::Power, &ns, &ps, &[0.0; 7], (0.0, 10.0)).unwrap();
        assert_eq!(fit.dropped_zero, 1);
        assert!((fit.slope + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pz_examples() {
        let r = pz_verify(&[(1.0, 1.0)], 2.0, 0.0).unwrap();
        assert_eq!(r.bound.value, 1.0);
        assert_eq!(r.truth, 1.0);
        let r = pz_verify(&[(0.0, 0.5), (2.0, 0.5)], 2.0, 0.5).unwrap();
        assert!((r.bound.value - 0.125).abs() < 1e-15);
        assert_eq!(r.conditional_truth, 0.5);
        assert!(r.pass);
        // classical form at p = 2
        let b = pz_bound(2.0, 0.3, 1.5, 4.0).unwrap();
        assert!((b.value - 0.49 * 2.25 / 4.0).abs() < 1e-15);
        assert!(pz_bound(1.0, 0.5, 1.0, 1.0).is_err());
        assert!(pz_bound(2.0, 1.5, 1.0, 1.0).is_err());
    }
}
