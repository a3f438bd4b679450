//! Local-time moments from the skeleton expansion
//! `E[prod L(x_i)] = sum_S D(x; S) prod_u b_{c(u)}`, and the scaling forms
//! the tail laws predict.

use serde::{Deserialize, Serialize};

use crate::diagrams::{extrapolate_limit, DenseKernel, LimitPolicy, SymEngine};
use crate::error::{LabError, Result};
use crate::lattice::bracket;
use crate::numeric::KahanSum;
use crate::offspring::{descending_binomial_moments, make_distribution, OffspringDistribution, OffspringSpec};
use crate::simulator::{estimate_joint_moments, EpisodeConfig, MomentEstimate, DEFAULT_BOOTSTRAP_RESAMPLES};
use crate::skeletons::{enumerate_skeletons, SkeletonSet};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Truncation {
    /// `L_n`: generations `0..=n`; gives an upper bound.
    Steps { n: usize },
    /// The full local time; gives an equality.
    Limit { policy: LimitPolicy },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMode {
    UpperBound,
    Equality,
}

#[derive(Clone, Debug)]
pub struct MomentRequest {
    pub start: Vec<i64>,
    /// `x_1..x_k`.
    pub points: Vec<Vec<i64>>,
    pub truncation: Truncation,
    pub offspring: OffspringDistribution,
    /// Permit equality mode for `k >= 2` in dimensions 3 and 4.
    pub assert_convergent: bool,
}

impl MomentRequest {
    /// `E[L(0)^k]` (or `E[L_n(0)^k]`) for a walk started at the origin.
    pub fn at_origin(dim: usize, k: usize, truncation: Truncation, offspring: OffspringDistribution) -> Self {
        MomentRequest {
            start: vec![0; dim],
            points: vec![vec![0; dim]; k],
            truncation,
            offspring,
            assert_convergent: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonTerm {
    pub skeleton: String,
    pub weight: f64,
    pub diagram: f64,
    pub error_bound: f64,
    pub contribution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentValue {
    pub k: usize,
    pub d: usize,
    pub n: Option<usize>,
    pub mode: MomentMode,
    pub value: f64,
    pub error_bound: f64,
    pub per_skeleton: Vec<SkeletonTerm>,
}

/// Pins `(x_0, x_1, .., x_k)` translated so that `x_0 = 0`, with a lone
/// nonzero target moved last so the origin engine applies.
fn normalised_pins(request: &MomentRequest) -> Vec<Vec<i64>> {
    let shift = |p: &Vec<i64>| -> Vec<i64> { p.iter().zip(&request.start).map(|(a, b)| a - b).collect() };
    let mut targets: Vec<Vec<i64>> = request.points.iter().map(shift).collect();
    // the moment is symmetric in its targets
    targets.sort_by_key(|p| p.iter().any(|&c| c != 0));
    let mut pins = vec![vec![0; request.dim()]];
    pins.extend(targets);
    pins
}

enum Evaluator {
    Origin { engine: SymEngine, free: bool },
    Dense,
}

fn evaluator(set: &SkeletonSet, pins: &[Vec<i64>], dim: usize, n: usize) -> Result<Evaluator> {
    let k = set.k();
    let zero = |p: &Vec<i64>| p.iter().all(|&c| c == 0);
    if pins[..k].iter().all(zero) {
        let free = !zero(&pins[k]);
        let norm = crate::lattice::graph_norm(&pins[k]) as usize;
        let radius = set
            .items()
            .iter()
            .map(|s| SymEngine::required_radius(s, n, free))
            .max()
            .unwrap_or(n)
            .max(norm);
        return Ok(Evaluator::Origin { engine: SymEngine::new(dim, n, radius)?, free });
    }
    Ok(Evaluator::Dense)
}

fn diagram_values(
    set: &SkeletonSet,
    weights: &[f64],
    pins: &[Vec<i64>],
    dim: usize,
    n: usize,
    shared: Option<&Evaluator>,
) -> Result<Vec<f64>> {
    let own;
    let eval = match shared {
        Some(e) => e,
        None => {
            own = evaluator(set, pins, dim, n)?;
            &own
        }
    };
    let k = set.k();
    let mut out = Vec::with_capacity(set.len());
    match eval {
        Evaluator::Origin { engine, free } => {
            let engine_n;
            let engine = if engine.n() == n {
                engine
            } else {
                engine_n = engine.with_truncation(n)?;
                &engine_n
            };
            for (s, &w) in set.items().iter().zip(weights) {
                if w == 0.0 {
                    out.push(0.0);
                    continue;
                }
                let reduced = s.reduce_labels();
                if !reduced.consistent(pins) {
                    out.push(0.0);
                } else if *free {
                    out.push(engine.origin_field(s)?.get(&pins[k]));
                } else {
                    out.push(engine.origin_value(s)?);
                }
            }
        }
        Evaluator::Dense => {
            let kernel = DenseKernel::new(dim, n)?;
            for (s, &w) in set.items().iter().zip(weights) {
                if w == 0.0 {
                    out.push(0.0);
                    continue;
                }
                out.push(kernel.evaluate(s, pins)?.unwrap_or(0.0));
            }
        }
    }
    Ok(out)
}

/// The skeleton expansion of `E[prod_i L(x_i)]` (or of `L_n`).
pub fn exact_moment(request: &MomentRequest) -> Result<MomentValue> {
    let dim = request.dim();
    let k = request.k();
    if dim == 0 {
        return Err(LabError::Domain("lattice dimension must be at least 1".into()));
    }
    if request.points.iter().any(|p| p.len() != dim) {
        return Err(LabError::Config("target points disagree with the start's dimension".into()));
    }
    let set = enumerate_skeletons(k)?;
    let b = descending_binomial_moments(&request.offspring, (2 * k).max(1))?;
    let weights = set.items().iter().map(|s| s.weight(&b)).collect::<Result<Vec<f64>>>()?;
    let pins = normalised_pins(request);

    let (mode, n_used, diagrams, errors) = match request.truncation {
        Truncation::Steps { n } => {
            if n < 2 {
                return Err(LabError::Domain("truncated moments need n >= 2".into()));
            }
            let values = if k == 0 { vec![1.0] } else { diagram_values(&set, &weights, &pins, dim, n, None)? };
            let errors = vec![0.0; values.len()];
            (MomentMode::UpperBound, Some(n), values, errors)
        }
        Truncation::Limit { policy } => {
            if k >= 1 && dim < 3 {
                return Err(LabError::Domain(format!("moments of L are infinite in dimension {dim}")));
            }
            if k >= 2 && dim < 5 && !request.assert_convergent {
                return Err(LabError::Domain(format!(
                    "equality mode for k = {k} needs dimension >= 5 (or an explicit convergence assertion)"
                )));
            }
            if k == 0 {
                (MomentMode::Equality, None, vec![1.0], vec![0.0])
            } else {
                let first = policy.first_n.max(1);
                let mut ns = vec![first];
                while ns.last().unwrap() * 2 <= policy.max_n.max(4 * first) {
                    let next = ns.last().unwrap() * 2;
                    ns.push(next);
                }
                let top = *ns.last().unwrap();
                let shared = evaluator(&set, &pins, dim, top)?;
                let table = ns
                    .iter()
                    .map(|&n| diagram_values(&set, &weights, &pins, dim, n, Some(&shared)))
                    .collect::<Result<Vec<_>>>()?;
                let mut values = Vec::with_capacity(set.len());
                let mut errors = Vec::with_capacity(set.len());
                let mut deepest = first;
                for (j, &w) in weights.iter().enumerate() {
                    if w == 0.0 {
                        values.push(0.0);
                        errors.push(0.0);
                        continue;
                    }
                    let lim = extrapolate_limit(&LimitPolicy { first_n: first, max_n: top, ..policy }, |n| {
                        let idx = ns.iter().position(|&m| m == n).expect("precomputed truncation");
                        Ok(table[idx][j])
                    })?;
                    if !lim.converged {
                        return Err(LabError::Precision(format!(
                            "skeleton {} did not reach tolerance {:e} by n = {top} (bound {:e})",
                            set.items()[j],
                            policy.tol,
                            lim.truncation_error_bound
                        )));
                    }
                    deepest = deepest.max(lim.n_used);
                    values.push(lim.value);
                    errors.push(lim.truncation_error_bound);
                }
                (MomentMode::Equality, Some(deepest), values, errors)
            }
        }
    };

    let mut total = KahanSum::default();
    let mut total_error = 0.0;
    let mut per_skeleton = Vec::with_capacity(set.len());
    for ((s, &w), (&dv, &err)) in set.items().iter().zip(&weights).zip(diagrams.iter().zip(&errors)) {
        let contribution = w * dv;
        total.add(contribution);
        total_error += w * err;
        per_skeleton.push(SkeletonTerm {
            skeleton: s.encoding(),
            weight: w,
            diagram: dv,
            error_bound: err,
            contribution,
        });
    }
    let value = total.value();
    Ok(MomentValue {
        k,
        d: dim,
        n: n_used,
        mode,
        value,
        error_bound: total_error + b.error_bound * value,
        per_skeleton,
    })
}

/// The truncated bound at the origin for several `n` from one pass over `G~`.
///
/// Only the second moment is supported this way: every 2-skeleton diagram
/// with all pins at the origin is a polynomial in `G~_n(0,0)`,
/// `sum_y G~_n(0,y)^2` and `sum_y G~_n(0,y)^3`, so one run of the Green
/// accumulation yields the bound at every requested `n`.
pub fn second_moment_bounds_at_origin(
    dim: usize,
    ns: &[usize],
    offspring: &OffspringDistribution,
) -> Result<Vec<(usize, f64)>> {
    let top = *ns.iter().max().ok_or_else(|| LabError::Domain("no truncations requested".into()))?;
    if ns.iter().any(|&n| n < 2) {
        return Err(LabError::Domain("truncated moments need n >= 2".into()));
    }
    let set = enumerate_skeletons(2)?;
    let b = descending_binomial_moments(offspring, 4)?;
    let domain = crate::lattice::SymDomain::new(dim, top)?;
    let mut wanted: Vec<usize> = ns.to_vec();
    wanted.sort_unstable();
    let mut out = Vec::new();
    let mut error = None;
    crate::lattice::SymField::delta_origin(&domain).green_convolve_with(top, |n, g| {
        if error.is_some() || wanted.binary_search(&n).is_err() {
            return;
        }
        match second_moment_from_green(&set, &b, g, n) {
            Ok(v) => out.push((n, v)),
            Err(e) => error = Some(e),
        }
    })?;
    if let Some(e) = error {
        return Err(e);
    }
    Ok(ns.iter().map(|n| *out.iter().find(|(m, _)| m == n).unwrap()).collect())
}

fn second_moment_from_green(
    set: &SkeletonSet,
    b: &crate::offspring::BinomialMoments,
    green: &crate::lattice::SymField,
    n: usize,
) -> Result<f64> {
    // a SymEngine on a field that is already G~_n; origin values only need
    // inner products, so no further convolution happens
    let engine = SymEngine::from_green(green.clone(), n);
    let mut total = KahanSum::default();
    for s in set.items() {
        let w = s.weight(b)?;
        if w != 0.0 {
            total.add(w * engine.origin_value(s)?);
        }
    }
    Ok(total.value())
}

/// Constants for a predicted tail form: `amplitude * shape(n, x)` with rate
/// `rate` inside the exponentials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeConstants {
    pub amplitude: f64,
    pub rate: f64,
}

/// The tail form `P(L(x) >= n)` takes in dimension `d`, with fitted constants.
pub fn predicted_tail(dim: usize, n: f64, x: &[i64], constants: RegimeConstants) -> Result<f64> {
    if dim < 1 {
        return Err(LabError::Domain("lattice dimension must be at least 1".into()));
    }
    if !x.is_empty() && x.len() != dim {
        return Err(LabError::Config("target point disagrees with the dimension".into()));
    }
    let b = bracket(x);
    let RegimeConstants { amplitude, rate } = constants;
    Ok(match dim {
        1..=3 => amplitude * n.powf(-2.0 / (4.0 - dim as f64)).min(b.powi(-2)),
        4 => {
            let x_is_origin = x.iter().all(|&c| c == 0);
            if x_is_origin {
                amplitude * (-rate * n.sqrt()).exp()
            } else {
                amplitude * (-rate * n.sqrt().min(n / b.ln())).exp() * b.powi(-2) / b.ln()
            }
        }
        _ => amplitude * (-rate * n).exp() * b.powi(-(dim as i32) + 2),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthProfile {
    pub n: usize,
    /// Truncated bounds on `E[L_n(0)^k]`, `k = 1..=K`.
    pub bounds: Vec<f64>,
    /// `a_k = (bound_k / (k! (k + log 2)^{k-1} / 4))^{1/k}`.
    pub a: Vec<f64>,
    /// `a_{k+1} / a_k`.
    pub ratios: Vec<f64>,
}

/// Normalised growth of the four-dimensional moments at the origin.
pub fn moment_growth_profile(max_k: usize, n: usize, offspring: &OffspringDistribution) -> Result<GrowthProfile> {
    if max_k > 4 {
        return Err(LabError::Resource(format!("moment growth profiles are capped at K = 4, got {max_k}")));
    }
    let mut bounds = Vec::new();
    let mut a = Vec::new();
    for k in 1..=max_k {
        let req = MomentRequest::at_origin(4, k, Truncation::Steps { n }, offspring.clone());
        let bound = exact_moment(&req)?.value;
        let kf = k as f64;
        let factorial: f64 = (1..=k).map(|i| i as f64).product();
        let norm = factorial * (kf + 2f64.ln()).powi(k as i32 - 1) / 4.0;
        bounds.push(bound);
        a.push((bound / norm).powf(1.0 / kf));
    }
    let ratios = a.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(GrowthProfile { n, bounds, a, ratios })
}

pub const MOMENT_SCHEMA_VERSION: u32 = 1;

/// A moment computation as read from a request file:
///
/// ```json
/// {"dim": 5, "k": 2, "offspring": {"family": "geometric"}, "tol": 1e-3,
///  "monte_carlo": {"episodes": 100000, "seed": 7, "max_generation": 4096}}
/// ```
///
/// `points` (default: `k` copies of the origin) are the targets, `n` selects
/// the truncated bound and its absence the full local time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentJob {
    pub dim: usize,
    pub offspring: OffspringSpec,
    #[serde(default)]
    pub start: Option<Vec<i64>>,
    #[serde(default)]
    pub points: Option<Vec<Vec<i64>>>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_n: Option<usize>,
    #[serde(default)]
    pub assert_convergent: bool,
    #[serde(default)]
    pub monte_carlo: Option<MonteCarloSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSpec {
    pub episodes: u64,
    pub seed: u64,
    /// Required for the full local time; defaults to `n` otherwise.
    #[serde(default)]
    pub max_generation: Option<u32>,
    #[serde(default)]
    pub resamples: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentJobResult {
    pub schema_version: u32,
    pub job: MomentJob,
    pub exact: MomentValue,
    pub monte_carlo: Option<MomentEstimate>,
}

impl MomentJob {
    pub fn request(&self) -> Result<MomentRequest> {
        let start = self.start.clone().unwrap_or_else(|| vec![0; self.dim]);
        let points = match (&self.points, self.k) {
            (Some(p), Some(k)) if p.len() != k => {
                return Err(LabError::Config(format!("k = {k} disagrees with {} points", p.len())))
            }
            (Some(p), _) => p.clone(),
            (None, Some(k)) => vec![vec![0; self.dim]; k],
            (None, None) => return Err(LabError::Config("a moment job needs `k` or `points`".into())),
        };
        let truncation = match self.n {
            Some(n) => Truncation::Steps { n },
            None => {
                let mut policy = LimitPolicy::new(self.tol.unwrap_or(1e-3));
                if let Some(m) = self.max_n {
                    policy.max_n = m;
                }
                Truncation::Limit { policy }
            }
        };
        Ok(MomentRequest {
            start,
            points,
            truncation,
            offspring: make_distribution(&self.offspring)?,
            assert_convergent: self.assert_convergent,
        })
    }
}

pub fn run_moment_job(job: &MomentJob) -> Result<MomentJobResult> {
    let request = job.request()?;
    let exact = exact_moment(&request)?;
    let monte_carlo = match &job.monte_carlo {
        None => None,
        Some(mc) => {
            let cap = match (job.n, mc.max_generation) {
                (_, Some(g)) => g,
                (Some(n), None) => n as u32,
                (None, None) => {
                    return Err(LabError::Config("Monte Carlo for the full local time needs max_generation".into()))
                }
            };
            let mut cfg = EpisodeConfig::new(job.dim, request.offspring.clone(), cap, mc.seed);
            cfg.start = request.start.clone();
            Some(estimate_joint_moments(
                &cfg,
                &request.points,
                mc.episodes,
                mc.resamples.unwrap_or(DEFAULT_BOOTSTRAP_RESAMPLES),
            )?)
        }
    };
    Ok(MomentJobResult { schema_version: MOMENT_SCHEMA_VERSION, job: job.clone(), exact, monte_carlo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::truncated_green;

    #[test]
    fn first_moment_is_one_plus_green() {
        for d in 1..=3 {
            let req = MomentRequest::at_origin(d, 1, Truncation::Steps { n: 6 }, OffspringDistribution::binary());
            let m = exact_moment(&req).unwrap();
            let g = truncated_green(d, 6).unwrap().get(&vec![0; d]);
            assert!((m.value - 1.0 - g).abs() < 1e-14);
            assert_eq!(m.mode, MomentMode::UpperBound);
        }
    }

    #[test]
    fn off_origin_first_moment() {
        let mut req = MomentRequest::at_origin(2, 1, Truncation::Steps { n: 5 }, OffspringDistribution::poisson());
        req.points = vec![vec![2, 1]];
        let g = truncated_green(2, 5).unwrap().get(&[2, 1]);
        let m = exact_moment(&req).unwrap();
        assert!((m.value - g).abs() < 1e-13, "{m:?} vs {g}");
        req.start = vec![1, 1];
        req.points = vec![vec![3, 2]];
        assert!((exact_moment(&req).unwrap().value - g).abs() < 1e-13);
    }

    #[test]
    fn binary_second_moment_closed_form() {
        // with b_3 = 0 the ten 2-skeletons collapse to 1 + 3G + 3G^2 + sum G^3
        let n = 6;
        let g = truncated_green(2, n).unwrap();
        let g0 = g.get(&[0, 0]);
        let cube: f64 = g.values().iter().map(|v| v.powi(3)).sum();
        let req = MomentRequest::at_origin(2, 2, Truncation::Steps { n }, OffspringDistribution::binary());
        let m = exact_moment(&req).unwrap();
        let closed = 1.0 + 3.0 * g0 + 3.0 * g0 * g0 + cube;
        assert!((m.value - closed).abs() < 1e-12, "{} vs {closed}", m.value);
        let swept = second_moment_bounds_at_origin(2, &[3, n], &OffspringDistribution::binary()).unwrap();
        assert!((swept[1].1 - m.value).abs() < 1e-12);
    }

    #[test]
    fn equality_mode_guards() {
        let req = MomentRequest::at_origin(
            3,
            2,
            Truncation::Limit { policy: LimitPolicy::new(1e-3) },
            OffspringDistribution::geometric(),
        );
        assert!(matches!(exact_moment(&req), Err(LabError::Domain(_))));
        let req = MomentRequest::at_origin(
            2,
            1,
            Truncation::Limit { policy: LimitPolicy::new(1e-3) },
            OffspringDistribution::geometric(),
        );
        assert!(matches!(exact_moment(&req), Err(LabError::Domain(_))));
    }

    #[test]
    fn jobs_parse_and_run() {
        let job: MomentJob = serde_json::from_str(
            r#"{"dim": 1, "k": 2, "n": 2, "offspring": {"family": "binary"},
                "monte_carlo": {"episodes": 2000, "seed": 3}}"#,
        )
        .unwrap();
        let out = run_moment_job(&job).unwrap();
        assert_eq!(out.exact.mode, MomentMode::UpperBound);
        let mc = out.monte_carlo.unwrap();
        assert!(mc.mean <= out.exact.value + 4.0 * mc.std_error);
    }

    #[test]
    fn predicted_forms() {
        let c = RegimeConstants { amplitude: 1.0, rate: 1.0 };
        assert!((predicted_tail(2, 10.0, &[0, 0], c).unwrap() - 0.1).abs() < 1e-15);
        assert!((predicted_tail(4, 16.0, &[0; 4], c).unwrap() - (-4.0f64).exp()).abs() < 1e-15);
        assert!((predicted_tail(5, 1.0, &[4, 0, 0, 0, 0], c).unwrap() - (-1.0f64).exp() / 64.0).abs() < 1e-15);
        assert!(predicted_tail(0, 1.0, &[], c).is_err());
    }
}
