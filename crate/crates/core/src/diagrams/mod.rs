//! Diagrams `D_n(x; S)`: sums over placements of a skeleton's unlabelled
//! vertices of products of `G~_n` over its edges.

mod checks;
mod dense;
mod request;
mod symmetric;
mod tree;

use serde::{Deserialize, Serialize};

pub use checks::{
    check_recursion, maximal_diagram_field, maximal_diagram_fields, noninjective_reduction_check,
    NoninjectiveReport, RecursionReport,
};
pub use dense::DenseKernel;
pub use request::{run_diagram_request, DiagramRequest, DiagramResponse};
pub use symmetric::SymEngine;

use crate::error::{LabError, Result};
use crate::skeletons::Skeleton;

/// A skeleton with one pin per label.
#[derive(Clone, Debug, PartialEq)]
pub struct PinnedDiagram {
    pub skeleton: Skeleton,
    pub pins: Vec<Vec<i64>>,
    pub dim: usize,
}

impl PinnedDiagram {
    pub fn new(skeleton: Skeleton, pins: Vec<Vec<i64>>) -> Result<Self> {
        let dim = pins.first().map(|p| p.len()).unwrap_or(0);
        if dim == 0 {
            return Err(LabError::Config("pins must be nonempty points".into()));
        }
        if pins.len() != skeleton.k() + 1 {
            return Err(LabError::Config(format!(
                "a {}-skeleton needs {} pins, got {}",
                skeleton.k(),
                skeleton.k() + 1,
                pins.len()
            )));
        }
        if pins.iter().any(|p| p.len() != dim) {
            return Err(LabError::Config("pins disagree on the dimension".into()));
        }
        Ok(PinnedDiagram { skeleton, pins, dim })
    }

    /// All pins at the origin except possibly the last one.
    fn origin_form(&self) -> Option<&[i64]> {
        let k = self.skeleton.k();
        self.pins[..k]
            .iter()
            .all(|p| p.iter().all(|&c| c == 0))
            .then(|| self.pins[k].as_slice())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramValue {
    pub value: f64,
    pub truncation_error_bound: f64,
    pub n_used: usize,
    /// False when merged labels carry different pins; the value is then 0.
    pub pins_consistent: bool,
    pub converged: bool,
}

impl DiagramValue {
    fn exact(value: f64, n: usize) -> Self {
        DiagramValue { value, truncation_error_bound: 0.0, n_used: n, pins_consistent: true, converged: true }
    }

    fn inconsistent(n: usize) -> Self {
        DiagramValue { value: 0.0, truncation_error_bound: 0.0, n_used: n, pins_consistent: false, converged: true }
    }
}

/// Exact `D_n(pins; S)` for `n >= 1`.
pub fn evaluate_truncated(diagram: &PinnedDiagram, n: usize) -> Result<DiagramValue> {
    if n == 0 {
        return Err(LabError::Domain("diagrams need n >= 1 (G~_0 vanishes)".into()));
    }
    if diagram.skeleton.k() == 0 {
        return Ok(DiagramValue::exact(1.0, n));
    }
    if let Some(free) = diagram.origin_form() {
        let reduced = diagram.skeleton.reduce_labels();
        if !reduced.consistent(&diagram.pins) {
            return Ok(DiagramValue::inconsistent(n));
        }
        let radius = SymEngine::required_radius(&diagram.skeleton, n, true);
        let norm = crate::lattice::graph_norm(free) as usize;
        if norm > radius {
            return Ok(DiagramValue::exact(0.0, n));
        }
        let engine = SymEngine::new(diagram.dim, n, radius)?;
        let value = if norm == 0 {
            engine.origin_value(&diagram.skeleton)?
        } else {
            engine.origin_field(&diagram.skeleton)?.get(free)
        };
        return Ok(DiagramValue::exact(value, n));
    }
    let kernel = DenseKernel::new(diagram.dim, n)?;
    Ok(match kernel.evaluate(&diagram.skeleton, &diagram.pins)? {
        Some(value) => DiagramValue::exact(value, n),
        None => DiagramValue::inconsistent(n),
    })
}

/// Settings for the limit `n -> infinity`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitPolicy {
    pub tol: f64,
    pub first_n: usize,
    /// Largest truncation tried.
    pub max_n: usize,
    /// Increments shrinking by less than this factor per doubling count as
    /// non-decaying.
    pub stall_ratio: f64,
    /// Consecutive non-decaying doublings that signal divergence.
    pub stall_count: usize,
}

impl LimitPolicy {
    pub fn new(tol: f64) -> Self {
        LimitPolicy { tol, first_n: 4, max_n: 256, stall_ratio: 0.8, stall_count: 4 }
    }
}

/// Outcome of running a monotone sequence `v(n)` along doublings of `n`.
pub fn extrapolate_limit(
    policy: &LimitPolicy,
    mut value_at: impl FnMut(usize) -> Result<f64>,
) -> Result<DiagramValue> {
    if !(policy.tol > 0.0) {
        return Err(LabError::Domain("limit tolerance must be positive".into()));
    }
    let mut ns = Vec::new();
    let mut values = Vec::new();
    let mut n = policy.first_n.max(1);
    let mut stalls = 0usize;
    loop {
        values.push(value_at(n)?);
        ns.push(n);
        let m = values.len();
        if m >= 3 {
            let last = values[m - 1] - values[m - 2];
            let prev = values[m - 2] - values[m - 3];
            let ratio = if prev > 0.0 { last / prev } else { 0.0 };
            if last > 0.0 && ratio >= policy.stall_ratio {
                stalls += 1;
            } else {
                stalls = 0;
            }
            if stalls >= policy.stall_count {
                return Err(LabError::Divergence(format!(
                    "increments stopped decaying: values {:?} at n = {:?}",
                    values, ns
                )));
            }
            let rho = ratio.clamp(0.0, 0.99);
            let tail = if last > 0.0 { last * rho / (1.0 - rho) } else { 0.0 };
            // the value carries the extrapolated tail, so only the tail's
            // own size is held against the tolerance
            if tail < policy.tol && (last > 0.0 || last == 0.0 && prev == 0.0) {
                return Ok(DiagramValue {
                    value: values[m - 1] + tail,
                    truncation_error_bound: tail.max(f64::EPSILON * values[m - 1]),
                    n_used: n,
                    pins_consistent: true,
                    converged: true,
                });
            }
            if 2 * n > policy.max_n {
                return Ok(DiagramValue {
                    value: values[m - 1] + tail,
                    truncation_error_bound: tail,
                    n_used: n,
                    pins_consistent: true,
                    converged: false,
                });
            }
        }
        n *= 2;
    }
}

/// `D(pins; S)` with `G~` in place of `G~_n`, as the limit of truncated
/// values along `n = 4, 8, 16, ..`.
///
/// The reported bound is the geometric extrapolation of the last two
/// increments; the value includes that extrapolated tail.
pub fn evaluate_limit(diagram: &PinnedDiagram, policy: &LimitPolicy) -> Result<DiagramValue> {
    if diagram.dim < 3 {
        return Err(LabError::Domain(format!(
            "untruncated diagrams are infinite in the recurrent dimension {}",
            diagram.dim
        )));
    }
    if diagram.skeleton.k() == 0 {
        return Ok(DiagramValue::exact(1.0, 0));
    }
    let reduced = diagram.skeleton.reduce_labels();
    if !reduced.consistent(&diagram.pins) {
        return Ok(DiagramValue::inconsistent(0));
    }
    if let Some(free) = diagram.origin_form() {
        let norm = crate::lattice::graph_norm(free) as usize;
        // one domain large enough for the final truncation, shared by all
        let top = policy.max_n;
        let radius = SymEngine::required_radius(&diagram.skeleton, top, true).max(norm);
        let engine = SymEngine::new(diagram.dim, top, radius)?;
        return extrapolate_limit(policy, |n| {
            let e = engine.with_truncation(n)?;
            if norm == 0 {
                e.origin_value(&diagram.skeleton)
            } else {
                Ok(e.origin_field(&diagram.skeleton)?.get(free))
            }
        });
    }
    extrapolate_limit(policy, |n| {
        let kernel = DenseKernel::new(diagram.dim, n)?;
        Ok(kernel.evaluate(&diagram.skeleton, &diagram.pins)?.unwrap_or(0.0))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeletons::enumerate_skeletons;

    fn diagram(code: &str, pins: Vec<Vec<i64>>) -> PinnedDiagram {
        PinnedDiagram::new(Skeleton::parse(code).unwrap(), pins).unwrap()
    }

    #[test]
    fn trivial_skeleton_is_one() {
        let d = diagram("c=0;l=0", vec![vec![3, -1]]);
        assert_eq!(evaluate_truncated(&d, 4).unwrap().value, 1.0);
    }

    #[test]
    fn edge_gives_truncated_green() {
        let g = crate::lattice::truncated_green(2, 3).unwrap();
        for x in [[0i64, 0], [1, 0], [2, 1], [3, 1]] {
            let d = diagram("c=1.0;l=0.1", vec![vec![0, 0], x.to_vec()]);
            assert_eq!(evaluate_truncated(&d, 3).unwrap().value, g.get(&x));
            let shifted = diagram("c=1.0;l=0.1", vec![vec![1, 1], vec![x[0] + 1, x[1] + 1]]);
            assert!((evaluate_truncated(&shifted, 3).unwrap().value - g.get(&x)).abs() < 1e-15);
        }
    }

    #[test]
    fn cherry_in_one_dimension() {
        let d = diagram("c=1.2.0.0;l=0.2.3", vec![vec![0]; 3]);
        assert_eq!(evaluate_truncated(&d, 2).unwrap().value, 13.0 / 32.0);
        let moved = diagram("c=1.2.0.0;l=0.2.3", vec![vec![1], vec![1], vec![1]]);
        assert_eq!(evaluate_truncated(&moved, 2).unwrap().value, 13.0 / 32.0);
    }

    #[test]
    fn inconsistent_pins_give_flagged_zero() {
        let d = diagram("c=1.0;l=0.1.1", vec![vec![0], vec![1], vec![2]]);
        let v = evaluate_truncated(&d, 4).unwrap();
        assert_eq!(v.value, 0.0);
        assert!(!v.pins_consistent);
    }

    #[test]
    fn origin_engine_matches_dense_engine() {
        for k in 1..=3 {
            for s in enumerate_skeletons(k).unwrap().items() {
                for x in [[0i64, 0], [1, 0], [2, -1], [0, 3]] {
                    let mut pins = vec![vec![0i64, 0]; k];
                    pins.push(x.to_vec());
                    let n = 3;
                    let dense = DenseKernel::new(2, n).unwrap().evaluate(s, &pins).unwrap().unwrap_or(0.0);
                    let fast = evaluate_truncated(&PinnedDiagram::new(s.clone(), pins).unwrap(), n).unwrap();
                    assert!((dense - fast.value).abs() <= 1e-12 * dense.max(1e-300), "{s} {x:?}");
                }
            }
        }
    }

    #[test]
    fn limit_of_an_edge_is_the_green_function() {
        let d = diagram("c=1.0;l=0.1", vec![vec![0; 5], vec![2, 1, 0, 0, 0]]);
        let v = evaluate_limit(&d, &LimitPolicy { max_n: 64, ..LimitPolicy::new(1e-2) }).unwrap();
        let (g, _) = crate::lattice::green_value(&[2, 1, 0, 0, 0]).unwrap();
        assert!(v.converged);
        assert!((v.value - g).abs() < 2.0 * v.truncation_error_bound, "{} vs {g}", v.value);
    }

    #[test]
    fn recurrent_limits_are_rejected() {
        let d = diagram("c=1.0;l=0.1", vec![vec![0, 0], vec![0, 0]]);
        assert!(matches!(evaluate_limit(&d, &LimitPolicy::new(1e-3)), Err(LabError::Domain(_))));
    }

    #[test]
    fn divergent_sequences_are_detected() {
        let policy = LimitPolicy { max_n: 1 << 20, ..LimitPolicy::new(1e-6) };
        let log = extrapolate_limit(&policy, |n| Ok((n as f64).ln()));
        assert!(matches!(log, Err(LabError::Divergence(_))));
        let root = extrapolate_limit(&policy, |n| Ok(1.0 - (n as f64).powf(-0.5))).unwrap();
        assert!((root.value - 1.0).abs() < 1e-5);
    }
}
