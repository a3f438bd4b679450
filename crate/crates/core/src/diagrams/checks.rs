//! Maximal diagrams `M_{k,n}` and the inequalities relating them.

use serde::Serialize;

use super::symmetric::SymEngine;
use crate::error::{LabError, Result};
use crate::lattice::{LatticeField, SymField, DEFAULT_MAX_FIELD_ENTRIES};
use crate::skeletons::{enumerate_skeletons, SkeletonSet, K_MAX};

const RELATIVE_SLACK: f64 = 1e-10;

fn pointwise_max(fields: impl IntoIterator<Item = Result<SymField>>) -> Result<Option<SymField>> {
    let mut best: Option<SymField> = None;
    for f in fields {
        let f = f?;
        best = Some(match best {
            None => f,
            Some(b) => b.maximum(&f)?,
        });
    }
    Ok(best)
}

fn check_k(k: usize) -> Result<()> {
    if k > K_MAX {
        return Err(LabError::Resource(format!("maximal diagrams are capped at k = {K_MAX}, got {k}")));
    }
    Ok(())
}

fn engine_for(sets: &[SkeletonSet], n: usize, dim: usize, extra: usize) -> Result<SymEngine> {
    let radius = sets
        .iter()
        .flat_map(|s| s.items().iter())
        .map(|s| SymEngine::required_radius(s, n, true))
        .max()
        .unwrap_or(n);
    SymEngine::new(dim, n, radius + extra)
}

fn fields_on(engine: &SymEngine, sets: &[SkeletonSet]) -> Result<Vec<SymField>> {
    sets.iter()
        .map(|set| {
            if set.k() == 0 {
                return Ok(SymField::delta_origin(engine.domain()));
            }
            let fields = set.injective().map(|s| engine.origin_field(s));
            Ok(pointwise_max(fields)?.expect("every k has an injective skeleton"))
        })
        .collect()
}

/// `M_{r,n}` for `r = 0..=k_max`, as orbit-reduced fields on one domain.
pub fn maximal_diagram_fields(k_max: usize, n: usize, dim: usize) -> Result<Vec<SymField>> {
    check_k(k_max)?;
    let sets = (0..=k_max).map(enumerate_skeletons).collect::<Result<Vec<_>>>()?;
    let engine = engine_for(&sets, n.max(1), dim, 0)?;
    fields_on(&engine, &sets)
}

/// `x -> M_{k,n}(x) = max over injective k-skeletons of D_n(0, .., 0, x; S)`
/// on the box that contains its support.
pub fn maximal_diagram_field(k: usize, n: usize, dim: usize) -> Result<LatticeField> {
    check_k(k)?;
    if n == 0 {
        return Err(LabError::Domain("maximal diagrams need n >= 1".into()));
    }
    let set = enumerate_skeletons(k)?;
    let engine = engine_for(std::slice::from_ref(&set), n, dim, 0)?;
    let field = fields_on(&engine, std::slice::from_ref(&set))?.pop().unwrap();
    let side = 2 * field.radius() as u128 + 1;
    if side.checked_pow(dim as u32).map_or(true, |e| e > DEFAULT_MAX_FIELD_ENTRIES as u128) {
        return Err(LabError::Resource(format!(
            "the radius-{} box of M_{k},{n} does not fit in a dense field",
            field.radius()
        )));
    }
    Ok(field.to_lattice())
}

#[derive(Clone, Debug, Serialize)]
pub struct RecursionReport {
    pub k: usize,
    pub n: usize,
    pub dim: usize,
    /// `1 v G~_n(0,0)^{-1}`.
    pub prefactor: f64,
    /// Lattice points compared (orbits weighted by size).
    pub points_checked: f64,
    pub radius: usize,
    /// `min over x of rhs(x) - lhs(x)`.
    pub min_slack: f64,
    /// `max over x of lhs(x) / rhs(x)` where `rhs > 0`.
    pub worst_ratio: f64,
    pub worst_point: Vec<u16>,
    pub pass: bool,
}

/// Compare `M_{k,n}(x)` with
/// `[1 v G~_n(0,0)^{-1}] max_{0<r<k} sum_y M_{r,n}(y) M_{k-r,n}(y) G~_n(y, x)`
/// at every lattice point where either side can be nonzero.
pub fn check_recursion(k: usize, n: usize, dim: usize) -> Result<RecursionReport> {
    check_k(k)?;
    if k < 2 || n < 2 {
        return Err(LabError::Domain(format!("the recursion needs k >= 2 and n >= 2, got k={k}, n={n}")));
    }
    let sets = (0..=k).map(enumerate_skeletons).collect::<Result<Vec<_>>>()?;
    let engine = engine_for(&sets, n, dim, n)?;
    let m = fields_on(&engine, &sets)?;
    let g00 = engine.green().at_origin();
    let prefactor = if g00 > 0.0 { (1.0 / g00).max(1.0) } else { f64::INFINITY };
    let rhs = pointwise_max((1..k).map(|r| m[r].multiply(&m[k - r])?.green_convolve(n)))?
        .expect("k >= 2 has a split")
        .scaled(prefactor);
    let lhs = &m[k];
    let domain = engine.domain();
    let radius = lhs.radius().max(rhs.radius());
    let mut report = RecursionReport {
        k,
        n,
        dim,
        prefactor,
        points_checked: 0.0,
        radius,
        min_slack: f64::INFINITY,
        worst_ratio: 0.0,
        worst_point: vec![0; dim],
        pass: true,
    };
    for i in 0..domain.ball_len(radius) {
        let l = lhs.values().get(i).copied().unwrap_or(0.0);
        let r = rhs.values().get(i).copied().unwrap_or(0.0);
        report.points_checked += domain.multiplicity(i);
        report.min_slack = report.min_slack.min(r - l);
        let ratio = if r > 0.0 { l / r } else if l > 0.0 { f64::INFINITY } else { 0.0 };
        if ratio > report.worst_ratio {
            report.worst_ratio = ratio;
            report.worst_point = domain.representative(i).to_vec();
        }
        if l > r * (1.0 + RELATIVE_SLACK) {
            report.pass = false;
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct NoninjectiveReport {
    pub k: usize,
    pub n: usize,
    pub dim: usize,
    pub skeletons_checked: usize,
    /// `max over S, x of D_n(0,..,0,x;S) / max_r M_{r,n}(x)`.
    pub worst_ratio: f64,
    pub worst_skeleton: String,
    /// Largest relative gap between `D_n(0,..,0,x;S)` and the reduced
    /// skeleton's value at the reduced pins.
    pub reduction_identity_error: f64,
    pub pass: bool,
}

/// Check `max over k-skeletons of D_n(0,..,0,x;S) <= max_{r<=k} M_{r,n}(x)`
/// pointwise, together with the label-reduction identity behind it.
pub fn noninjective_reduction_check(k: usize, n: usize, dim: usize) -> Result<NoninjectiveReport> {
    check_k(k)?;
    if n == 0 {
        return Err(LabError::Domain("diagrams need n >= 1".into()));
    }
    let sets = (0..=k).map(enumerate_skeletons).collect::<Result<Vec<_>>>()?;
    let engine = engine_for(&sets, n, dim, 0)?;
    let m = fields_on(&engine, &sets)?;
    let envelope = pointwise_max(m.into_iter().map(Ok))?.unwrap();
    let mut report = NoninjectiveReport {
        k,
        n,
        dim,
        skeletons_checked: 0,
        worst_ratio: 0.0,
        worst_skeleton: String::new(),
        reduction_identity_error: 0.0,
        pass: true,
    };
    for s in sets[k].items() {
        let field = engine.origin_field(s)?;
        let reduced = s.reduce_labels();
        let r = reduced.skeleton.k();
        // the reduced skeleton at the reduced pins
        let free_survives = reduced.sigma.last() == Some(&k) && k > 0;
        let reduced_field = if free_survives {
            engine.origin_field(&reduced.skeleton)?
        } else {
            SymField::delta_origin(engine.domain()).scaled(engine.origin_value(&reduced.skeleton)?)
        };
        debug_assert!(r <= k);
        for (i, &v) in field.values().iter().enumerate() {
            let w = reduced_field.values().get(i).copied().unwrap_or(0.0);
            let scale = v.abs().max(w.abs());
            if scale > 0.0 {
                report.reduction_identity_error = report.reduction_identity_error.max((v - w).abs() / scale);
            }
            let cap = envelope.values().get(i).copied().unwrap_or(0.0);
            let ratio = if cap > 0.0 { v / cap } else if v > 0.0 { f64::INFINITY } else { 0.0 };
            if ratio > report.worst_ratio {
                report.worst_ratio = ratio;
                report.worst_skeleton = s.encoding();
            }
            if v > cap * (1.0 + RELATIVE_SLACK) {
                report.pass = false;
            }
        }
        report.skeletons_checked += 1;
    }
    if report.reduction_identity_error > 1e-12 {
        report.pass = false;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::truncated_green;

    #[test]
    fn first_maximal_fields() {
        let m = maximal_diagram_fields(1, 4, 2).unwrap();
        assert_eq!(m[0].at_origin(), 1.0);
        assert_eq!(m[0].get(&[1, 0]), 0.0);
        let g = truncated_green(2, 4).unwrap();
        let mut worst = 0.0f64;
        g.for_each_point(|x, v| worst = worst.max((m[1].get(x) - v).abs()));
        assert!(worst < 1e-15);
    }

    #[test]
    fn recursion_holds_in_small_cases() {
        let r = check_recursion(2, 4, 1).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.radius >= 8);
        assert!(check_recursion(1, 4, 1).is_err());
        assert!(check_recursion(2, 1, 1).is_err());
    }

    #[test]
    fn reduction_holds_for_two_labels() {
        let r = noninjective_reduction_check(2, 4, 1).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.skeletons_checked, 10);
    }
}
