use serde::{Deserialize, Serialize};

use super::field::{FieldKind, LatticeField};
use crate::error::{LabError, Result};
use crate::numeric::LogFactorials;

/// Largest dense field (in entries) the kernel routines will allocate: 1 GiB of `f64`.
pub const DEFAULT_MAX_FIELD_ENTRIES: usize = 1 << 27;

/// A step/truncation count for a kernel on `Z^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelQuery {
    pub dim: usize,
    pub n: usize,
}

impl KernelQuery {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::Domain("lattice dimension must be at least 1".into()));
        }
        Ok(KernelQuery { dim, n })
    }

    pub fn parity(&self) -> usize {
        self.n % 2
    }
}

fn check_budget(dim: usize, radius: usize, max_entries: usize) -> Result<()> {
    let side = 2 * radius as u128 + 1;
    let entries = side.checked_pow(dim as u32).unwrap_or(u128::MAX);
    if entries > max_entries as u128 {
        return Err(LabError::Resource(format!(
            "a radius-{radius} box in dimension {dim} needs {entries} entries (budget {max_entries})"
        )));
    }
    Ok(())
}

/// One step of simple random walk applied to `f`:
/// `out(x) = (1/2d) * sum over unit vectors e of f(x - e)`.
///
/// The output box is the input box grown by one site along every axis, so the
/// support is tracked exactly and total mass is preserved.
pub fn single_step_convolve(f: &LatticeField) -> LatticeField {
    let dim = f.dim();
    let lower: Vec<i64> = f.lower().iter().map(|lo| lo - 1).collect();
    let shape: Vec<usize> = f.shape().iter().map(|len| len + 2).collect();
    let mut out = LatticeField::zeros(lower, shape).with_kind(f.kind());
    if f.is_empty() {
        return out;
    }
    let weight = 1.0 / (2 * dim) as f64;
    let out_strides = out.strides().to_vec();
    let in_shape = f.shape().to_vec();
    let row = in_shape[dim - 1];
    let values = f.values();
    let out_values = out.values_mut();
    let mut offset = vec![0usize; dim];
    for chunk in values.chunks(row) {
        // index in `out` of the first point of this row
        let base: usize = offset
            .iter()
            .zip(&out_strides)
            .map(|(o, s)| (o + 1) * s)
            .sum();
        for (j, &v) in chunk.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let w = v * weight;
            let centre = base + j;
            for &s in &out_strides {
                out_values[centre + s] += w;
                out_values[centre - s] += w;
            }
        }
        for axis in (0..dim - 1).rev() {
            offset[axis] += 1;
            if offset[axis] < in_shape[axis] {
                break;
            }
            offset[axis] = 0;
        }
    }
    out
}

/// `p_n(0, ·)` on the box of radius `n`, by `n` exact single steps.
pub fn heat_kernel(dim: usize, n: usize) -> Result<LatticeField> {
    heat_kernel_with_budget(dim, n, DEFAULT_MAX_FIELD_ENTRIES)
}

pub fn heat_kernel_with_budget(dim: usize, n: usize, max_entries: usize) -> Result<LatticeField> {
    KernelQuery::new(dim, n)?;
    check_budget(dim, n, max_entries)?;
    let mut field = LatticeField::delta(&vec![0; dim]).with_kind(FieldKind::Probability);
    for _ in 0..n {
        field = single_step_convolve(&field);
    }
    Ok(field)
}

/// `G~_n(0, ·) = sum_{k=1..n} p_k(0, ·)` on the box of radius `n`.
pub fn truncated_green(dim: usize, n: usize) -> Result<LatticeField> {
    truncated_green_with_budget(dim, n, DEFAULT_MAX_FIELD_ENTRIES)
}

pub fn truncated_green_with_budget(dim: usize, n: usize, max_entries: usize) -> Result<LatticeField> {
    KernelQuery::new(dim, n)?;
    if n == 0 {
        return Err(LabError::Domain(
            "the truncated Green function needs n >= 1 (G~_0 vanishes identically)".into(),
        ));
    }
    check_budget(dim, n, max_entries)?;
    green_convolve(&LatticeField::delta(&vec![0; dim]), n)
}

/// `G~_n * f = sum_{j=1..n} P^j f`, computed by iterated single steps with a
/// running accumulator on the final box.
pub fn green_convolve(f: &LatticeField, n: usize) -> Result<LatticeField> {
    if n == 0 {
        return Err(LabError::Domain("green convolution needs n >= 1".into()));
    }
    let lower: Vec<i64> = f.lower().iter().map(|lo| lo - n as i64).collect();
    let shape: Vec<usize> = f.shape().iter().map(|len| len + 2 * n).collect();
    let mut acc = LatticeField::zeros(lower, shape);
    let mut current = f.clone();
    for _ in 0..n {
        current = single_step_convolve(&current);
        acc.accumulate(&current)?;
    }
    Ok(acc)
}

/// Exact `p_m(0, a)` for one-dimensional simple random walk.
fn one_dim_transition(lf: &LogFactorials, m: usize, a: i64) -> f64 {
    let a = a.unsigned_abs() as usize;
    if a > m || (m - a) % 2 == 1 {
        return 0.0;
    }
    let up = (m + a) / 2;
    (lf.ln_binomial(m, up) - m as f64 * std::f64::consts::LN_2).exp()
}

/// `p_n(0, x)` for `n = 0..=max_n` at a single site `x`.
///
/// Uses the coordinate-splitting identity: in `j` dimensions the number of
/// steps taken along the first coordinate is Binomial(n, 1/j), and the
/// coordinates move independently given those counts. The cost is
/// `O(d * max_n^2)` and no field is materialised, so this reaches step counts
/// far beyond what the box convolution can.
pub fn transition_probabilities(x: &[i64], max_n: usize) -> Result<Vec<f64>> {
    let dim = x.len();
    if dim == 0 {
        return Err(LabError::Domain("lattice dimension must be at least 1".into()));
    }
    let lf = LogFactorials::new(max_n + 1);
    // innermost coordinate first
    let mut level: Vec<f64> = (0..=max_n).map(|m| one_dim_transition(&lf, m, x[dim - 1])).collect();
    for j in 2..=dim {
        let coord = x[dim - j];
        let single: Vec<f64> = (0..=max_n).map(|m| one_dim_transition(&lf, m, coord)).collect();
        let p = 1.0 / j as f64;
        let mut next = vec![0.0; max_n + 1];
        for (n, slot) in next.iter_mut().enumerate() {
            let mut acc = crate::numeric::KahanSum::default();
            for m in 0..=n {
                let s = single[m];
                if s == 0.0 {
                    continue;
                }
                let rest = level[n - m];
                if rest == 0.0 {
                    continue;
                }
                acc.add(lf.binomial_pmf(n, m, p) * s * rest);
            }
            *slot = acc.value();
        }
        level = next;
    }
    Ok(level)
}

/// Return probabilities `p_n(0, 0)` for `n = 0..=max_n`.
pub fn return_probabilities(dim: usize, max_n: usize) -> Result<Vec<f64>> {
    transition_probabilities(&vec![0; dim], max_n)
}
