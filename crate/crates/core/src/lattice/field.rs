use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::numeric::KahanSum;

/// What a field is meant to hold; probability fields get extra invariant checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    General,
    Probability,
}

/// A real-valued function on a finite axis-aligned box of `Z^d`.
///
/// Values are stored densely in row-major order (last axis fastest). Points
/// outside the box are implicitly zero, which is how exact supports are tracked
/// through convolutions and products.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField {
    dim: usize,
    lower: Vec<i64>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    values: Vec<f64>,
    kind: FieldKind,
}

fn strides_for(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for axis in (0..shape.len().saturating_sub(1)).rev() {
        strides[axis] = strides[axis + 1] * shape[axis + 1];
    }
    strides
}

impl LatticeField {
    pub fn zeros(lower: Vec<i64>, shape: Vec<usize>) -> Self {
        assert_eq!(lower.len(), shape.len(), "lower corner and shape disagree on dimension");
        assert!(!shape.is_empty(), "a lattice field needs dimension at least one");
        let len = shape.iter().product();
        let strides = strides_for(&shape);
        LatticeField {
            dim: shape.len(),
            lower,
            shape,
            strides,
            values: vec![0.0; len],
            kind: FieldKind::General,
        }
    }

    /// The zero field on `{-radius..radius}^dim`.
    pub fn centered(dim: usize, radius: usize) -> Self {
        Self::zeros(vec![-(radius as i64); dim], vec![2 * radius + 1; dim])
    }

    /// Unit point mass at `point`, on the single-site box.
    pub fn delta(point: &[i64]) -> Self {
        let mut field = Self::zeros(point.to_vec(), vec![1; point.len()]);
        field.values[0] = 1.0;
        field
    }

    pub fn from_values(lower: Vec<i64>, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let mut field = Self::zeros(lower, shape);
        if values.len() != field.values.len() {
            return Err(LabError::Config(format!(
                "field box holds {} values but {} were supplied",
                field.values.len(),
                values.len()
            )));
        }
        field.values = values;
        Ok(field)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &[i64] {
        &self.lower
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub(crate) fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn with_kind(mut self, kind: FieldKind) -> Self {
        self.kind = kind;
        self
    }

    /// Upper corner (inclusive) along each axis.
    pub fn upper(&self) -> Vec<i64> {
        self.lower
            .iter()
            .zip(&self.shape)
            .map(|(&lo, &len)| lo + len as i64 - 1)
            .collect()
    }

    /// `Some(r)` when the box is exactly `{-r..r}^d`.
    pub fn radius(&self) -> Option<usize> {
        let len = self.shape[0];
        if len % 2 == 0 {
            return None;
        }
        let r = (len - 1) / 2;
        let centred = self
            .shape
            .iter()
            .zip(&self.lower)
            .all(|(&l, &lo)| l == len && lo == -(r as i64));
        centred.then_some(r)
    }

    /// Array index of the lattice origin along each axis.
    pub fn origin_offset(&self) -> Vec<i64> {
        self.lower.iter().map(|lo| -lo).collect()
    }

    pub fn contains(&self, point: &[i64]) -> bool {
        point.len() == self.dim
            && point
                .iter()
                .zip(&self.lower)
                .zip(&self.shape)
                .all(|((&x, &lo), &len)| x >= lo && x < lo + len as i64)
    }

    pub fn index_of(&self, point: &[i64]) -> Option<usize> {
        if !self.contains(point) {
            return None;
        }
        Some(
            point
                .iter()
                .zip(&self.lower)
                .zip(&self.strides)
                .map(|((&x, &lo), &s)| (x - lo) as usize * s)
                .sum(),
        )
    }

    pub fn point_of(&self, mut index: usize) -> Vec<i64> {
        let mut point = vec![0i64; self.dim];
        for axis in 0..self.dim {
            let q = index / self.strides[axis];
            index %= self.strides[axis];
            point[axis] = self.lower[axis] + q as i64;
        }
        point
    }

    /// Value at `point`, zero outside the box.
    pub fn get(&self, point: &[i64]) -> f64 {
        self.index_of(point).map_or(0.0, |i| self.values[i])
    }

    pub fn set(&mut self, point: &[i64], value: f64) -> Result<()> {
        let index = self.index_of(point).ok_or_else(|| {
            LabError::Domain(format!("point {point:?} lies outside the field box"))
        })?;
        self.values[index] = value;
        Ok(())
    }

    /// Visit every box point in storage order.
    pub fn for_each_point(&self, mut visit: impl FnMut(&[i64], f64)) {
        if self.values.is_empty() {
            return;
        }
        let mut point = self.lower.clone();
        for &value in &self.values {
            visit(&point, value);
            for axis in (0..self.dim).rev() {
                point[axis] += 1;
                if point[axis] < self.lower[axis] + self.shape[axis] as i64 {
                    break;
                }
                point[axis] = self.lower[axis];
            }
        }
    }

    /// Compensated sum of all values.
    pub fn total(&self) -> f64 {
        let mut acc = KahanSum::default();
        for &v in &self.values {
            acc.add(v);
        }
        acc.value()
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.values.iter_mut().for_each(|v| *v *= factor);
        self
    }

    fn check_dim(&self, other: &LatticeField) -> Result<()> {
        if self.dim != other.dim {
            return Err(LabError::Config(format!(
                "dimension mismatch between fields ({} vs {})",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    /// Copy of `self` re-boxed onto `[lower, lower+shape)`; entries falling
    /// outside the new box are dropped.
    pub fn reboxed(&self, lower: &[i64], shape: &[usize]) -> LatticeField {
        let mut out = LatticeField::zeros(lower.to_vec(), shape.to_vec()).with_kind(self.kind);
        self.for_each_point(|p, v| {
            if v != 0.0 {
                if let Some(i) = out.index_of(p) {
                    out.values[i] = v;
                }
            }
        });
        out
    }

    /// Pointwise sum on the union box.
    pub fn add(&self, other: &LatticeField) -> Result<LatticeField> {
        self.check_dim(other)?;
        let lower: Vec<i64> = self.lower.iter().zip(&other.lower).map(|(a, b)| *a.min(b)).collect();
        let upper: Vec<i64> = self
            .upper()
            .iter()
            .zip(other.upper())
            .map(|(a, b)| (*a).max(b))
            .collect();
        let shape: Vec<usize> = lower.iter().zip(&upper).map(|(lo, hi)| (hi - lo + 1) as usize).collect();
        let mut out = self.reboxed(&lower, &shape);
        other.for_each_point(|p, v| {
            if v != 0.0 {
                let i = out.index_of(p).expect("union box contains both operands");
                out.values[i] += v;
            }
        });
        Ok(out)
    }

    /// In-place `self += other`, where `other`'s box must lie inside `self`'s.
    pub fn accumulate(&mut self, other: &LatticeField) -> Result<()> {
        self.check_dim(other)?;
        if other.is_empty() {
            return Ok(());
        }
        if !self.contains(&other.lower) || !self.contains(&other.upper()) {
            return Err(LabError::Domain("accumulated field does not fit inside the target box".into()));
        }
        let start = self.index_of(&other.lower).expect("checked above");
        let row = other.shape[self.dim - 1];
        let mut offset = vec![0usize; self.dim];
        for chunk in other.values.chunks(row) {
            let base = start
                + offset
                    .iter()
                    .zip(&self.strides)
                    .map(|(o, s)| o * s)
                    .sum::<usize>();
            for (dst, src) in self.values[base..base + row].iter_mut().zip(chunk) {
                *dst += *src;
            }
            for axis in (0..self.dim - 1).rev() {
                offset[axis] += 1;
                if offset[axis] < other.shape[axis] {
                    break;
                }
                offset[axis] = 0;
            }
        }
        Ok(())
    }

    /// Pointwise product on the intersection box (possibly empty).
    pub fn multiply(&self, other: &LatticeField) -> Result<LatticeField> {
        self.check_dim(other)?;
        let lower: Vec<i64> = self.lower.iter().zip(&other.lower).map(|(a, b)| *a.max(b)).collect();
        let upper: Vec<i64> = self
            .upper()
            .iter()
            .zip(other.upper())
            .map(|(a, b)| (*a).min(b))
            .collect();
        let shape: Vec<usize> = lower
            .iter()
            .zip(&upper)
            .map(|(lo, hi)| if hi >= lo { (hi - lo + 1) as usize } else { 0 })
            .collect();
        let mut out = LatticeField::zeros(lower, shape);
        if out.is_empty() {
            return Ok(out);
        }
        let mut point = out.lower.clone();
        for i in 0..out.values.len() {
            out.values[i] = self.get(&point) * other.get(&point);
            for axis in (0..out.dim).rev() {
                point[axis] += 1;
                if point[axis] < out.lower[axis] + out.shape[axis] as i64 {
                    break;
                }
                point[axis] = out.lower[axis];
            }
        }
        Ok(out)
    }

    /// Pointwise maximum on the union box.
    pub fn maximum(&self, other: &LatticeField) -> Result<LatticeField> {
        let mut out = self.add(other)?;
        let mut points = Vec::with_capacity(out.len());
        out.for_each_point(|p, _| points.push(p.to_vec()));
        for (slot, p) in out.values.iter_mut().zip(&points) {
            *slot = self.get(p).max(other.get(p));
        }
        Ok(out)
    }

    /// Smallest sub-box holding every nonzero entry.
    pub fn trimmed(&self) -> LatticeField {
        let mut lo = vec![i64::MAX; self.dim];
        let mut hi = vec![i64::MIN; self.dim];
        self.for_each_point(|p, v| {
            if v != 0.0 {
                for axis in 0..p.len() {
                    lo[axis] = lo[axis].min(p[axis]);
                    hi[axis] = hi[axis].max(p[axis]);
                }
            }
        });
        if lo[0] == i64::MAX {
            return LatticeField::zeros(self.lower.clone(), vec![0; self.dim]).with_kind(self.kind);
        }
        let shape: Vec<usize> = lo.iter().zip(&hi).map(|(a, b)| (b - a + 1) as usize).collect();
        self.reboxed(&lo, &shape)
    }

    /// Checks the value invariants: every entry finite, and for probability
    /// fields total mass at most `1 + 1e-12` with no entry below `-1e-15`.
    pub fn check_invariants(&self) -> Result<()> {
        if let Some(bad) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(LabError::Precision(format!("non-finite field entry {bad}")));
        }
        if self.kind == FieldKind::Probability {
            let total = self.total();
            if total > 1.0 + 1e-12 {
                return Err(LabError::Precision(format!("probability field has mass {total}")));
            }
            if let Some(neg) = self.values.iter().find(|&&v| v < -1e-15) {
                return Err(LabError::Precision(format!("probability field has entry {neg}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centred_box_reports_radius_and_offset() {
        let f = LatticeField::centered(3, 2);
        assert_eq!(f.radius(), Some(2));
        assert_eq!(f.origin_offset(), vec![2, 2, 2]);
        assert_eq!(f.len(), 125);
        let g = LatticeField::zeros(vec![0, -1], vec![3, 3]);
        assert_eq!(g.radius(), None);
    }

    #[test]
    fn index_round_trips_through_point() {
        let f = LatticeField::zeros(vec![-1, 2, -3], vec![3, 4, 5]);
        for i in 0..f.len() {
            let p = f.point_of(i);
            assert_eq!(f.index_of(&p), Some(i));
        }
        assert_eq!(f.index_of(&[2, 2, -3]), None);
    }

    #[test]
    fn product_lives_on_intersection() {
        let mut a = LatticeField::centered(1, 2);
        a.values_mut().iter_mut().for_each(|v| *v = 2.0);
        let mut b = LatticeField::zeros(vec![1], vec![4]);
        b.values_mut().iter_mut().for_each(|v| *v = 3.0);
        let c = a.multiply(&b).unwrap();
        assert_eq!(c.lower(), &[1]);
        assert_eq!(c.values(), &[6.0, 6.0]);
        let far = LatticeField::delta(&[10]);
        assert!(a.multiply(&far).unwrap().is_empty());
    }

    #[test]
    fn add_and_accumulate_agree() {
        let a = LatticeField::delta(&[1, -1]);
        let mut big = LatticeField::centered(2, 2);
        big.accumulate(&a).unwrap();
        let sum = LatticeField::centered(2, 2).add(&a).unwrap();
        assert_eq!(big.get(&[1, -1]), 1.0);
        assert_eq!(sum.get(&[1, -1]), 1.0);
        assert_eq!(big.total(), sum.total());
    }

    #[test]
    fn dimension_mismatch_is_a_configuration_error() {
        let a = LatticeField::delta(&[0]);
        let b = LatticeField::delta(&[0, 0]);
        assert!(matches!(a.multiply(&b), Err(LabError::Config(_))));
    }

    #[test]
    fn probability_invariant_rejects_excess_mass() {
        let mut f = LatticeField::centered(1, 1).with_kind(FieldKind::Probability);
        f.values_mut().copy_from_slice(&[0.5, 0.5, 1e-9]);
        assert!(f.check_invariants().is_err());
        f.values_mut()[2] = 0.0;
        assert!(f.check_invariants().is_ok());
    }

    #[test]
    fn trimming_finds_support() {
        let mut f = LatticeField::centered(2, 3);
        f.set(&[1, -2], 1.0).unwrap();
        f.set(&[-1, 0], 2.0).unwrap();
        let t = f.trimmed();
        assert_eq!(t.lower(), &[-1, -2]);
        assert_eq!(t.shape(), &[3, 3]);
        assert_eq!(t.total(), 3.0);
    }
}
