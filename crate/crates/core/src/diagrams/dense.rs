//! Diagram evaluation for arbitrary pins on dense boxes.
//!
//! The tree is rooted at the vertex carrying label 0. A message from a child
//! `c` to its parent is the function `y -> sum_{y_c} G~_n(y, y_c) F_c(y_c)`
//! where `F_c` is the product of the messages into `c` (times a point mass if
//! `c` is pinned). Full convolutions are only needed between two unlabelled
//! vertices; a pinned parent only needs the message at its pin, which is an
//! inner product.

use super::tree::Rooted;
use crate::error::{LabError, Result};
use crate::lattice::{green_convolve, truncated_green_with_budget, LatticeField, DEFAULT_MAX_FIELD_ENTRIES};
use crate::numeric::KahanSum;
use crate::skeletons::Skeleton;

/// `G~_n(0, .)` and its translates.
pub struct DenseKernel {
    dim: usize,
    n: usize,
    green: LatticeField,
}

impl DenseKernel {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        Ok(DenseKernel { dim, n, green: truncated_green_with_budget(dim, n, DEFAULT_MAX_FIELD_ENTRIES)? })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn green(&self) -> &LatticeField {
        &self.green
    }

    /// `G~_n(p, q)`.
    pub fn at(&self, p: &[i64], q: &[i64]) -> f64 {
        let diff: Vec<i64> = p.iter().zip(q).map(|(a, b)| a - b).collect();
        self.green.get(&diff)
    }

    /// `y -> G~_n(p, y)`.
    fn translated(&self, p: &[i64], scale: f64) -> LatticeField {
        let lower: Vec<i64> = self.green.lower().iter().zip(p).map(|(a, b)| a + b).collect();
        let values = self.green.values().iter().map(|v| v * scale).collect();
        LatticeField::from_values(lower, self.green.shape().to_vec(), values).expect("same shape")
    }

    /// `sum_y G~_n(p, y) f(y)`.
    fn pair_with(&self, p: &[i64], f: &LatticeField) -> f64 {
        let mut acc = KahanSum::default();
        let mut diff = vec![0i64; self.dim];
        f.for_each_point(|y, v| {
            if v != 0.0 {
                for (d, (a, b)) in diff.iter_mut().zip(p.iter().zip(y)) {
                    *d = a - b;
                }
                acc.add(v * self.green.get(&diff));
            }
        });
        acc.value()
    }

    /// `D_n(pins; S)`, or `None` when the pins disagree on a vertex with
    /// several labels.
    pub fn evaluate(&self, skeleton: &Skeleton, pins: &[Vec<i64>]) -> Result<Option<f64>> {
        if pins.len() != skeleton.k() + 1 {
            return Err(LabError::Config(format!(
                "a {}-skeleton needs {} pins, got {}",
                skeleton.k(),
                skeleton.k() + 1,
                pins.len()
            )));
        }
        if let Some(bad) = pins.iter().find(|p| p.len() != self.dim) {
            return Err(LabError::Config(format!("pin {bad:?} is not in dimension {}", self.dim)));
        }
        let tree = skeleton.tree();
        let mut vertex_pin: Vec<Option<&[i64]>> = vec![None; tree.len()];
        for (i, &v) in skeleton.labels().iter().enumerate() {
            match vertex_pin[v as usize] {
                Some(existing) if existing != pins[i].as_slice() => return Ok(None),
                _ => vertex_pin[v as usize] = Some(&pins[i]),
            }
        }
        let rooted = Rooted::new(tree, 0);
        let root_pin = vertex_pin[0].expect("root carries label 0");
        let mut value = 1.0;
        for &c in rooted.children(0) {
            value *= self.message_at(&rooted, &vertex_pin, c, root_pin)?;
            if value == 0.0 {
                break;
            }
        }
        Ok(Some(value))
    }

    fn message_at(&self, t: &Rooted, pins: &[Option<&[i64]>], c: usize, at: &[i64]) -> Result<f64> {
        match pins[c] {
            Some(q) => {
                let g = self.at(at, q);
                if g == 0.0 {
                    return Ok(0.0);
                }
                let mut s = g;
                for &cc in t.children(c) {
                    s *= self.message_at(t, pins, cc, q)?;
                    if s == 0.0 {
                        break;
                    }
                }
                Ok(s)
            }
            None => {
                let f = self.product_into(t, pins, c)?;
                Ok(self.pair_with(at, &f))
            }
        }
    }

    fn product_into(&self, t: &Rooted, pins: &[Option<&[i64]>], c: usize) -> Result<LatticeField> {
        let mut product: Option<LatticeField> = None;
        for &cc in t.children(c) {
            let m = self.message_field(t, pins, cc)?;
            product = Some(match product {
                None => m,
                Some(p) => p.multiply(&m)?,
            });
        }
        Ok(product.expect("unlabelled vertices have at least two children"))
    }

    fn message_field(&self, t: &Rooted, pins: &[Option<&[i64]>], c: usize) -> Result<LatticeField> {
        match pins[c] {
            Some(q) => {
                let mut s = 1.0;
                for &cc in t.children(c) {
                    s *= self.message_at(t, pins, cc, q)?;
                }
                Ok(self.translated(q, s))
            }
            None => green_convolve(&self.product_into(t, pins, c)?, self.n),
        }
    }
}
