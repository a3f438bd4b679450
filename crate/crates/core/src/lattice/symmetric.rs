//! Fields invariant under the hyperoctahedral group (coordinate permutations
//! and sign flips).
//!
//! Every kernel rooted at the origin, and every diagram whose pins all sit at
//! the origin, has this symmetry. Storing one value per orbit shrinks a
//! radius-`R` ball by a factor of roughly `2^d d!`, which is what lets the
//! `d = 3` and `d = 4` moment computations reach a few hundred steps.

use std::sync::Arc;

use rayon::prelude::*;

use super::field::LatticeField;
use crate::error::{LabError, Result};
use crate::numeric::KahanSum;

/// Largest number of orbit representatives a domain may hold.
pub const DEFAULT_MAX_ORBITS: usize = 1 << 25;
const MAX_SYM_DIM: usize = 7;
const NONE: u32 = u32::MAX;

/// Orbit representatives `0 <= a_1 <= .. <= a_d` with `sum a_i <= radius`,
/// ordered by `l1` norm so that the representatives of any smaller ball form a
/// prefix.
#[derive(Debug)]
pub struct SymDomain {
    dim: usize,
    radius: usize,
    coords: Vec<u16>,
    keys: Vec<u128>,
    multiplicity: Vec<f64>,
    neighbours: Vec<u32>,
    /// `ball_len[r]` = number of representatives with norm `<= r`.
    ball_len: Vec<usize>,
}

fn pack_key(sorted: &[u16]) -> u128 {
    let norm: u128 = sorted.iter().map(|&c| c as u128).sum();
    let mut key = norm << 112;
    for (i, &c) in sorted.iter().enumerate() {
        key |= (c as u128) << (16 * (MAX_SYM_DIM - 1 - i));
    }
    key
}

fn orbit_size(sorted: &[u16]) -> f64 {
    let d = sorted.len();
    let mut count: f64 = (1..=d).map(|i| i as f64).product();
    let mut run = 1usize;
    for i in 1..=d {
        if i < d && sorted[i] == sorted[i - 1] {
            run += 1;
        } else {
            count /= (1..=run).map(|j| j as f64).product::<f64>();
            run = 1;
        }
    }
    let nonzero = sorted.iter().filter(|&&c| c != 0).count();
    count * (1u64 << nonzero) as f64
}

fn push_tuples(dim: usize, radius: usize, prefix: &mut Vec<u16>, remaining: usize, out: &mut Vec<Vec<u16>>) {
    if prefix.len() == dim {
        out.push(prefix.clone());
        return;
    }
    let low = prefix.last().copied().unwrap_or(0) as usize;
    let slots = dim - prefix.len();
    // every remaining coordinate is at least `c`
    let mut c = low;
    while c * slots <= remaining {
        prefix.push(c as u16);
        push_tuples(dim, radius, prefix, remaining - c, out);
        prefix.pop();
        c += 1;
    }
}

impl SymDomain {
    pub fn new(dim: usize, radius: usize) -> Result<Arc<Self>> {
        Self::with_budget(dim, radius, DEFAULT_MAX_ORBITS)
    }

    pub fn with_budget(dim: usize, radius: usize, max_orbits: usize) -> Result<Arc<Self>> {
        if dim == 0 || dim > MAX_SYM_DIM {
            return Err(LabError::Domain(format!(
                "symmetric domains support dimensions 1..={MAX_SYM_DIM}, got {dim}"
            )));
        }
        if radius >= u16::MAX as usize {
            return Err(LabError::Resource(format!("radius {radius} too large for a symmetric domain")));
        }
        let estimate = estimate_orbits(dim, radius);
        if estimate > max_orbits as f64 {
            return Err(LabError::Resource(format!(
                "a symmetric ball of radius {radius} in dimension {dim} has about {estimate:.0} orbits (budget {max_orbits})"
            )));
        }
        let mut tuples = Vec::new();
        push_tuples(dim, radius, &mut Vec::with_capacity(dim), radius, &mut tuples);
        let mut keyed: Vec<(u128, Vec<u16>)> = tuples.into_iter().map(|t| (pack_key(&t), t)).collect();
        keyed.sort_unstable_by_key(|(k, _)| *k);
        let len = keyed.len();
        let mut coords = Vec::with_capacity(len * dim);
        let mut keys = Vec::with_capacity(len);
        let mut multiplicity = Vec::with_capacity(len);
        let mut ball_len = vec![0usize; radius + 1];
        for (key, t) in &keyed {
            keys.push(*key);
            multiplicity.push(orbit_size(t));
            coords.extend_from_slice(t);
            let norm: usize = t.iter().map(|&c| c as usize).sum();
            ball_len[norm] += 1;
        }
        for r in 1..=radius {
            ball_len[r] += ball_len[r - 1];
        }
        let mut domain = SymDomain {
            dim,
            radius,
            coords,
            keys,
            multiplicity,
            neighbours: Vec::new(),
            ball_len,
        };
        domain.neighbours = domain.build_neighbours();
        Ok(Arc::new(domain))
    }

    fn build_neighbours(&self) -> Vec<u32> {
        let dim = self.dim;
        let mut table = vec![NONE; self.keys.len() * 2 * dim];
        table
            .par_chunks_mut(2 * dim)
            .enumerate()
            .for_each(|(i, slots)| {
                let base = &self.coords[i * dim..(i + 1) * dim];
                let mut moved = vec![0i64; dim];
                for axis in 0..dim {
                    for (s, delta) in [1i64, -1].into_iter().enumerate() {
                        for (m, &c) in moved.iter_mut().zip(base) {
                            *m = c as i64;
                        }
                        moved[axis] += delta;
                        if let Some(j) = self.index_of(&moved) {
                            slots[2 * axis + s] = j as u32;
                        }
                    }
                }
            });
        table
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Number of representatives with norm `<= r`.
    pub fn ball_len(&self, r: usize) -> usize {
        self.ball_len[r.min(self.radius)]
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn representative(&self, index: usize) -> &[u16] {
        &self.coords[index * self.dim..(index + 1) * self.dim]
    }

    pub fn multiplicity(&self, index: usize) -> f64 {
        self.multiplicity[index]
    }

    pub fn norm(&self, index: usize) -> usize {
        (self.keys[index] >> 112) as usize
    }

    /// Index of the orbit of `x`, or `None` outside the ball.
    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if x.len() != self.dim {
            return None;
        }
        let mut sorted: Vec<u64> = x.iter().map(|c| c.unsigned_abs()).collect();
        if sorted.iter().sum::<u64>() > self.radius as u64 {
            return None;
        }
        sorted.sort_unstable();
        let small: Vec<u16> = sorted.iter().map(|&c| c as u16).collect();
        self.keys.binary_search(&pack_key(&small)).ok()
    }
}

fn estimate_orbits(dim: usize, radius: usize) -> f64 {
    // ball volume / (2^d d!) plus generous slack for the boundary strata
    let r = radius as f64 + dim as f64;
    let mut v = 1.0;
    for i in 1..=dim {
        v *= r / i as f64;
    }
    let fact: f64 = (1..=dim).map(|i| i as f64).product();
    v / fact
}

/// A symmetric field on the ball of radius `radius`, stored per orbit.
#[derive(Clone, Debug)]
pub struct SymField {
    domain: Arc<SymDomain>,
    radius: usize,
    values: Vec<f64>,
}

impl SymField {
    pub fn zeros(domain: &Arc<SymDomain>, radius: usize) -> Result<Self> {
        if radius > domain.radius {
            return Err(LabError::Resource(format!(
                "field radius {radius} exceeds the symmetric domain radius {}",
                domain.radius
            )));
        }
        Ok(SymField {
            domain: Arc::clone(domain),
            radius,
            values: vec![0.0; domain.ball_len(radius)],
        })
    }

    pub fn delta_origin(domain: &Arc<SymDomain>) -> Self {
        let mut f = SymField::zeros(domain, 0).expect("radius 0 always fits");
        f.values[0] = 1.0;
        f
    }

    /// Build from a function of the representative coordinates.
    pub fn from_fn(domain: &Arc<SymDomain>, radius: usize, mut value: impl FnMut(&[u16]) -> f64) -> Result<Self> {
        let mut f = SymField::zeros(domain, radius)?;
        for (i, slot) in f.values.iter_mut().enumerate() {
            *slot = value(domain.representative(i));
        }
        Ok(f)
    }

    pub fn domain(&self) -> &Arc<SymDomain> {
        &self.domain
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at_origin(&self) -> f64 {
        self.values[0]
    }

    pub fn get(&self, x: &[i64]) -> f64 {
        match self.domain.index_of(x) {
            Some(i) if i < self.values.len() => self.values[i],
            _ => 0.0,
        }
    }

    fn same_domain(&self, other: &SymField) -> Result<()> {
        if Arc::ptr_eq(&self.domain, &other.domain) {
            Ok(())
        } else {
            Err(LabError::Config("symmetric fields live on different domains".into()))
        }
    }

    /// One random-walk step: `out(x) = (1/2d) sum_e f(x + e)`.
    pub fn step(&self) -> Result<SymField> {
        let mut out = SymField::zeros(&self.domain, self.radius + 1)?;
        let dim = self.domain.dim;
        let weight = 1.0 / (2 * dim) as f64;
        let src = &self.values;
        let limit = src.len();
        let nbrs = &self.domain.neighbours;
        out.values.iter_mut().enumerate().for_each(|(i, slot)| {
            let mut acc = 0.0;
            for &j in &nbrs[i * 2 * dim..(i + 1) * 2 * dim] {
                let j = j as usize;
                if j < limit {
                    acc += src[j];
                }
            }
            *slot = acc * weight;
        });
        Ok(out)
    }

    /// `G~_n * f`, with `on_step(j, partial)` called after each of the `n`
    /// steps with the partial sum `G~_j * f`.
    pub fn green_convolve_with(&self, n: usize, mut on_step: impl FnMut(usize, &SymField)) -> Result<SymField> {
        if n == 0 {
            return Err(LabError::Domain("green convolution needs n >= 1".into()));
        }
        let mut acc = SymField::zeros(&self.domain, self.radius + n)?;
        let mut current = self.clone();
        for j in 1..=n {
            current = current.step()?;
            for (a, v) in acc.values.iter_mut().zip(&current.values) {
                *a += v;
            }
            on_step(j, &acc);
        }
        Ok(acc)
    }

    pub fn green_convolve(&self, n: usize) -> Result<SymField> {
        self.green_convolve_with(n, |_, _| {})
    }

    /// Restrict or zero-extend to a new radius.
    pub fn with_radius(&self, radius: usize) -> Result<SymField> {
        let mut out = SymField::zeros(&self.domain, radius)?;
        let n = out.values.len().min(self.values.len());
        out.values[..n].copy_from_slice(&self.values[..n]);
        Ok(out)
    }

    pub fn multiply(&self, other: &SymField) -> Result<SymField> {
        self.same_domain(other)?;
        let radius = self.radius.min(other.radius);
        let len = self.domain.ball_len(radius);
        Ok(SymField {
            domain: Arc::clone(&self.domain),
            radius,
            values: self.values[..len].iter().zip(&other.values[..len]).map(|(a, b)| a * b).collect(),
        })
    }

    pub fn maximum(&self, other: &SymField) -> Result<SymField> {
        self.same_domain(other)?;
        let (big, small) = if self.radius >= other.radius { (self, other) } else { (other, self) };
        let mut out = big.clone();
        for (a, b) in out.values.iter_mut().zip(&small.values) {
            *a = a.max(*b);
        }
        Ok(out)
    }

    pub fn add_scaled(&mut self, other: &SymField, factor: f64) -> Result<()> {
        self.same_domain(other)?;
        if other.radius > self.radius {
            *self = self.with_radius(other.radius)?;
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
        Ok(())
    }

    pub fn scaled(mut self, factor: f64) -> SymField {
        for v in &mut self.values {
            *v *= factor;
        }
        self
    }

    /// `sum over x in Z^d of f(x) g(x)`.
    pub fn inner(&self, other: &SymField) -> Result<f64> {
        self.same_domain(other)?;
        let len = self.values.len().min(other.values.len());
        Ok((0..len)
            .map(|i| self.domain.multiplicity[i] * self.values[i] * other.values[i])
            .collect::<KahanSum>()
            .value())
    }

    /// `sum over x in Z^d of f(x)`.
    pub fn total(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| self.domain.multiplicity[i] * v)
            .collect::<KahanSum>()
            .value()
    }

    /// `sum over x in Z^d of f(x)^3`, and similar power sums.
    pub fn power_sum(&self, power: i32) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| self.domain.multiplicity[i] * v.powi(power))
            .collect::<KahanSum>()
            .value()
    }

    /// Unfold into a dense centred box.
    pub fn to_lattice(&self) -> LatticeField {
        let mut out = LatticeField::centered(self.domain.dim, self.radius);
        let mut points = Vec::new();
        out.for_each_point(|x, _| points.push(x.to_vec()));
        for x in points {
            let v = self.get(&x);
            if v != 0.0 {
                out.set(&x, v).expect("point lies in the box");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::kernels::{heat_kernel, truncated_green};

    #[test]
    fn orbit_sizes_cover_the_ball() {
        for dim in 1..=4 {
            let radius = 6;
            let domain = SymDomain::new(dim, radius).unwrap();
            let total: f64 = (0..domain.len()).map(|i| domain.multiplicity(i)).sum();
            let ball = LatticeField::centered(dim, radius);
            let mut count = 0usize;
            ball.for_each_point(|x, _| {
                if x.iter().map(|c| c.unsigned_abs()).sum::<u64>() <= radius as u64 {
                    count += 1;
                }
            });
            assert_eq!(total as usize, count, "dim {dim}");
        }
    }

    #[test]
    fn smaller_balls_are_prefixes() {
        let domain = SymDomain::new(3, 9).unwrap();
        for i in 1..domain.len() {
            assert!(domain.norm(i - 1) <= domain.norm(i));
        }
        assert_eq!(domain.ball_len(0), 1);
        assert_eq!(domain.ball_len(1), 2);
    }

    #[test]
    fn steps_agree_with_dense_convolution() {
        for dim in 1..=4 {
            let n = 6;
            let domain = SymDomain::new(dim, n).unwrap();
            let mut f = SymField::delta_origin(&domain);
            for _ in 0..n {
                f = f.step().unwrap();
            }
            let dense = heat_kernel(dim, n).unwrap();
            let mut worst = 0.0f64;
            dense.for_each_point(|x, v| worst = worst.max((f.get(x) - v).abs()));
            assert!(worst < 1e-15, "dim {dim}: {worst}");
            assert!((f.total() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn green_convolution_matches_dense_truncated_green() {
        let domain = SymDomain::new(2, 5).unwrap();
        let g = SymField::delta_origin(&domain).green_convolve(5).unwrap();
        let dense = truncated_green(2, 5).unwrap();
        let mut worst = 0.0f64;
        dense.for_each_point(|x, v| worst = worst.max((g.get(x) - v).abs()));
        assert!(worst < 1e-15);
        assert_eq!(g.to_lattice().get(&[2, -1]), dense.get(&[2, -1]));
    }

    #[test]
    fn budget_guard() {
        assert!(matches!(SymDomain::with_budget(4, 400, 1000), Err(LabError::Resource(_))));
    }
}
