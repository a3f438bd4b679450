//! Diagrams whose pins all sit at the origin, except possibly the last one.
//!
//! Every message is then invariant under coordinate permutations and sign
//! flips, so the computation runs on orbit-reduced fields. The free pin is
//! handled by re-rooting the tree at its vertex: the root's incoming product
//! is the whole field `x -> D_n(0, .., 0, x; S)`.

use std::sync::Arc;

use super::tree::Rooted;
use crate::error::Result;
use crate::lattice::{SymDomain, SymField, DEFAULT_MAX_FIELD_ENTRIES};
use crate::skeletons::Skeleton;

pub struct SymEngine {
    domain: Arc<SymDomain>,
    n: usize,
    green: SymField,
}

impl SymEngine {
    /// An engine able to hold fields up to `radius` (at least `n`).
    pub fn new(dim: usize, n: usize, radius: usize) -> Result<Self> {
        let domain = SymDomain::with_budget(dim, radius.max(n), DEFAULT_MAX_FIELD_ENTRIES / 4)?;
        Self::on_domain(&domain, n)
    }

    pub fn on_domain(domain: &Arc<SymDomain>, n: usize) -> Result<Self> {
        let green = SymField::delta_origin(domain).green_convolve(n)?;
        Ok(SymEngine { domain: Arc::clone(domain), n, green })
    }

    /// An engine around an already computed `G~_n(0, .)`.
    pub fn from_green(green: SymField, n: usize) -> Self {
        SymEngine { domain: Arc::clone(green.domain()), n, green }
    }

    /// Reuse the domain of `self` for a smaller truncation.
    pub fn with_truncation(&self, n: usize) -> Result<Self> {
        Self::on_domain(&self.domain, n)
    }

    pub fn domain(&self) -> &Arc<SymDomain> {
        &self.domain
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// `G~_n(0, .)`.
    pub fn green(&self) -> &SymField {
        &self.green
    }

    /// Largest field radius needed for `skeleton` with all pins at the origin
    /// (`free = false`) or with the last pin free.
    pub fn required_radius(skeleton: &Skeleton, n: usize, free: bool) -> usize {
        let layout = Layout::new(skeleton, free);
        let mut worst = n;
        for &c in layout.rooted.children(layout.root) {
            if layout.free {
                layout.field_radius(c, n, &mut worst);
            } else {
                layout.origin_radius(c, n, &mut worst);
            }
        }
        worst
    }

    /// `D_n(0, .., 0; S)`.
    pub fn origin_value(&self, skeleton: &Skeleton) -> Result<f64> {
        let layout = Layout::new(skeleton, false);
        let mut value = 1.0;
        for &c in layout.rooted.children(layout.root) {
            value *= self.message_at_origin(&layout, c)?;
        }
        Ok(value)
    }

    /// `x -> D_n(0, .., 0, x; S)`.
    pub fn origin_field(&self, skeleton: &Skeleton) -> Result<SymField> {
        let layout = Layout::new(skeleton, true);
        if !layout.free {
            // the last label shares a vertex with an earlier one, forcing x = 0
            let value = self.origin_value(skeleton)?;
            return Ok(SymField::delta_origin(&self.domain).scaled(value));
        }
        let mut product: Option<SymField> = None;
        for &c in layout.rooted.children(layout.root) {
            let m = self.message_field(&layout, c)?;
            product = Some(match product {
                None => m,
                Some(p) => p.multiply(&m)?,
            });
        }
        Ok(product.unwrap_or_else(|| SymField::delta_origin(&self.domain)))
    }

    fn message_at_origin(&self, layout: &Layout, c: usize) -> Result<f64> {
        if layout.pinned[c] {
            let mut s = self.green.at_origin();
            for &cc in layout.rooted.children(c) {
                s *= self.message_at_origin(layout, cc)?;
            }
            Ok(s)
        } else {
            let f = self.product_into(layout, c)?;
            self.green.inner(&f)
        }
    }

    fn product_into(&self, layout: &Layout, c: usize) -> Result<SymField> {
        let mut product: Option<SymField> = None;
        for &cc in layout.rooted.children(c) {
            let m = self.message_field(layout, cc)?;
            product = Some(match product {
                None => m,
                Some(p) => p.multiply(&m)?,
            });
        }
        Ok(product.expect("unlabelled vertices have at least two children"))
    }

    fn message_field(&self, layout: &Layout, c: usize) -> Result<SymField> {
        if layout.pinned[c] {
            let mut s = 1.0;
            for &cc in layout.rooted.children(c) {
                s *= self.message_at_origin(layout, cc)?;
            }
            Ok(self.green.clone().scaled(s))
        } else {
            self.product_into(layout, c)?.green_convolve(self.n)
        }
    }
}

struct Layout {
    rooted: Rooted,
    root: usize,
    pinned: Vec<bool>,
    free: bool,
}

impl Layout {
    fn new(skeleton: &Skeleton, want_free: bool) -> Self {
        let k = skeleton.k();
        let labels = skeleton.labels();
        let free_vertex = labels[k] as usize;
        let free = want_free && k > 0 && !labels[..k].contains(&(free_vertex as u8));
        let root = if free { free_vertex } else { 0 };
        let mut pinned = skeleton.labelled_mask();
        if free {
            pinned[free_vertex] = false;
        }
        Layout { rooted: Rooted::new(skeleton.tree(), root), root, pinned, free }
    }

    /// Radius of the field `message_field` builds for `c`; `worst` collects
    /// the largest radius met on the way.
    fn field_radius(&self, c: usize, n: usize, worst: &mut usize) -> usize {
        if self.pinned[c] {
            for &cc in self.rooted.children(c) {
                self.origin_radius(cc, n, worst);
            }
            return n;
        }
        let inner = self
            .rooted
            .children(c)
            .iter()
            .map(|&cc| self.field_radius(cc, n, worst))
            .min()
            .unwrap_or(0);
        *worst = (*worst).max(inner + n);
        inner + n
    }

    /// The same for `message_at_origin`, which convolves nothing itself.
    fn origin_radius(&self, c: usize, n: usize, worst: &mut usize) {
        if self.pinned[c] {
            for &cc in self.rooted.children(c) {
                self.origin_radius(cc, n, worst);
            }
        } else {
            for &cc in self.rooted.children(c) {
                let r = self.field_radius(cc, n, worst);
                *worst = (*worst).max(r);
            }
        }
    }
}
