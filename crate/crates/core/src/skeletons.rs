//! Rooted plane trees and `k`-skeletons.
//!
//! A plane tree is stored by its preorder child counts (its Lukasiewicz
//! word). Plane trees have no nontrivial automorphisms, so a `(tree, labels)`
//! pair is its own canonical form and distinct pairs are distinct skeletons.

use std::fmt;
use std::sync::Arc;

use smallvec::SmallVec;

use crate::error::{LabError, Result};
use crate::offspring::BinomialMoments;

pub const DEFAULT_MAX_TREE_VERTICES: usize = 14;
pub const K_MAX: usize = 6;

/// A rooted plane tree; vertex 0 is the root and vertices are numbered in
/// preorder.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlaneTree {
    counts: Vec<u8>,
    parent: Vec<usize>,
    first_child: Vec<usize>,
}

impl PlaneTree {
    /// Build from preorder child counts; fails unless they describe a tree.
    pub fn from_child_counts(counts: Vec<u8>) -> Result<Self> {
        if counts.is_empty() {
            return Err(LabError::Domain("a plane tree needs at least one vertex".into()));
        }
        let n = counts.len();
        let mut parent = vec![usize::MAX; n];
        let mut first_child = vec![usize::MAX; n];
        // stack of (vertex, children still to attach)
        let mut stack: Vec<(usize, u8)> = Vec::new();
        for v in 0..n {
            if v > 0 {
                let Some(top) = stack.last_mut() else {
                    return Err(LabError::Domain(format!("child counts {counts:?} describe a forest")));
                };
                let p = top.0;
                parent[v] = p;
                if first_child[p] == usize::MAX {
                    first_child[p] = v;
                }
                top.1 -= 1;
                if top.1 == 0 {
                    stack.pop();
                }
            }
            if counts[v] > 0 {
                stack.push((v, counts[v]));
            }
        }
        if !stack.is_empty() {
            return Err(LabError::Domain(format!("child counts {counts:?} leave open slots")));
        }
        Ok(PlaneTree { counts, parent, first_child })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn child_count(&self, v: usize) -> usize {
        self.counts[v] as usize
    }

    pub fn child_counts(&self) -> &[u8] {
        &self.counts
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (v > 0).then(|| self.parent[v])
    }

    /// Children of `v` in plane order.
    pub fn children(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.counts[v] as usize);
        if self.counts[v] == 0 {
            return out;
        }
        let mut c = self.first_child[v];
        for _ in 0..self.counts[v] {
            out.push(c);
            c = c + self.subtree_size(c);
        }
        out
    }

    pub fn subtree_size(&self, v: usize) -> usize {
        // preorder: the subtree of v is a contiguous block
        let mut pending = 1usize;
        let mut u = v;
        while pending > 0 {
            pending = pending - 1 + self.counts[u] as usize;
            u += 1;
        }
        u - v
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.counts[v] == 0
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (1..self.len()).map(|v| (self.parent[v], v)).collect()
    }

    /// Length of the longest path, in edges.
    pub fn diameter(&self) -> usize {
        let n = self.len();
        let mut height = vec![0usize; n];
        let mut best = 0usize;
        for v in (0..n).rev() {
            let mut top = [0usize; 2];
            for c in self.children(v) {
                let h = height[c] + 1;
                if h > top[0] {
                    top[1] = top[0];
                    top[0] = h;
                } else if h > top[1] {
                    top[1] = h;
                }
            }
            height[v] = top[0];
            best = best.max(top[0] + top[1]);
        }
        best
    }

    pub fn encoding(&self) -> String {
        let parts: Vec<String> = self.counts.iter().map(|c| c.to_string()).collect();
        parts.join(".")
    }
}

fn catalan_walk(n: usize, prefix: &mut Vec<u8>, open: usize, out: &mut Vec<PlaneTree>) {
    let placed = prefix.len();
    if placed == n {
        if open == 0 {
            out.push(PlaneTree::from_child_counts(prefix.clone()).expect("valid Lukasiewicz word"));
        }
        return;
    }
    if open == 0 {
        return;
    }
    let remaining_after = n - placed - 1;
    // open - 1 + c slots must be fillable by the remaining vertices
    let max_c = remaining_after + 1 - open;
    for c in 0..=max_c {
        prefix.push(c as u8);
        catalan_walk(n, prefix, open - 1 + c, out);
        prefix.pop();
    }
}

/// All rooted plane trees with `n` vertices, in lexicographic order of their
/// child-count words.
pub fn enumerate_plane_trees(n: usize) -> Result<Vec<PlaneTree>> {
    enumerate_plane_trees_capped(n, DEFAULT_MAX_TREE_VERTICES)
}

pub fn enumerate_plane_trees_capped(n: usize, cap: usize) -> Result<Vec<PlaneTree>> {
    if n == 0 {
        return Err(LabError::Domain("plane trees have at least one vertex".into()));
    }
    if n > cap {
        return Err(LabError::Resource(format!("plane trees with {n} vertices exceed the cap of {cap}")));
    }
    let mut out = Vec::new();
    catalan_walk(n, &mut Vec::with_capacity(n), 1, &mut out);
    Ok(out)
}

pub type Labels = SmallVec<[u8; 8]>;

/// A plane tree with a label map `{0..k} -> V`, `labels[0]` = root.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Skeleton {
    tree: Arc<PlaneTree>,
    labels: Labels,
}

impl Skeleton {
    /// Validates every skeleton condition.
    pub fn new(tree: Arc<PlaneTree>, labels: Labels) -> Result<Self> {
        let s = Skeleton { tree, labels };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        let n = self.tree.len();
        if self.labels.first() != Some(&0) {
            return Err(LabError::Validation("label 0 must sit at the root".into()));
        }
        if let Some(bad) = self.labels.iter().find(|&&v| v as usize >= n) {
            return Err(LabError::Validation(format!("label points at missing vertex {bad}")));
        }
        let labelled = self.labelled_mask();
        for v in 0..n {
            if !labelled[v] && self.tree.child_count(v) < 2 {
                return Err(LabError::Validation(format!(
                    "vertex {v} is unlabelled with {} children",
                    self.tree.child_count(v)
                )));
            }
        }
        Ok(())
    }

    pub fn trivial() -> Self {
        Skeleton {
            tree: Arc::new(PlaneTree::from_child_counts(vec![0]).unwrap()),
            labels: SmallVec::from_slice(&[0]),
        }
    }

    pub fn tree(&self) -> &PlaneTree {
        &self.tree
    }

    pub fn tree_arc(&self) -> &Arc<PlaneTree> {
        &self.tree
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// The number of labels minus one.
    pub fn k(&self) -> usize {
        self.labels.len() - 1
    }

    pub fn vertex_count(&self) -> usize {
        self.tree.len()
    }

    pub fn edge_count(&self) -> usize {
        self.tree.len() - 1
    }

    pub fn labelled_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.tree.len()];
        for &v in &self.labels {
            mask[v as usize] = true;
        }
        mask
    }

    /// Labels carried by vertex `v`, ascending.
    pub fn labels_at(&self, v: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &u)| u as usize == v)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = [false; 256];
        self.labels.iter().all(|&v| !std::mem::replace(&mut seen[v as usize], true))
    }

    /// `prod_u b_{c(u)}`.
    pub fn weight(&self, b: &BinomialMoments) -> Result<f64> {
        let mut w = 1.0;
        for v in 0..self.tree.len() {
            w *= b.get(self.tree.child_count(v))?;
        }
        Ok(w)
    }

    /// One-line canonical text form, e.g. `c=2.0.0;l=0.1.2`.
    pub fn encoding(&self) -> String {
        let labels: Vec<String> = self.labels.iter().map(|v| v.to_string()).collect();
        format!("c={};l={}", self.tree.encoding(), labels.join("."))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = || LabError::Config(format!("malformed skeleton encoding {text:?}"));
        let (c, l) = text.trim().split_once(';').ok_or_else(bad)?;
        let c = c.strip_prefix("c=").ok_or_else(bad)?;
        let l = l.strip_prefix("l=").ok_or_else(bad)?;
        let counts = c
            .split('.')
            .map(|p| p.parse::<u8>().map_err(|_| bad()))
            .collect::<Result<Vec<u8>>>()?;
        let labels = l
            .split('.')
            .map(|p| p.parse::<u8>().map_err(|_| bad()))
            .collect::<Result<Labels>>()?;
        let tree = PlaneTree::from_child_counts(counts).map_err(|_| bad())?;
        Skeleton::new(Arc::new(tree), labels)
    }

    /// Collapse repeated labels.
    ///
    /// `sigma(0) = 0` and `sigma(i)` is the first label index after
    /// `sigma(i-1)` whose vertex has not been seen; the reduced skeleton keeps
    /// the tree and uses labels `l(sigma(0)), .., l(sigma(r))`. A pin vector
    /// `x` then satisfies `D(x; S) = 1(x_j = x_{sigma(class[j])} for all j) * D(x_sigma; S')`.
    pub fn reduce_labels(&self) -> ReducedSkeleton {
        let mut sigma = Vec::new();
        let mut class = vec![0usize; self.labels.len()];
        let mut reduced: Labels = SmallVec::new();
        for (j, &v) in self.labels.iter().enumerate() {
            match reduced.iter().position(|&u| u == v) {
                Some(i) => class[j] = i,
                None => {
                    class[j] = reduced.len();
                    sigma.push(j);
                    reduced.push(v);
                }
            }
        }
        ReducedSkeleton {
            skeleton: Skeleton { tree: Arc::clone(&self.tree), labels: reduced },
            sigma,
            class,
        }
    }
}

impl fmt::Display for Skeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encoding())
    }
}

/// Result of collapsing repeated labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedSkeleton {
    pub skeleton: Skeleton,
    /// `sigma[i]` = original label index of reduced label `i`.
    pub sigma: Vec<usize>,
    /// `class[j]` = reduced label index that original label `j` merges into.
    pub class: Vec<usize>,
}

impl ReducedSkeleton {
    /// Pairs `(j, sigma(class[j]))` of pin indices that must coincide.
    pub fn constraints(&self) -> Vec<(usize, usize)> {
        self.class
            .iter()
            .enumerate()
            .filter(|&(j, &i)| self.sigma[i] != j)
            .map(|(j, &i)| (j, self.sigma[i]))
            .collect()
    }

    /// Whether `pins` satisfy every merge constraint.
    pub fn consistent<P: PartialEq>(&self, pins: &[P]) -> bool {
        self.constraints().iter().all(|&(a, b)| pins[a] == pins[b])
    }

    pub fn reduced_pins<P: Clone>(&self, pins: &[P]) -> Vec<P> {
        self.sigma.iter().map(|&j| pins[j].clone()).collect()
    }
}

/// All `k`-skeletons, ordered by vertex count, then child-count word, then
/// labels.
#[derive(Clone, Debug)]
pub struct SkeletonSet {
    k: usize,
    items: Vec<Skeleton>,
    injective: Vec<usize>,
}

impl SkeletonSet {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn items(&self) -> &[Skeleton] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Indices of the skeletons with injective labels.
    pub fn injective_indices(&self) -> &[usize] {
        &self.injective
    }

    pub fn injective(&self) -> impl Iterator<Item = &Skeleton> {
        self.injective.iter().map(|&i| &self.items[i])
    }

    /// Number of skeletons with exactly `n` vertices.
    pub fn count_with_vertices(&self, n: usize) -> usize {
        self.items.iter().filter(|s| s.vertex_count() == n).count()
    }
}

fn assign_labels(
    tree: &Arc<PlaneTree>,
    required: &[bool],
    labels: &mut Labels,
    covered: &mut Vec<u8>,
    uncovered: usize,
    k: usize,
    out: &mut Vec<Skeleton>,
) {
    let placed = labels.len() - 1;
    if placed == k {
        if uncovered == 0 {
            out.push(Skeleton { tree: Arc::clone(tree), labels: labels.clone() });
        }
        return;
    }
    if k - placed < uncovered {
        return;
    }
    for v in 0..tree.len() {
        let newly = required[v] && covered[v] == 0;
        covered[v] += 1;
        labels.push(v as u8);
        assign_labels(tree, required, labels, covered, uncovered - newly as usize, k, out);
        labels.pop();
        covered[v] -= 1;
    }
}

/// Every `k`-skeleton.
pub fn enumerate_skeletons(k: usize) -> Result<SkeletonSet> {
    enumerate_skeletons_capped(k, K_MAX)
}

pub fn enumerate_skeletons_capped(k: usize, k_max: usize) -> Result<SkeletonSet> {
    if k > k_max {
        return Err(LabError::Resource(format!("skeleton enumeration is capped at k = {k_max}, got {k}")));
    }
    let max_vertices = (2 * k).max(1);
    let mut items = Vec::new();
    for n in 1..=max_vertices {
        for tree in enumerate_plane_trees_capped(n, max_vertices.max(DEFAULT_MAX_TREE_VERTICES))? {
            // non-root leaves and non-root vertices with one child must carry a label
            let required: Vec<bool> = (0..n).map(|v| v > 0 && tree.child_count(v) < 2).collect();
            let need = required.iter().filter(|&&r| r).count();
            if need > k {
                continue;
            }
            let tree = Arc::new(tree);
            let mut labels: Labels = SmallVec::from_slice(&[0]);
            let mut covered = vec![0u8; n];
            covered[0] = 1;
            assign_labels(&tree, &required, &mut labels, &mut covered, need, k, &mut items);
        }
    }
    let injective = items
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_injective())
        .map(|(i, _)| i)
        .collect();
    Ok(SkeletonSet { k, items, injective })
}

/// The injective `k`-skeletons.
pub fn injective_skeletons(k: usize) -> Result<Vec<Skeleton>> {
    Ok(enumerate_skeletons(k)?.injective().cloned().collect())
}

/// `sum over k-skeletons of prod_u b_{c(u)}`.
pub fn partition_function(set: &SkeletonSet, b: &BinomialMoments) -> Result<f64> {
    let mut total = crate::numeric::KahanSum::default();
    for s in set.items() {
        total.add(s.weight(b)?);
    }
    Ok(total.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::{descending_binomial_moments, OffspringDistribution};

    #[test]
    fn catalan_counts() {
        let catalan = [1, 1, 2, 5, 14, 42, 132, 429, 1430, 4862];
        for (i, &c) in catalan.iter().enumerate() {
            assert_eq!(enumerate_plane_trees(i + 1).unwrap().len(), c);
        }
    }

    #[test]
    fn tree_cap_and_empty_tree() {
        assert!(matches!(enumerate_plane_trees(15), Err(LabError::Resource(_))));
        assert!(matches!(enumerate_plane_trees(0), Err(LabError::Domain(_))));
    }

    #[test]
    fn children_follow_preorder() {
        let t = PlaneTree::from_child_counts(vec![2, 1, 0, 0]).unwrap();
        assert_eq!(t.children(0), vec![1, 3]);
        assert_eq!(t.children(1), vec![2]);
        assert_eq!(t.parent(2), Some(1));
        assert_eq!(t.subtree_size(1), 2);
        assert_eq!(t.diameter(), 3);
        assert!(PlaneTree::from_child_counts(vec![2, 0]).is_err());
        assert!(PlaneTree::from_child_counts(vec![0, 0]).is_err());
    }

    #[test]
    fn small_skeleton_counts() {
        let counts: Vec<usize> = (0..=2).map(|k| enumerate_skeletons(k).unwrap().len()).collect();
        assert_eq!(counts, vec![1, 2, 10]);
        let injective: Vec<usize> = (0..=2)
            .map(|k| enumerate_skeletons(k).unwrap().injective_indices().len())
            .collect();
        assert_eq!(injective, vec![1, 1, 6]);
    }

    #[test]
    fn partition_function_small_k() {
        let geo = descending_binomial_moments(&OffspringDistribution::geometric(), 8).unwrap();
        let bin = descending_binomial_moments(&OffspringDistribution::binary(), 8).unwrap();
        assert_eq!(partition_function(&enumerate_skeletons(0).unwrap(), &bin).unwrap(), 1.0);
        assert_eq!(partition_function(&enumerate_skeletons(1).unwrap(), &bin).unwrap(), 2.0);
        assert!((partition_function(&enumerate_skeletons(1).unwrap(), &geo).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn encoding_round_trip() {
        for s in enumerate_skeletons(2).unwrap().items() {
            assert_eq!(&Skeleton::parse(&s.encoding()).unwrap(), s);
        }
        assert!(Skeleton::parse("c=1.0;l=0").is_err());
        assert!(Skeleton::parse("nonsense").is_err());
    }

    #[test]
    fn one_vertex_skeleton_reduces_to_trivial() {
        let s = Skeleton::parse("c=0;l=0.0").unwrap();
        let r = s.reduce_labels();
        assert_eq!(r.skeleton, Skeleton::trivial());
        assert_eq!(r.constraints(), vec![(1, 0)]);
    }

    #[test]
    fn repeated_leaf_label_reduces_to_one_skeleton() {
        let s = Skeleton::parse("c=1.0;l=0.1.1").unwrap();
        let r = s.reduce_labels();
        assert_eq!(r.skeleton.encoding(), "c=1.0;l=0.1");
        assert_eq!(r.constraints(), vec![(2, 1)]);
        assert!(r.consistent(&[0, 5, 5]));
        assert!(!r.consistent(&[0, 5, 4]));
    }
}
