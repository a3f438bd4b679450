use crate::skeletons::PlaneTree;

/// A plane tree re-rooted at an arbitrary vertex (children lists only).
pub(crate) struct Rooted {
    children: Vec<Vec<usize>>,
}

impl Rooted {
    pub(crate) fn new(tree: &PlaneTree, root: usize) -> Self {
        let n = tree.len();
        let mut adjacency = vec![Vec::new(); n];
        for (p, c) in tree.edges() {
            adjacency[p].push(c);
            adjacency[c].push(p);
        }
        let mut children = vec![Vec::new(); n];
        let mut stack = vec![(root, usize::MAX)];
        while let Some((v, parent)) = stack.pop() {
            for &u in &adjacency[v] {
                if u != parent {
                    children[v].push(u);
                    stack.push((u, v));
                }
            }
        }
        Rooted { children }
    }

    pub(crate) fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }
}
