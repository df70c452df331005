//! Ordered labeled tree edit distance (Zhang–Shasha) with unit costs.
//!
//! Nodes are addressed by their post-order index. Besides the distance the
//! module recovers one optimal mapping, from which an edit script follows.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tree<L> {
    pub label: L,
    pub children: Vec<Tree<L>>,
}

impl<L> Tree<L> {
    pub fn new(label: L, children: Vec<Tree<L>>) -> Self {
        Tree { label, children }
    }

    pub fn leaf(label: L) -> Self {
        Tree { label, children: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(Tree::node_count).sum::<usize>()
    }
}

/// Post-order flattening of a tree.
#[derive(Debug, Clone)]
pub struct Flat<'a, L> {
    pub nodes: Vec<&'a Tree<L>>,
    /// Post-order index of each node's leftmost leaf descendant.
    pub lmd: Vec<usize>,
    pub parent: Vec<Option<usize>>,
    keyroots: Vec<usize>,
}

impl<'a, L> Flat<'a, L> {
    pub fn new(tree: &'a Tree<L>) -> Self {
        let mut f = Flat { nodes: Vec::new(), lmd: Vec::new(), parent: Vec::new(), keyroots: Vec::new() };
        f.walk(tree);
        let n = f.nodes.len();
        // keyroots: nodes whose leftmost leaf differs from their parent's
        let mut seen = vec![false; n];
        for i in (0..n).rev() {
            let l = f.lmd[i];
            if !seen[l] {
                seen[l] = true;
                f.keyroots.push(i);
            }
        }
        f.keyroots.sort_unstable();
        f
    }

    fn walk(&mut self, t: &'a Tree<L>) -> usize {
        let mut first_leaf = None;
        let mut kids = Vec::new();
        for c in &t.children {
            let idx = self.walk(c);
            first_leaf.get_or_insert(self.lmd[idx]);
            kids.push(idx);
        }
        let me = self.nodes.len();
        self.nodes.push(t);
        self.lmd.push(first_leaf.unwrap_or(me));
        self.parent.push(None);
        for k in kids {
            self.parent[k] = Some(me);
        }
        me
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn label(&self, i: usize) -> &L {
        &self.nodes[i].label
    }

    /// Whether `anc` is a proper ancestor of `node`.
    pub fn is_ancestor(&self, anc: usize, node: usize) -> bool {
        node < anc && self.lmd[anc] <= node
    }
}

struct Solver<'x, 'a, L> {
    a: &'x Flat<'a, L>,
    b: &'x Flat<'a, L>,
    td: Vec<Vec<usize>>,
}

impl<'x, 'a, L: PartialEq> Solver<'x, 'a, L> {
    fn new(a: &'x Flat<'a, L>, b: &'x Flat<'a, L>) -> Self {
        let mut s = Solver { a, b, td: vec![vec![0; b.len()]; a.len()] };
        for &i in &a.keyroots {
            for &j in &b.keyroots {
                s.forest(i, j);
            }
        }
        s
    }

    fn relabel(&self, i: usize, j: usize) -> usize {
        (self.a.label(i) != self.b.label(j)) as usize
    }

    /// Fills the forest table for subtree pair `(i, j)`; stores tree
    /// distances for every pair on the two leftmost paths.
    fn forest(&mut self, i: usize, j: usize) -> Vec<Vec<usize>> {
        let (li, lj) = (self.a.lmd[i], self.b.lmd[j]);
        let (rows, cols) = (i - li + 2, j - lj + 2);
        let mut fd = vec![vec![0usize; cols]; rows];
        for x in 1..rows {
            fd[x][0] = fd[x - 1][0] + 1;
        }
        for y in 1..cols {
            fd[0][y] = fd[0][y - 1] + 1;
        }
        for k in li..=i {
            for l in lj..=j {
                let (x, y) = (k - li + 1, l - lj + 1);
                let del = fd[x - 1][y] + 1;
                let ins = fd[x][y - 1] + 1;
                if self.a.lmd[k] == li && self.b.lmd[l] == lj {
                    let m = fd[x - 1][y - 1] + self.relabel(k, l);
                    fd[x][y] = del.min(ins).min(m);
                    self.td[k][l] = fd[x][y];
                } else {
                    let (px, py) = (self.a.lmd[k] - li, self.b.lmd[l] - lj);
                    fd[x][y] = del.min(ins).min(fd[px][py] + self.td[k][l]);
                }
            }
        }
        fd
    }

    fn mapping(&mut self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        if self.a.is_empty() || self.b.is_empty() {
            return pairs;
        }
        let mut stack = vec![(self.a.len() - 1, self.b.len() - 1)];
        while let Some((i, j)) = stack.pop() {
            let fd = self.forest(i, j);
            let (li, lj) = (self.a.lmd[i], self.b.lmd[j]);
            let (mut x, mut y) = (i - li + 1, j - lj + 1);
            while x > 0 || y > 0 {
                if x > 0 && fd[x][y] == fd[x - 1][y] + 1 {
                    x -= 1;
                } else if y > 0 && fd[x][y] == fd[x][y - 1] + 1 {
                    y -= 1;
                } else {
                    let (k, l) = (x - 1 + li, y - 1 + lj);
                    if self.a.lmd[k] == li && self.b.lmd[l] == lj {
                        pairs.push((k, l));
                        x -= 1;
                        y -= 1;
                    } else {
                        stack.push((k, l));
                        x = self.a.lmd[k] - li;
                        y = self.b.lmd[l] - lj;
                    }
                }
            }
        }
        pairs.sort_unstable();
        pairs
    }
}

pub fn distance<L: PartialEq>(a: &Tree<L>, b: &Tree<L>) -> usize {
    let (fa, fb) = (Flat::new(a), Flat::new(b));
    let s = Solver::new(&fa, &fb);
    s.td[fa.len() - 1][fb.len() - 1]
}

/// One optimal edit script between two trees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditScript {
    /// Matched `(a, b)` post-order pairs, sorted by `a`.
    pub mapping: Vec<(usize, usize)>,
    /// Nodes of `a` that are deleted.
    pub deleted: Vec<usize>,
    /// Nodes of `b` that are inserted.
    pub inserted: Vec<usize>,
    /// Matched pairs whose labels differ.
    pub relabeled: Vec<(usize, usize)>,
}

impl EditScript {
    pub fn cost(&self) -> usize {
        self.deleted.len() + self.inserted.len() + self.relabeled.len()
    }

    pub fn partner_of_a(&self, i: usize) -> Option<usize> {
        self.mapping.iter().find(|p| p.0 == i).map(|p| p.1)
    }

    pub fn partner_of_b(&self, j: usize) -> Option<usize> {
        self.mapping.iter().find(|p| p.1 == j).map(|p| p.0)
    }
}

pub fn edit_script<L: PartialEq>(a: &Tree<L>, b: &Tree<L>) -> EditScript {
    let (fa, fb) = (Flat::new(a), Flat::new(b));
    let mut s = Solver::new(&fa, &fb);
    let mapping = s.mapping();
    let mut in_a = vec![false; fa.len()];
    let mut in_b = vec![false; fb.len()];
    let mut relabeled = Vec::new();
    for &(i, j) in &mapping {
        in_a[i] = true;
        in_b[j] = true;
        if fa.label(i) != fb.label(j) {
            relabeled.push((i, j));
        }
    }
    EditScript {
        deleted: (0..fa.len()).filter(|&i| !in_a[i]).collect(),
        inserted: (0..fb.len()).filter(|&j| !in_b[j]).collect(),
        relabeled,
        mapping,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(label: char, children: Vec<Tree<char>>) -> Tree<char> {
        Tree::new(label, children)
    }
    fn l(label: char) -> Tree<char> {
        Tree::leaf(label)
    }

    #[test]
    fn textbook_pair() {
        // f(d(a, c(b)), e) vs f(c(d(a, b)), e): distance 2
        let a = t('f', vec![t('d', vec![l('a'), t('c', vec![l('b')])]), l('e')]);
        let b = t('f', vec![t('c', vec![t('d', vec![l('a'), l('b')])]), l('e')]);
        assert_eq!(distance(&a, &b), 2);
        let s = edit_script(&a, &b);
        assert_eq!(s.cost(), 2);
    }

    #[test]
    fn identical_and_empty_children() {
        let a = t('r', vec![l('x'), l('y')]);
        assert_eq!(distance(&a, &a), 0);
        assert_eq!(distance(&l('r'), &a), 2);
        assert_eq!(distance(&a, &l('r')), 2);
        assert_eq!(distance(&l('r'), &l('q')), 1);
    }

    #[test]
    fn script_cost_matches_distance() {
        let a = t('r', vec![t('a', vec![l('b'), l('c')]), l('d'), t('e', vec![l('f')])]);
        let b = t('r', vec![l('b'), t('a', vec![l('c'), l('x')]), t('e', vec![l('d'), l('f')])]);
        let s = edit_script(&a, &b);
        assert_eq!(s.cost(), distance(&a, &b));
        assert!(s.mapping.contains(&(Flat::new(&a).len() - 1, Flat::new(&b).len() - 1)));
    }
}
