//! Construct-only abstraction of codes.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::code::{Branch, Code, Domain, GrammarError, Stmt};
use crate::ted::{self, Tree};
use crate::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Construct {
    Repeat,
    RepeatUntil,
    While,
    If,
    IfElse,
}

impl Construct {
    pub const ALL: [Construct; 5] =
        [Construct::Repeat, Construct::RepeatUntil, Construct::While, Construct::If, Construct::IfElse];

    pub fn block_type(self) -> crate::BlockType {
        use crate::BlockType as B;
        match self {
            Construct::Repeat => B::Repeat,
            Construct::RepeatUntil => B::RepeatUntil,
            Construct::While => B::While,
            Construct::If => B::If,
            Construct::IfElse => B::IfElse,
        }
    }

    /// Constructs available in a store.
    pub fn in_store(store: &BTreeSet<crate::BlockType>) -> Vec<Construct> {
        Construct::ALL.into_iter().filter(|c| store.contains(&c.block_type())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SketchNode {
    pub construct: Construct,
    pub body: Vec<SketchNode>,
    /// Only used by `IfElse`.
    pub else_body: Vec<SketchNode>,
}

impl SketchNode {
    pub fn new(construct: Construct) -> Self {
        SketchNode { construct, body: Vec::new(), else_body: Vec::new() }
    }

    pub fn with_body(construct: Construct, body: Vec<SketchNode>) -> Self {
        SketchNode { construct, body, else_body: Vec::new() }
    }

    fn levels(&self) -> usize {
        1 + self.body.iter().chain(&self.else_body).map(SketchNode::levels).max().unwrap_or(0)
    }

    fn count(&self) -> usize {
        1 + self.body.iter().chain(&self.else_body).map(SketchNode::count).sum::<usize>()
    }

    fn truncate(&self, keep: usize) -> SketchNode {
        if keep <= 1 {
            return SketchNode::new(self.construct);
        }
        SketchNode {
            construct: self.construct,
            body: self.body.iter().map(|n| n.truncate(keep - 1)).collect(),
            else_body: self.else_body.iter().map(|n| n.truncate(keep - 1)).collect(),
        }
    }
}

/// Sketch of a code: `Run` with construct nodes only.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sketch {
    pub body: Vec<SketchNode>,
}

fn abstract_body(body: &[Stmt]) -> Vec<SketchNode> {
    body.iter()
        .filter_map(|s| {
            let construct = match s {
                Stmt::Action(_) | Stmt::Blank => return None,
                Stmt::Repeat { .. } => Construct::Repeat,
                Stmt::RepeatUntil { .. } => Construct::RepeatUntil,
                Stmt::While { .. } => Construct::While,
                Stmt::If { .. } => Construct::If,
                Stmt::IfElse { .. } => Construct::IfElse,
            };
            let mut bodies = s.bodies();
            let body = bodies.next().map(|b| abstract_body(b)).unwrap_or_default();
            let else_body = bodies.next().map(|b| abstract_body(b)).unwrap_or_default();
            Some(SketchNode { construct, body, else_body })
        })
        .collect()
}

impl Sketch {
    /// The abstraction map: drops actions, counts and concrete conditions.
    pub fn of(code: &Code) -> Sketch {
        Sketch { body: abstract_body(&code.body) }
    }

    pub fn root() -> Sketch {
        Sketch::default()
    }

    pub fn validate(&self) -> Result<(), GrammarError> {
        fn nested(nodes: &[SketchNode]) -> Result<(), GrammarError> {
            for n in nodes {
                if n.construct == Construct::RepeatUntil {
                    return Err(GrammarError::RepeatUntilNotLast);
                }
                if n.construct != Construct::IfElse && !n.else_body.is_empty() {
                    return Err(GrammarError::MisplacedElse);
                }
                nested(&n.body)?;
                nested(&n.else_body)?;
            }
            Ok(())
        }
        for (i, n) in self.body.iter().enumerate() {
            if n.construct == Construct::RepeatUntil && i + 1 != self.body.len() {
                return Err(GrammarError::RepeatUntilNotLast);
            }
            if n.construct != Construct::IfElse && !n.else_body.is_empty() {
                return Err(GrammarError::MisplacedElse);
            }
            nested(&n.body)?;
            nested(&n.else_body)?;
        }
        Ok(())
    }

    /// Number of depth levels, `Run` counted as the first.
    pub fn levels(&self) -> usize {
        1 + self.body.iter().map(SketchNode::levels).max().unwrap_or(0)
    }

    /// Number of construct nodes.
    pub fn node_count(&self) -> usize {
        self.body.iter().map(SketchNode::count).sum()
    }

    /// Keeps the first `levels` depth levels (`1` keeps only `Run`).
    pub fn truncate(&self, levels: usize) -> Sketch {
        if levels <= 1 {
            return Sketch::root();
        }
        Sketch { body: self.body.iter().map(|n| n.truncate(levels - 1)).collect() }
    }

    /// Depth-truncated prefixes sharing the root, shallowest first; the last
    /// one is the sketch itself.
    pub fn substructures(&self) -> Vec<Sketch> {
        (1..=self.levels()).map(|d| self.truncate(d)).collect()
    }

    pub fn constructs(&self) -> BTreeSet<Construct> {
        fn go(nodes: &[SketchNode], out: &mut BTreeSet<Construct>) {
            for n in nodes {
                out.insert(n.construct);
                go(&n.body, out);
                go(&n.else_body, out);
            }
        }
        let mut out = BTreeSet::new();
        go(&self.body, &mut out);
        out
    }

    pub fn to_tree(&self) -> Tree<SketchLabel> {
        Tree::new(SketchLabel::Root, node_trees(&self.body, Branch::Body))
    }

    pub fn from_tree(tree: &Tree<SketchLabel>) -> Option<Sketch> {
        if tree.label != SketchLabel::Root {
            return None;
        }
        let s = Sketch { body: nodes_from_trees(&tree.children, false)? };
        s.validate().ok()?;
        Some(s)
    }

    /// Sketches one unit edit away: insert, delete or relabel a single
    /// construct node, restricted to the given constructs.
    pub fn one_hop(&self, allowed: &[Construct]) -> Vec<Sketch> {
        let tree = self.to_tree();
        let mut out = BTreeSet::new();
        let mut push = |t: Tree<SketchLabel>| {
            if let Some(s) = Sketch::from_tree(&t) {
                if s != *self && sketch_distance(self, &s) == 1 {
                    out.insert(s);
                }
            }
        };
        let n = tree.node_count();
        for target in 0..n {
            // delete
            if target + 1 != n {
                push(edit_at(&tree, target, &mut |_, _, kids, idx| {
                    let removed = kids.remove(idx);
                    for (k, c) in removed.children.into_iter().enumerate() {
                        kids.insert(idx + k, c);
                    }
                }));
            }
            for &c in allowed {
                // relabel
                if target + 1 != n {
                    push(edit_at(&tree, target, &mut |_, _, kids, idx| {
                        if let SketchLabel::Node(b, _) = kids[idx].label {
                            kids[idx].label = SketchLabel::Node(b, c);
                        }
                    }));
                }
                // insert as a child of `target`, adopting a run of its children
                let kids = subtree(&tree, target).children.len();
                for branch in [Branch::Body, Branch::Else] {
                    for from in 0..=kids {
                        for to in from..=kids {
                            let label = SketchLabel::Node(branch, c);
                            push(insert_under(&tree, target, from, to, label));
                        }
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    /// Random concrete code with this sketch; bodies get one or two actions
    /// from the domain and conditions are drawn from the domain's set.
    pub fn instantiate(&self, domain: Domain, rng: &mut Rng) -> Code {
        fn body(nodes: &[SketchNode], domain: Domain, rng: &mut Rng) -> Vec<Stmt> {
            let mut out = Vec::new();
            let actions = domain.actions();
            let pad = |out: &mut Vec<Stmt>, rng: &mut Rng, min: usize| {
                for _ in 0..rng.gen_range(min..=min + 1) {
                    out.push(Stmt::Action(*actions.choose(rng).unwrap()));
                }
            };
            if nodes.is_empty() {
                pad(&mut out, rng, 1);
                return out;
            }
            for n in nodes {
                if rng.gen_bool(0.3) {
                    pad(&mut out, rng, 1);
                }
                let cond = *domain.conditions().choose(rng).unwrap();
                let inner = body(&n.body, domain, rng);
                out.push(match n.construct {
                    Construct::Repeat => Stmt::Repeat { count: rng.gen_range(2..=5), body: inner },
                    Construct::RepeatUntil => Stmt::RepeatUntil { body: inner },
                    Construct::While => Stmt::While { cond, body: inner },
                    Construct::If => Stmt::If { cond, body: inner },
                    Construct::IfElse => Stmt::IfElse {
                        cond,
                        then_body: inner,
                        else_body: body(&n.else_body, domain, rng),
                    },
                });
            }
            out
        }
        Code { body: body(&self.body, domain, rng) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SketchLabel {
    Root,
    Node(Branch, Construct),
}

fn node_trees(nodes: &[SketchNode], branch: Branch) -> Vec<Tree<SketchLabel>> {
    nodes
        .iter()
        .map(|n| {
            let mut kids = node_trees(&n.body, Branch::Body);
            kids.extend(node_trees(&n.else_body, Branch::Else));
            Tree::new(SketchLabel::Node(branch, n.construct), kids)
        })
        .collect()
}

fn nodes_from_trees(trees: &[Tree<SketchLabel>], else_ok: bool) -> Option<Vec<SketchNode>> {
    trees
        .iter()
        .map(|t| match t.label {
            SketchLabel::Root => None,
            SketchLabel::Node(Branch::Else, _) if !else_ok => None,
            SketchLabel::Node(_, construct) => {
                let split = t
                    .children
                    .iter()
                    .position(|c| matches!(c.label, SketchLabel::Node(Branch::Else, _)))
                    .unwrap_or(t.children.len());
                if split < t.children.len() && construct != Construct::IfElse {
                    return None;
                }
                let body = nodes_from_trees(&t.children[..split], false)?;
                let rest = &t.children[split..];
                if rest.iter().any(|c| !matches!(c.label, SketchLabel::Node(Branch::Else, _))) {
                    return None;
                }
                let else_body = nodes_from_trees(rest, true)?;
                Some(SketchNode { construct, body, else_body })
            }
        })
        .collect()
}

fn subtree<L>(t: &Tree<L>, post: usize) -> &Tree<L> {
    fn go<'a, L>(t: &'a Tree<L>, post: usize, next: &mut usize) -> Option<&'a Tree<L>> {
        for c in &t.children {
            if let Some(found) = go(c, post, next) {
                return Some(found);
            }
        }
        let me = *next;
        *next += 1;
        (me == post).then_some(t)
    }
    go(t, post, &mut 0).expect("post-order index in range")
}

/// Clones `t` and applies `f(parent, node_label, parent_children, index)` at
/// the node with post-order index `post`; `post` must not be the root.
fn edit_at<L: Clone>(
    t: &Tree<L>,
    post: usize,
    f: &mut dyn FnMut(&L, &L, &mut Vec<Tree<L>>, usize),
) -> Tree<L> {
    fn go<L: Clone>(
        t: &mut Tree<L>,
        post: usize,
        next: &mut usize,
        f: &mut dyn FnMut(&L, &L, &mut Vec<Tree<L>>, usize),
    ) -> bool {
        let mut i = 0;
        while i < t.children.len() {
            let before = *next;
            let size = t.children[i].node_count();
            if post < before + size {
                if post == before + size - 1 {
                    let label = t.children[i].label.clone();
                    let parent = t.label.clone();
                    f(&parent, &label, &mut t.children, i);
                    return true;
                }
                return go(&mut t.children[i], post, next, f);
            }
            *next += size;
            i += 1;
        }
        false
    }
    let mut out = t.clone();
    go(&mut out, post, &mut 0, f);
    out
}

fn insert_under(
    t: &Tree<SketchLabel>,
    parent: usize,
    from: usize,
    to: usize,
    label: SketchLabel,
) -> Tree<SketchLabel> {
    let wrap = |kids: &mut Vec<Tree<SketchLabel>>| {
        let adopted: Vec<_> = kids.drain(from..to).collect();
        kids.insert(from, Tree::new(label, adopted));
    };
    if parent + 1 == t.node_count() {
        let mut out = t.clone();
        wrap(&mut out.children);
        return out;
    }
    edit_at(t, parent, &mut |_, _, kids, idx| wrap(&mut kids[idx].children))
}

pub fn sketch_distance(a: &Sketch, b: &Sketch) -> usize {
    ted::distance(&a.to_tree(), &b.to_tree())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{parse_code, parse_sketch, serialize_sketch};
    use alloc::string::String;

    fn s(x: &str) -> Sketch {
        parse_sketch(x).unwrap()
    }

    const C_STAR: &str =
        "Run{RepeatUntil(goal){IfElse(pathAhead){move}{IfElse(pathLeft){turnLeft}{turnRight}}}}";

    #[test]
    fn actions_only_collapse() {
        assert_eq!(Sketch::of(&parse_code("Run{move; turnLeft}").unwrap()), Sketch::root());
    }

    #[test]
    fn maze_sketch() {
        let sk = Sketch::of(&parse_code(C_STAR).unwrap());
        assert_eq!(sk, s("{Run{RepeatUntil(goal){IfElse(B){}{IfElse(B)}}}}"));
        assert_eq!(serialize_sketch(&sk), "Run{RepeatUntil(goal){IfElse(B){}{IfElse(B)}}}");
    }

    #[test]
    fn while_sketch() {
        let sk = Sketch::of(&parse_code("Run{While(markersPresent){pickMarker; move}}").unwrap());
        assert_eq!(sk, s("Run{While(B)}"));
    }

    #[test]
    fn distances() {
        let x = s("Run{RepeatUntil(goal){While(B)}}");
        assert_eq!(sketch_distance(&x, &x), 0);
        assert_eq!(sketch_distance(&Sketch::root(), &s("Run{RepeatUntil(goal)}")), 1);
        assert_eq!(sketch_distance(&x, &s("Run{RepeatUntil(goal){IfElse(B)}}")), 1);
    }

    #[test]
    fn maze_substructures() {
        let sk = Sketch::of(&parse_code(C_STAR).unwrap());
        let subs: Vec<String> = sk.substructures().iter().map(serialize_sketch).collect();
        assert_eq!(
            subs,
            [
                "Run{}",
                "Run{RepeatUntil(goal)}",
                "Run{RepeatUntil(goal){IfElse(B)}}",
                "Run{RepeatUntil(goal){IfElse(B){}{IfElse(B)}}}",
            ]
        );
    }

    #[test]
    fn small_substructures() {
        assert_eq!(Sketch::root().substructures(), [Sketch::root()]);
        let subs = s("Run{While(B){If(B)}}").substructures();
        assert_eq!(subs, [Sketch::root(), s("Run{While(B)}"), s("Run{While(B){If(B)}}")]);
    }

    #[test]
    fn one_hop_neighbours_are_at_distance_one() {
        let base = s("Run{RepeatUntil(goal){IfElse(B){}{If(B)}}}");
        let hops = base.one_hop(&Construct::ALL);
        assert!(!hops.is_empty());
        for h in &hops {
            assert_eq!(sketch_distance(&base, h), 1, "{h}");
        }
        assert!(hops.contains(&s("Run{RepeatUntil(goal){IfElse(B){}{IfElse(B)}}}")));
        assert!(hops.contains(&s("Run{RepeatUntil(goal){IfElse(B)}}")));
        let from_root = Sketch::root().one_hop(&[Construct::Repeat, Construct::RepeatUntil]);
        assert_eq!(from_root, [s("Run{Repeat(X)}"), s("Run{RepeatUntil(goal)}")]);
    }

    #[test]
    fn instantiation_keeps_sketch() {
        let mut rng = crate::rng_from(7);
        for sk in ["Run{While(B)}", "Run{RepeatUntil(goal){IfElse(B){}{IfElse(B)}}}", "Run{Repeat(X){If(B)}}"] {
            let sk = s(sk);
            for _ in 0..20 {
                let c = sk.instantiate(Domain::Karel, &mut rng);
                assert!(c.is_valid(), "{c}");
                assert_eq!(Sketch::of(&c), sk);
            }
        }
    }
}
