//! Tree edit distance against an exhaustive edit-script search, and the
//! metric axioms on random codes and sketches.

mod common;

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::hash::Hash;

use common::*;
use proptest::prelude::*;
use pquiz_core::code::code_distance;
use pquiz_core::sketch::sketch_distance;
use pquiz_core::ted::{self, Tree};
use pquiz_core::{Domain, Sketch};

fn nodes<L: Clone>(t: &Tree<L>) -> usize {
    1 + t.children.iter().map(nodes).sum::<usize>()
}

/// Every tree one edit away from `t` over `alphabet`, capped at `max` nodes.
/// The root is never touched.
fn neighbours<L: Clone + Eq>(t: &Tree<L>, alphabet: &[L], max: usize) -> Vec<Tree<L>> {
    let mut out = Vec::new();
    let size = nodes(t);
    // edits on the children list of the root of `t`, then recurse
    for i in 0..t.children.len() {
        // delete child i, splicing its children
        let mut d = t.clone();
        let removed = d.children.remove(i);
        for (k, c) in removed.children.into_iter().enumerate() {
            d.children.insert(i + k, c);
        }
        out.push(d);
        for l in alphabet {
            if *l != t.children[i].label {
                let mut r = t.clone();
                r.children[i].label = l.clone();
                out.push(r);
            }
        }
        for sub in neighbours(&t.children[i], alphabet, max.saturating_sub(size - nodes(&t.children[i]))) {
            let mut r = t.clone();
            r.children[i] = sub;
            out.push(r);
        }
    }
    if size < max {
        let k = t.children.len();
        for from in 0..=k {
            for to in from..=k {
                for l in alphabet {
                    let mut r = t.clone();
                    let adopted: Vec<Tree<L>> = r.children.drain(from..to).collect();
                    r.children.insert(from, Tree::new(l.clone(), adopted));
                    out.push(r);
                }
            }
        }
    }
    out
}

fn labels<L: Clone + Ord>(t: &Tree<L>, out: &mut BTreeSet<L>) {
    out.insert(t.label.clone());
    for c in &t.children {
        labels(c, out);
    }
}

/// Length of the shortest edit sequence, by breadth-first search. Deletions
/// can always be done before insertions, so intermediate trees never need
/// more nodes than the larger input.
fn brute_force<L: Clone + Ord + Hash>(a: &Tree<L>, b: &Tree<L>) -> usize {
    let mut alpha = BTreeSet::new();
    labels(a, &mut alpha);
    labels(b, &mut alpha);
    alpha.remove(&a.label);
    let alphabet: Vec<L> = alpha.into_iter().collect();
    let max = nodes(a).max(nodes(b));
    let mut seen: HashSet<Tree<L>> = HashSet::new();
    let mut queue = VecDeque::from([(a.clone(), 0usize)]);
    seen.insert(a.clone());
    while let Some((t, d)) = queue.pop_front() {
        if t == *b {
            return d;
        }
        for n in neighbours(&t, &alphabet, max) {
            if seen.insert(n.clone()) {
                queue.push_back((n, d + 1));
            }
        }
    }
    unreachable!("b is always reachable")
}

#[test]
fn textbook_trees() {
    // f(d(a, c(b)), e) vs f(c(d(a, b)), e)
    let l = |s: &'static str| Tree::leaf(s);
    let n = |s: &'static str, c: Vec<Tree<&'static str>>| Tree::new(s, c);
    let a = n("f", vec![n("d", vec![l("a"), n("c", vec![l("b")])]), l("e")]);
    let b = n("f", vec![n("c", vec![n("d", vec![l("a"), l("b")])]), l("e")]);
    assert_eq!(ted::distance(&a, &b), 2);
    assert_eq!(brute_force(&a, &b), 2);
}

#[test]
fn small_code_pairs_match_brute_force() {
    let mut rng = rng(0x5eed);
    let mut checked = 0;
    while checked < 300 {
        let dom = if checked % 2 == 0 { Domain::Hoc } else { Domain::Karel };
        let a = random_code(&mut rng, dom, 3);
        let b = random_code(&mut rng, dom, 3);
        let (ta, tb) = (a.to_tree(), b.to_tree());
        if nodes(&ta) > 4 || nodes(&tb) > 4 {
            continue;
        }
        assert_eq!(code_distance(&a, &b), brute_force(&ta, &tb), "{a} vs {b}");
        checked += 1;
    }
}

#[test]
fn small_sketch_pairs_match_brute_force() {
    let mut rng = rng(77);
    let mut checked = 0;
    while checked < 300 {
        let a = Sketch::of(&random_code(&mut rng, Domain::Karel, 8));
        let b = Sketch::of(&random_code(&mut rng, Domain::Hoc, 8));
        let (ta, tb) = (a.to_tree(), b.to_tree());
        if nodes(&ta) > 4 || nodes(&tb) > 4 {
            continue;
        }
        assert_eq!(sketch_distance(&a, &b), brute_force(&ta, &tb), "{a} vs {b}");
        checked += 1;
    }
}

#[test]
fn spec_distance_examples() {
    assert_eq!(code_distance(&code("Run{move}"), &code("Run{move; turnLeft}")), 1);
    let s = |x: &str| pquiz_core::text::parse_sketch(x).unwrap();
    assert_eq!(sketch_distance(&Sketch::root(), &s("Run{RepeatUntil(goal)}")), 1);
    assert_eq!(
        sketch_distance(&s("Run{RepeatUntil(goal){While(B)}}"), &s("Run{RepeatUntil(goal){IfElse(B)}}")),
        1
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn code_distance_is_a_metric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dom = if seed % 2 == 0 { Domain::Hoc } else { Domain::Karel };
        let a = random_code(&mut r, dom, 10);
        let b = random_code(&mut r, dom, 10);
        let c = random_code(&mut r, dom, 10);
        let ab = code_distance(&a, &b);
        prop_assert_eq!(code_distance(&a, &a), 0);
        prop_assert_eq!(ab, code_distance(&b, &a));
        prop_assert_eq!(ab == 0, a == b);
        prop_assert!(code_distance(&a, &c) <= ab + code_distance(&b, &c));
    }

    #[test]
    fn sketch_distance_is_a_metric(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = Sketch::of(&random_code(&mut r, Domain::Karel, 12));
        let b = Sketch::of(&random_code(&mut r, Domain::Hoc, 12));
        let c = Sketch::of(&random_code(&mut r, Domain::Karel, 12));
        let ab = sketch_distance(&a, &b);
        prop_assert_eq!(sketch_distance(&a, &a), 0);
        prop_assert_eq!(ab, sketch_distance(&b, &a));
        prop_assert_eq!(ab == 0, a == b);
        prop_assert!(sketch_distance(&a, &c) <= ab + sketch_distance(&b, &c));
    }

    #[test]
    fn edit_script_cost_is_distance(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = random_code(&mut r, Domain::Karel, 10).to_tree();
        let b = random_code(&mut r, Domain::Karel, 10).to_tree();
        let script = ted::edit_script(&a, &b);
        prop_assert_eq!(script.cost(), ted::distance(&a, &b));
    }
}
