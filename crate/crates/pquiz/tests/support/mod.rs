#![allow(dead_code)]

//! Generators and oracles shared by the acceptance suite.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::hash::Hash;

use pquiz_core::code::{MAX_REPEAT, MIN_REPEAT};
use pquiz_core::ted::Tree;
use pquiz_core::{Code, Dir, Domain, Pose, Rng, Stmt, TaskSpec};
use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};

pub const C_STAR: &str =
    "Run{RepeatUntil(goal){IfElse(pathAhead){move}{IfElse(pathLeft){turnLeft}{turnRight}}}}";

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn code(s: &str) -> Code {
    pquiz_core::text::parse_code(s).unwrap()
}

/// Random grammar-valid code of at most `max_size` blocks.
pub fn random_code(rng: &mut Rng, domain: Domain, max_size: usize) -> Code {
    let mut budget = rng.gen_range(1..=max_size.max(1));
    let mut body = stmts(rng, domain, &mut budget, 3);
    if domain == Domain::Hoc && budget >= 2 && rng.gen_bool(0.3) {
        budget -= 1;
        let inner = stmts(rng, domain, &mut budget, 2);
        body.push(Stmt::RepeatUntil { body: inner });
    }
    Code { body }
}

fn stmts(rng: &mut Rng, domain: Domain, budget: &mut usize, depth: usize) -> Vec<Stmt> {
    let mut out = Vec::new();
    loop {
        out.push(stmt(rng, domain, budget, depth));
        if *budget == 0 || rng.gen_bool(0.5) {
            return out;
        }
    }
}

fn stmt(rng: &mut Rng, domain: Domain, budget: &mut usize, depth: usize) -> Stmt {
    *budget = budget.saturating_sub(1);
    if *budget == 0 || depth == 0 || rng.gen_bool(0.5) {
        return Stmt::Action(*domain.actions().choose(rng).unwrap());
    }
    let cond = *domain.conditions().choose(rng).unwrap();
    let kinds: &[u8] = match domain {
        Domain::Hoc => &[0, 2, 3],
        Domain::Karel => &[0, 1, 2, 3],
    };
    match kinds.choose(rng).unwrap() {
        0 => Stmt::Repeat { count: rng.gen_range(MIN_REPEAT..=MAX_REPEAT), body: stmts(rng, domain, budget, depth - 1) },
        1 => Stmt::While { cond, body: stmts(rng, domain, budget, depth - 1) },
        2 => Stmt::If { cond, body: stmts(rng, domain, budget, depth - 1) },
        _ => {
            let then_body = stmts(rng, domain, budget, depth - 1);
            if *budget == 0 {
                return Stmt::If { cond, body: then_body };
            }
            let else_body = stmts(rng, domain, budget, depth - 1);
            Stmt::IfElse { cond, then_body, else_body }
        }
    }
}

/// Random task with scattered walls and, for Karel, random markers.
pub fn random_task(rng: &mut Rng, domain: Domain, n: usize) -> TaskSpec {
    let cells = n * n;
    let mut walls: Vec<bool> = (0..cells).map(|_| rng.gen_bool(0.25)).collect();
    let start = Pose::new(rng.gen_range(0..n), rng.gen_range(0..n), *Dir::ALL.choose(rng).unwrap());
    walls[start.row * n + start.col] = false;
    let (goal, pre, post) = match domain {
        Domain::Hoc => {
            let g = (rng.gen_range(0..n), rng.gen_range(0..n));
            walls[g.0 * n + g.1] = false;
            (Some(g), Vec::new(), Vec::new())
        }
        Domain::Karel => {
            let pre = (0..cells).map(|i| if !walls[i] && rng.gen_bool(0.3) { rng.gen_range(1..=9) } else { 0 }).collect();
            let post = (0..cells).map(|i| if walls[i] { 0 } else { rng.gen_range(0..=2) }).collect();
            (None, pre, post)
        }
    };
    let mut store = domain.full_store();
    store.insert(pquiz_core::BlockType::While);
    store.insert(pquiz_core::BlockType::RepeatUntil);
    TaskSpec {
        domain,
        size: n,
        walls,
        start,
        goal,
        pre_markers: pre,
        post_markers: post,
        post_pose: None,
        store,
        size_threshold: 64,
    }
}

pub fn nodes<L>(t: &Tree<L>) -> usize {
    1 + t.children.iter().map(nodes).sum::<usize>()
}

/// Every tree one edit away from `t`, capped at `max` nodes; the root stays.
fn neighbours<L: Clone + Eq>(t: &Tree<L>, alphabet: &[L], max: usize) -> Vec<Tree<L>> {
    let mut out = Vec::new();
    let size = nodes(t);
    for i in 0..t.children.len() {
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

/// Shortest edit sequence by breadth-first search over all trees no larger
/// than the bigger input.
pub fn brute_force<L: Clone + Ord + Hash>(a: &Tree<L>, b: &Tree<L>) -> usize {
    let mut alpha = BTreeSet::new();
    labels(a, &mut alpha);
    labels(b, &mut alpha);
    alpha.remove(&a.label);
    let alphabet: Vec<L> = alpha.into_iter().collect();
    let max = nodes(a).max(nodes(b));
    let mut seen: HashSet<Tree<L>> = HashSet::from([a.clone()]);
    let mut queue = VecDeque::from([(a.clone(), 0usize)]);
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
