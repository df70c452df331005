#![allow(dead_code)]

use std::collections::BTreeSet;

use pquiz_core::code::{MAX_REPEAT, MIN_REPEAT};
use pquiz_core::{Action, BlockType, Code, Condition, Dir, Domain, Pose, Rng, Stmt, TaskSpec};
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
    let target = rng.gen_range(1..=max_size.max(1));
    let mut budget = target;
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
    let action = |rng: &mut Rng| Stmt::Action(*domain.actions().choose(rng).unwrap());
    if *budget == 0 || depth == 0 || rng.gen_bool(0.5) {
        return action(rng);
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
            let pre: Vec<u8> =
                (0..cells).map(|i| if !walls[i] && rng.gen_bool(0.3) { rng.gen_range(1..=9) } else { 0 }).collect();
            let post: Vec<u8> = (0..cells).map(|i| if walls[i] { 0 } else { rng.gen_range(0..=2) }).collect();
            (None, pre, post)
        }
    };
    TaskSpec {
        domain,
        size: n,
        walls,
        start,
        goal,
        pre_markers: pre,
        post_markers: post,
        post_pose: None,
        store: domain.full_store().into_iter().chain([BlockType::While, BlockType::RepeatUntil]).collect(),
        size_threshold: 64,
    }
}

pub fn hoc_store() -> BTreeSet<BlockType> {
    Domain::Hoc.full_store()
}

pub fn all_actions() -> [Action; 5] {
    Action::ALL
}

pub fn hoc_conditions() -> &'static [Condition] {
    Domain::Hoc.conditions()
}
