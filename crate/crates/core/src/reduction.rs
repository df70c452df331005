//! Reductions of a code that preserve a given substructure sketch.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec::Vec;

use crate::code::{Code, Stmt};
use crate::sketch::Sketch;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReductionError {
    #[error("target sketch is not a substructure of the code's sketch")]
    InvalidTarget,
}

/// Every statement list reachable from `body` by one removal: drop an
/// action, drop a construct with its subtree, or replace a construct by one
/// of its bodies.
fn single_removals(body: &[Stmt]) -> Vec<Vec<Stmt>> {
    let mut out = Vec::new();
    for (i, s) in body.iter().enumerate() {
        let without = || {
            let mut v = body.to_vec();
            v.remove(i);
            v
        };
        out.push(without());
        for inner in s.bodies() {
            if !s.is_construct() {
                break;
            }
            let mut v = without();
            for (k, stmt) in inner.iter().enumerate() {
                v.insert(i + k, stmt.clone());
            }
            out.push(v);
        }
        // removals strictly inside this statement
        let bodies: Vec<&Vec<Stmt>> = s.bodies().collect();
        for (bi, inner) in bodies.iter().enumerate() {
            for reduced in single_removals(inner) {
                let mut replaced = s.clone();
                if let Some(slot) = replaced.bodies_mut().nth(bi) {
                    *slot = reduced;
                }
                let mut v = body.to_vec();
                v[i] = replaced;
                out.push(v);
            }
        }
    }
    out
}

/// All valid codes obtained from `code` by removing one or more nodes whose
/// sketch equals `target`. The code itself is never included.
pub fn red_codes(code: &Code, target: &Sketch) -> Result<BTreeSet<Code>, ReductionError> {
    let own = Sketch::of(code);
    if !own.substructures().contains(target) {
        return Err(ReductionError::InvalidTarget);
    }
    let needed = target.node_count();
    let mut seen: BTreeSet<Code> = BTreeSet::new();
    let mut queue: VecDeque<Code> = VecDeque::new();
    let mut out = BTreeSet::new();
    seen.insert(code.clone());
    queue.push_back(code.clone());
    while let Some(cur) = queue.pop_front() {
        for body in single_removals(&cur.body) {
            let next = Code { body };
            if next.construct_count() < needed || seen.contains(&next) {
                continue;
            }
            seen.insert(next.clone());
            if next.is_valid() && Sketch::of(&next) == *target {
                out.insert(next.clone());
            }
            queue.push_back(next);
        }
    }
    Ok(out)
}
