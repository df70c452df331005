//! Sketch-preserving code mutation.
//!
//! The construct skeleton of the seed is kept fixed. Candidates differ from
//! the seed in the action runs between constructs, in conditions (within
//! their compatibility class) and in repeat counts. Small candidate spaces
//! are enumerated exhaustively; larger ones are sampled.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::code::{self, Action, Code, Condition, Stmt, MAX_REPEAT, MIN_REPEAT};
use crate::sketch::Sketch;
use crate::Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutationParams {
    /// Allowed deviation of candidate size from the seed's size.
    pub delta_size: usize,
    /// Minimum code distance from the solution.
    pub theta_conceal: usize,
    pub max_candidates: usize,
    pub rng_seed: u64,
}

impl Default for MutationParams {
    fn default() -> Self {
        MutationParams { delta_size: 2, theta_conceal: 2, max_candidates: 64, rng_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MutationError {
    #[error("seed sketch does not match the target sketch")]
    SketchMismatch,
    #[error("no candidate satisfies the constraints")]
    NoCandidates,
}

/// Above this many candidates the space is sampled instead of enumerated.
const EXHAUSTIVE_LIMIT: u128 = 40_000;
const SAMPLES_PER_CANDIDATE: usize = 40;

#[derive(Debug, Clone)]
enum Slot {
    Gap(usize),
    Node { param: usize, shape: Shape, bodies: Vec<Vec<Slot>> },
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Repeat,
    RepeatUntil,
    While,
    If,
    IfElse,
}

#[derive(Debug, Clone)]
enum ParamChoice {
    Count,
    Cond(&'static [Condition]),
    Fixed,
}

impl ParamChoice {
    fn len(&self) -> usize {
        match self {
            ParamChoice::Count => (MAX_REPEAT - MIN_REPEAT + 1) as usize,
            ParamChoice::Cond(c) => c.len(),
            ParamChoice::Fixed => 1,
        }
    }
}

#[derive(Debug, Clone)]
struct GapRule {
    /// Body has no constructs, so this gap alone keeps it non-empty.
    min: usize,
    /// Gap after a top-level RepeatUntil.
    locked: bool,
}

/// The seed with actions punched out.
struct Template {
    root: Vec<Slot>,
    gaps: Vec<GapRule>,
    params: Vec<ParamChoice>,
    constructs: usize,
}

impl Template {
    fn of(code: &Code) -> Template {
        let mut t = Template { root: Vec::new(), gaps: Vec::new(), params: Vec::new(), constructs: 0 };
        t.root = t.body(&code.body, true);
        t
    }

    fn body(&mut self, body: &[Stmt], top: bool) -> Vec<Slot> {
        let constructs: Vec<&Stmt> = body.iter().filter(|s| s.is_construct()).collect();
        let mut out = Vec::new();
        let min = usize::from(constructs.is_empty());
        out.push(self.gap(min, false));
        for s in constructs {
            self.constructs += 1;
            let (shape, choice) = match s {
                Stmt::Repeat { .. } => (Shape::Repeat, ParamChoice::Count),
                Stmt::RepeatUntil { .. } => (Shape::RepeatUntil, ParamChoice::Fixed),
                Stmt::While { cond, .. } => (Shape::While, ParamChoice::Cond(cond.compatible())),
                Stmt::If { cond, .. } => (Shape::If, ParamChoice::Cond(cond.compatible())),
                Stmt::IfElse { cond, .. } => (Shape::IfElse, ParamChoice::Cond(cond.compatible())),
                Stmt::Action(_) | Stmt::Blank => unreachable!(),
            };
            let param = self.params.len();
            self.params.push(choice);
            let bodies = s.bodies().map(|b| self.body(b, false)).collect();
            out.push(Slot::Node { param, shape, bodies });
            let locked = top && matches!(shape, Shape::RepeatUntil);
            out.push(self.gap(0, locked));
        }
        out
    }

    fn gap(&mut self, min: usize, locked: bool) -> Slot {
        self.gaps.push(GapRule { min, locked });
        Slot::Gap(self.gaps.len() - 1)
    }

    fn min_actions(&self) -> usize {
        self.gaps.iter().map(|g| g.min).sum()
    }

    fn build(&self, gaps: &[Vec<Action>], params: &[usize]) -> Code {
        fn go(slots: &[Slot], t: &Template, gaps: &[Vec<Action>], params: &[usize]) -> Vec<Stmt> {
            let mut out = Vec::new();
            for s in slots {
                match s {
                    Slot::Gap(g) => out.extend(gaps[*g].iter().map(|a| Stmt::Action(*a))),
                    Slot::Node { param, shape, bodies } => {
                        let p = params[*param];
                        let cond = match t.params[*param] {
                            ParamChoice::Cond(c) => c[p],
                            _ => Condition::PathAhead,
                        };
                        let mut b = bodies.iter().map(|b| go(b, t, gaps, params));
                        let mut next = || b.next().unwrap_or_default();
                        out.push(match shape {
                            Shape::Repeat => Stmt::Repeat { count: MIN_REPEAT + p as u8, body: next() },
                            Shape::RepeatUntil => Stmt::RepeatUntil { body: next() },
                            Shape::While => Stmt::While { cond, body: next() },
                            Shape::If => Stmt::If { cond, body: next() },
                            Shape::IfElse => {
                                let then_body = next();
                                Stmt::IfElse { cond, then_body, else_body: next() }
                            }
                        });
                    }
                }
            }
            out
        }
        Code { body: go(&self.root, self, gaps, params) }
    }
}

/// Filters for codes that waste blocks or contain dead constructs.
pub fn is_redundant(code: &Code) -> bool {
    fn body(stmts: &[Stmt], enclosing: Option<Condition>) -> bool {
        if code::has_inverse_pair(stmts) {
            return true;
        }
        stmts.iter().any(|s| {
            if let Stmt::IfElse { then_body, else_body, .. } = s {
                if then_body == else_body {
                    return true;
                }
            }
            let cond = s.condition();
            if cond.is_some() && cond == enclosing {
                return true;
            }
            s.bodies().any(|b| body(b, cond))
        })
    }
    body(&code.body, None)
}

fn compositions(total: usize, rules: &[GapRule], out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>) {
    let i = cur.len();
    if i == rules.len() {
        if total == 0 {
            out.push(cur.clone());
        }
        return;
    }
    let rule = &rules[i];
    let max = if rule.locked { 0 } else { total };
    for k in rule.min..=max {
        if k > total {
            break;
        }
        cur.push(k);
        compositions(total - k, rules, out, cur);
        cur.pop();
    }
}

fn count_compositions(total: usize, rules: &[GapRule]) -> u128 {
    // dp over gaps
    let mut dp = vec![0u128; total + 1];
    dp[0] = 1;
    for r in rules {
        let mut next = vec![0u128; total + 1];
        for used in 0..=total {
            if dp[used] == 0 {
                continue;
            }
            let max = if r.locked { 0 } else { total - used };
            for k in r.min..=max {
                next[used + k] = next[used + k].saturating_add(dp[used]);
            }
        }
        dp = next;
    }
    dp[total]
}

struct Space<'a> {
    template: Template,
    actions: &'a [Action],
    totals: Vec<usize>,
}

impl Space<'_> {
    fn size(&self) -> u128 {
        let params: u128 = self.template.params.iter().map(|p| p.len() as u128).product();
        let k = self.actions.len() as u128;
        self.totals
            .iter()
            .map(|&a| {
                count_compositions(a, &self.template.gaps)
                    .saturating_mul(k.saturating_pow(a as u32))
                    .saturating_mul(params)
            })
            .fold(0u128, u128::saturating_add)
    }

    fn enumerate(&self, mut f: impl FnMut(Code)) {
        let params = &self.template.params;
        for &total in &self.totals {
            let mut comps = Vec::new();
            compositions(total, &self.template.gaps, &mut comps, &mut Vec::new());
            for comp in &comps {
                let mut acts = vec![0usize; total];
                loop {
                    let mut gaps = Vec::with_capacity(comp.len());
                    let mut at = 0;
                    for &len in comp {
                        gaps.push(acts[at..at + len].iter().map(|&i| self.actions[i]).collect());
                        at += len;
                    }
                    let mut ps = vec![0usize; params.len()];
                    loop {
                        f(self.template.build(&gaps, &ps));
                        if !odometer(&mut ps, |i| params[i].len()) {
                            break;
                        }
                    }
                    if !odometer(&mut acts, |_| self.actions.len()) {
                        break;
                    }
                }
            }
        }
    }

    fn sample(&self, rng: &mut Rng) -> Code {
        let rules = &self.template.gaps;
        let total = *self.totals.choose(rng).expect("non-empty band");
        let mut lens: Vec<usize> = rules.iter().map(|r| r.min).collect();
        let open: Vec<usize> = (0..rules.len()).filter(|&i| !rules[i].locked).collect();
        for _ in 0..total - self.template.min_actions() {
            lens[*open.choose(rng).expect("an unlocked gap")] += 1;
        }
        let gaps: Vec<Vec<Action>> = lens
            .iter()
            .map(|&l| (0..l).map(|_| *self.actions.choose(rng).unwrap()).collect())
            .collect();
        let ps: Vec<usize> = self.template.params.iter().map(|p| rng.gen_range(0..p.len())).collect();
        self.template.build(&gaps, &ps)
    }
}

/// Advances a mixed-radix counter; false once it wraps around.
fn odometer(digits: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for i in 0..digits.len() {
        digits[i] += 1;
        if digits[i] < radix(i) {
            return true;
        }
        digits[i] = 0;
    }
    false
}

/// Candidate codes grown from `seed`, ordered by descending distance to
/// `solution`. `actions` is the action palette available to the task.
pub fn mutate(
    seed: &Code,
    target: &Sketch,
    solution: &Code,
    actions: &[Action],
    params: &MutationParams,
) -> Result<Vec<Code>, MutationError> {
    if Sketch::of(seed) != *target {
        return Err(MutationError::SketchMismatch);
    }
    let template = Template::of(seed);
    let seed_actions = seed.size() - template.constructs;
    let lo = seed_actions.saturating_sub(params.delta_size).max(template.min_actions());
    let hi = seed_actions + params.delta_size;
    let unlocked = template.gaps.iter().any(|g| !g.locked);
    let totals: Vec<usize> = (lo..=hi).filter(|&t| unlocked || t == template.min_actions()).collect();
    if totals.is_empty() || actions.is_empty() {
        return Err(MutationError::NoCandidates);
    }
    let space = Space { template, actions, totals };
    let solution_tree = solution.to_tree();
    let mut rng = crate::rng_from(params.rng_seed);
    let mut found: BTreeSet<Code> = BTreeSet::new();
    let accept = |c: Code, found: &mut BTreeSet<Code>| {
        if found.contains(&c) || is_redundant(&c) || !c.is_valid() {
            return;
        }
        if crate::ted::distance(&c.to_tree(), &solution_tree) >= params.theta_conceal {
            found.insert(c);
        }
    };
    if space.size() <= EXHAUSTIVE_LIMIT {
        space.enumerate(|c| accept(c, &mut found));
    } else {
        let draws = params.max_candidates.max(1) * SAMPLES_PER_CANDIDATE;
        for _ in 0..draws {
            let c = space.sample(&mut rng);
            accept(c, &mut found);
        }
    }
    let mut ranked: Vec<(usize, Code)> = found
        .into_iter()
        .map(|c| (crate::ted::distance(&c.to_tree(), &solution_tree), c))
        .collect();
    ranked.shuffle(&mut rng);
    // most concealing first; among equals the smaller code is the simpler quiz
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.size().cmp(&b.1.size())));
    ranked.truncate(params.max_candidates.max(1));
    if ranked.is_empty() {
        return Err(MutationError::NoCandidates);
    }
    Ok(ranked.into_iter().map(|(_, c)| c).collect())
}
