//! Task synthesis: grids that a given code solves.
//!
//! The code is executed symbolically on a grid whose cells start out
//! unknown. Whenever execution depends on something not yet fixed (a cell
//! probed by a condition, the initial marker count of a cell touched for the
//! first time, whether a freshly entered HOC cell is the goal) the search
//! branches. A search state is just the list of choices taken so far and is
//! re-executed from scratch when expanded, so states are tiny and contain no
//! aliasing. Completed paths are materialized into concrete tasks and then
//! checked with the emulator.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::code::{Action, BlockType, Code, Condition, Domain, Stmt, MAX_REPEAT, MIN_REPEAT};
use crate::emulator::{self, Dir, Pose, Status, TaskSpec, DEFAULT_STEP_CAP, MAX_GRID, MAX_MARKERS, MIN_GRID};
use crate::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub domain: Domain,
    pub grid_size: usize,
    /// Iteration bound per entry of a `While` loop. `RepeatUntil` gets
    /// `max_trips * grid_size` since it drives the whole walk.
    pub max_trips: usize,
    pub wall_prob: f64,
    pub beam_width: usize,
    pub tasks_per_code: usize,
    pub min_diversity: f64,
    pub rng_seed: u64,
    /// Reject tasks that a code two or more blocks shorter also solves.
    pub check_minimality: bool,
}

impl SynthParams {
    pub fn new(domain: Domain) -> Self {
        SynthParams {
            domain,
            grid_size: match domain {
                Domain::Hoc => 8,
                Domain::Karel => 10,
            },
            max_trips: 8,
            wall_prob: 0.3,
            beam_width: 200,
            tasks_per_code: 10,
            min_diversity: 0.2,
            rng_seed: 0,
            check_minimality: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthesis parameters: {0}")]
    InvalidParams(&'static str),
    #[error("code is not valid")]
    InvalidCode,
    #[error("search found no task the code solves")]
    NoTasks,
}

const RESTARTS: usize = 12;
/// Pops per restart, as a multiple of the beam width.
const EXPANSION_FACTOR: usize = 4;
/// Completed paths kept per restart so that start poses vary.
const COMPLETIONS_PER_RESTART: usize = 6;
/// Initial marker counts tried when a cell is first touched.
const MARKER_CHOICES: [u8; 4] = [0, 1, 2, 3];
/// Largest code size the optional minimality check handles.
const MINIMALITY_MAX_SIZE: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    Unknown,
    Free,
    Wall,
}

enum Halt {
    /// HOC goal reached.
    Goal,
    Dead,
    /// Next choice needed, with this many options.
    Branch(usize),
}

/// Symbolic world driven by a fixed choice list.
struct Sym<'a> {
    domain: Domain,
    n: usize,
    cells: Vec<Cell>,
    /// Karel initial marker counts, fixed on first touch.
    initial: Vec<Option<u8>>,
    markers: Vec<u8>,
    pose: Pose,
    /// Cells the agent has stood on; none of them may become the goal.
    landed: Vec<bool>,
    choices: &'a [u8],
    cursor: usize,
    steps: usize,
    fuel: usize,
    max_trips: usize,
    moves: usize,
    turns: usize,
    segments: usize,
    last_move: bool,
    covered: Vec<bool>,
    outcomes: BTreeMap<usize, (bool, bool)>,
}

impl<'a> Sym<'a> {
    fn new(code: &Code, params: &SynthParams, start: Pose, choices: &'a [u8]) -> Self {
        let n = params.grid_size;
        let mut cells = vec![Cell::Unknown; n * n];
        let mut landed = vec![false; n * n];
        cells[start.row * n + start.col] = Cell::Free;
        landed[start.row * n + start.col] = true;
        Sym {
            domain: params.domain,
            n,
            cells,
            initial: vec![None; n * n],
            markers: vec![0; n * n],
            pose: start,
            landed,
            choices,
            cursor: 0,
            steps: 0,
            fuel: DEFAULT_STEP_CAP * 4 + 64,
            max_trips: params.max_trips,
            moves: 0,
            turns: 0,
            segments: 0,
            last_move: false,
            covered: vec![false; code.size()],
            outcomes: BTreeMap::new(),
        }
    }

    fn choose(&mut self, options: usize) -> Result<usize, Halt> {
        match self.choices.get(self.cursor) {
            Some(&c) => {
                self.cursor += 1;
                Ok(c as usize)
            }
            None => Err(Halt::Branch(options)),
        }
    }

    fn burn(&mut self) -> Result<(), Halt> {
        if self.fuel == 0 {
            return Err(Halt::Dead);
        }
        self.fuel -= 1;
        Ok(())
    }

    fn idx(&self, (r, c): (usize, usize)) -> usize {
        r * self.n + c
    }

    /// Whether the neighbour in direction `d` is free, fixing it if unknown.
    fn path(&mut self, d: Dir) -> Result<bool, Halt> {
        let Some(cell) = self.pose.step(d, self.n) else {
            return Ok(false);
        };
        let i = self.idx(cell);
        match self.cells[i] {
            Cell::Free => Ok(true),
            Cell::Wall => Ok(false),
            Cell::Unknown => {
                let free = self.choose(2)? == 0;
                self.cells[i] = if free { Cell::Free } else { Cell::Wall };
                Ok(free)
            }
        }
    }

    fn touch_markers(&mut self, allowed: &[u8]) -> Result<usize, Halt> {
        let i = self.idx(self.pose.cell());
        if self.initial[i].is_none() {
            let k = allowed[self.choose(allowed.len())?];
            self.initial[i] = Some(k);
            self.markers[i] = k;
        }
        Ok(i)
    }

    fn eval(&mut self, cond: Condition) -> Result<bool, Halt> {
        let dir = self.pose.dir;
        match cond {
            Condition::PathAhead => self.path(dir),
            Condition::NoPathAhead => self.path(dir).map(|b| !b),
            Condition::PathLeft => self.path(dir.left()),
            Condition::PathRight => self.path(dir.right()),
            Condition::MarkersPresent | Condition::NoMarkersPresent => {
                if self.domain != Domain::Karel {
                    return Err(Halt::Dead);
                }
                let i = self.touch_markers(&MARKER_CHOICES)?;
                Ok((self.markers[i] > 0) == (cond == Condition::MarkersPresent))
            }
        }
    }

    fn test(&mut self, id: usize, cond: Condition) -> Result<bool, Halt> {
        self.burn()?;
        let v = self.eval(cond)?;
        let e = self.outcomes.entry(id).or_insert((false, false));
        if v {
            e.1 = true;
        } else {
            e.0 = true;
        }
        Ok(v)
    }

    fn act(&mut self, a: Action) -> Result<(), Halt> {
        if self.steps >= DEFAULT_STEP_CAP {
            return Err(Halt::Dead);
        }
        self.steps += 1;
        let is_move = a == Action::Move;
        if is_move && !self.last_move {
            self.segments += 1;
        }
        self.last_move = is_move;
        match a {
            Action::Move => {
                if !self.path(self.pose.dir)? {
                    return Err(Halt::Dead);
                }
                let cell = self.pose.step(self.pose.dir, self.n).expect("free implies inside");
                self.pose.row = cell.0;
                self.pose.col = cell.1;
                self.moves += 1;
                let i = self.idx(cell);
                if self.domain == Domain::Hoc && !self.landed[i] && self.choose(2)? == 1 {
                    return Err(Halt::Goal);
                }
                self.landed[i] = true;
            }
            Action::TurnLeft => {
                self.pose.dir = self.pose.dir.left();
                self.turns += 1;
            }
            Action::TurnRight => {
                self.pose.dir = self.pose.dir.right();
                self.turns += 1;
            }
            Action::PickMarker | Action::PutMarker if self.domain != Domain::Karel => {
                return Err(Halt::Dead);
            }
            Action::PickMarker => {
                let i = self.touch_markers(&MARKER_CHOICES[1..])?;
                if self.markers[i] == 0 {
                    return Err(Halt::Dead);
                }
                self.markers[i] -= 1;
            }
            Action::PutMarker => {
                let i = self.touch_markers(&MARKER_CHOICES[..2])?;
                if self.markers[i] >= MAX_MARKERS {
                    return Err(Halt::Dead);
                }
                self.markers[i] += 1;
            }
        }
        Ok(())
    }

    fn block(&mut self, body: &[Stmt], first: usize) -> Result<(), Halt> {
        let mut id = first;
        for s in body {
            self.stmt(s, id)?;
            id += s.node_count();
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt, id: usize) -> Result<(), Halt> {
        self.covered[id] = true;
        match s {
            Stmt::Action(a) => self.act(*a),
            Stmt::Blank => Err(Halt::Dead),
            Stmt::Repeat { count, body } => {
                for _ in 0..*count {
                    self.burn()?;
                    self.block(body, id + 1)?;
                }
                Ok(())
            }
            Stmt::RepeatUntil { body } => {
                // Reaching the goal ends the run inside `act`, so the guard is
                // only ever false here.
                for _ in 0..self.max_trips * self.n {
                    self.burn()?;
                    self.block(body, id + 1)?;
                }
                Err(Halt::Dead)
            }
            Stmt::While { cond, body } => {
                let mut trips = 0;
                while self.test(id, *cond)? {
                    trips += 1;
                    if trips > self.max_trips {
                        return Err(Halt::Dead);
                    }
                    self.block(body, id + 1)?;
                }
                Ok(())
            }
            Stmt::If { cond, body } => {
                if self.test(id, *cond)? {
                    self.block(body, id + 1)?;
                }
                Ok(())
            }
            Stmt::IfElse { cond, then_body, else_body } => {
                if self.test(id, *cond)? {
                    self.block(then_body, id + 1)
                } else {
                    let skip: usize = then_body.iter().map(Stmt::node_count).sum();
                    self.block(else_body, id + 1 + skip)
                }
            }
        }
    }

    fn partial_quality(&self) -> f64 {
        let coverage = if self.covered.is_empty() {
            1.0
        } else {
            self.covered.iter().filter(|c| **c).count() as f64 / self.covered.len() as f64
        };
        score_terms(self.n, self.moves, self.turns, self.segments, coverage)
    }
}

fn score_terms(n: usize, moves: usize, turns: usize, segments: usize, coverage: f64) -> f64 {
    let n_f = n as f64;
    let half = (n_f / 2.0).max(1.0);
    let m = (moves.min(2 * n)) as f64 / (2.0 * n_f);
    let t = (turns.min(n)) as f64 / n_f;
    let s = (segments as f64).min(half) / half;
    (m + t + s + coverage.clamp(0.0, 1.0)) / 4.0
}

/// Trace-based quality of `task` for `code`, in `[0, 1]`. Tasks the code
/// cannot run on score 0.
pub fn quality_score(task: &TaskSpec, code: &Code) -> f64 {
    match emulator::run(code, task, DEFAULT_STEP_CAP) {
        Ok(r) => score_terms(task.size, r.moves(), r.turns(), r.segments(), r.block_coverage),
        Err(_) => 0.0,
    }
}

/// Fraction of cells whose contents differ; grids of different size are
/// maximally dissimilar.
pub fn dissimilarity(a: &TaskSpec, b: &TaskSpec) -> f64 {
    if a.size != b.size || a.domain != b.domain {
        return 1.0;
    }
    let n = a.size;
    let token = |t: &TaskSpec, i: usize| {
        let cell = (i / n, i % n);
        (
            t.walls[i],
            t.goal == Some(cell),
            (t.start.cell() == cell).then_some(t.start.dir),
            t.pre_markers.get(i).copied(),
            t.post_markers.get(i).copied(),
        )
    };
    let differ = (0..n * n).filter(|&i| token(a, i) != token(b, i)).count();
    differ as f64 / (n * n) as f64
}

/// Greedy pick by descending quality, skipping tasks closer than `d_min` to
/// anything already picked.
pub fn select_diverse(candidates: &[(TaskSpec, f64)], m: usize, d_min: f64) -> Vec<(TaskSpec, f64)> {
    let mut order: Vec<&(TaskSpec, f64)> = candidates.iter().collect();
    order.sort_by(|x, y| y.1.total_cmp(&x.1));
    let mut out: Vec<(TaskSpec, f64)> = Vec::new();
    for c in order {
        if out.len() >= m {
            break;
        }
        if out.iter().all(|(t, _)| dissimilarity(t, &c.0) >= d_min) {
            out.push(c.clone());
        }
    }
    out
}

struct Frontier {
    items: Vec<(f64, Vec<u8>)>,
    width: usize,
}

impl Frontier {
    fn push(&mut self, score: f64, choices: Vec<u8>) {
        self.items.push((score, choices));
        if self.items.len() > self.width {
            let worst = (0..self.items.len())
                .min_by(|&a, &b| self.items[a].0.total_cmp(&self.items[b].0))
                .expect("non-empty");
            self.items.swap_remove(worst);
        }
    }

    fn pop(&mut self) -> Option<Vec<u8>> {
        let best = (0..self.items.len()).max_by(|&a, &b| self.items[a].0.total_cmp(&self.items[b].0))?;
        Some(self.items.swap_remove(best).1)
    }
}

fn store_for(code: &Code, domain: Domain) -> BTreeSet<BlockType> {
    let mut store = code.metrics().blocks;
    store.extend(domain.actions().iter().map(|a| BlockType::from(*a)));
    store
}

fn materialize(code: &Code, params: &SynthParams, start: Pose, sym: &Sym<'_>, goal: Option<(usize, usize)>, rng: &mut Rng) -> TaskSpec {
    let walls = sym
        .cells
        .iter()
        .map(|c| match c {
            Cell::Free => false,
            Cell::Wall => true,
            Cell::Unknown => rng.gen_bool(params.wall_prob.clamp(0.0, 1.0)),
        })
        .collect();
    let karel = params.domain == Domain::Karel;
    TaskSpec {
        domain: params.domain,
        size: params.grid_size,
        walls,
        start,
        goal,
        pre_markers: if karel { sym.initial.iter().map(|k| k.unwrap_or(0)).collect() } else { Vec::new() },
        post_markers: if karel { sym.markers.clone() } else { Vec::new() },
        post_pose: karel.then_some(sym.pose),
        store: store_for(code, params.domain),
        size_threshold: code.size(),
    }
}

/// Whether a quiz built on this run would be meaningful.
fn non_trivial(code: &Code, task: &TaskSpec, r: &emulator::ExecutionResult) -> bool {
    let mut has_if = false;
    code.visit(&mut |s| has_if |= matches!(s, Stmt::If { .. } | Stmt::IfElse { .. }));
    if has_if {
        let mut id = 0;
        let mut both = false;
        code.visit(&mut |s| {
            if matches!(s, Stmt::If { .. } | Stmt::IfElse { .. }) {
                both |= r.branch_outcomes.get(&id) == Some(&(true, true));
            }
            id += 1;
        });
        if !both {
            return false;
        }
    }
    match task.domain {
        Domain::Hoc => true,
        Domain::Karel => task.pre_markers != task.post_markers || task.post_pose != Some(task.start),
    }
}

/// All validated tasks found by the search, before diversity selection.
pub fn candidate_tasks(code: &Code, params: &SynthParams) -> Result<Vec<(TaskSpec, f64)>, SynthError> {
    let n = params.grid_size;
    if !(MIN_GRID..=MAX_GRID).contains(&n) {
        return Err(SynthError::InvalidParams("grid size outside 2..=16"));
    }
    if params.tasks_per_code == 0 || params.beam_width == 0 {
        return Err(SynthError::InvalidParams("tasks_per_code and beam_width must be positive"));
    }
    if !code.is_valid() {
        return Err(SynthError::InvalidCode);
    }
    let mut rng = crate::rng_from(params.rng_seed);
    let mut seen: BTreeSet<TaskSpec> = BTreeSet::new();
    let mut out = Vec::new();
    for _ in 0..RESTARTS {
        let start = Pose::new(rng.gen_range(0..n), rng.gen_range(0..n), Dir::ALL[rng.gen_range(0..4)]);
        let mut frontier = Frontier { items: vec![(0.0, Vec::new())], width: params.beam_width };
        let mut done = 0;
        for _ in 0..params.beam_width * EXPANSION_FACTOR {
            let Some(choices) = frontier.pop() else { break };
            let mut sym = Sym::new(code, params, start, &choices);
            let halt = sym.block(&code.body, 0);
            let goal = match halt {
                Err(Halt::Branch(k)) => {
                    let q = sym.partial_quality();
                    for opt in 0..k {
                        let mut next = choices.clone();
                        next.push(opt as u8);
                        frontier.push(q + rng.gen::<f64>() * 0.05, next);
                    }
                    continue;
                }
                Err(Halt::Dead) => continue,
                Err(Halt::Goal) => Some(sym.pose.cell()),
                Ok(()) if params.domain == Domain::Karel => None,
                Ok(()) => continue,
            };
            let task = materialize(code, params, start, &sym, goal, &mut rng);
            if seen.contains(&task) || task.validate().is_err() {
                continue;
            }
            let Ok(r) = emulator::run(code, &task, DEFAULT_STEP_CAP) else { continue };
            if r.status != Status::Success || !non_trivial(code, &task, &r) {
                continue;
            }
            if params.check_minimality && solved_by_shorter(code, &task) {
                continue;
            }
            let q = score_terms(n, r.moves(), r.turns(), r.segments(), r.block_coverage);
            seen.insert(task.clone());
            out.push((task, q));
            done += 1;
            if done >= COMPLETIONS_PER_RESTART {
                break;
            }
        }
    }
    Ok(out)
}

/// Up to `tasks_per_code` diverse tasks solved by `code`, best first.
pub fn synthesize_tasks(code: &Code, params: &SynthParams) -> Result<Vec<(TaskSpec, f64)>, SynthError> {
    let all = candidate_tasks(code, params)?;
    let picked = select_diverse(&all, params.tasks_per_code, params.min_diversity);
    if picked.is_empty() {
        return Err(SynthError::NoTasks);
    }
    Ok(picked)
}

fn solved_by_shorter(code: &Code, task: &TaskSpec) -> bool {
    let size = code.size();
    if size > MINIMALITY_MAX_SIZE || size < 3 {
        return false;
    }
    let conds = task.domain.conditions();
    (1..=size - 2).any(|k| {
        codes_of_size(k, &task.store, conds)
            .into_iter()
            .any(|body| emulator::check_solves(&Code { body }, task))
    })
}

/// Every grammar-valid statement list of exactly `size` blocks over `store`.
pub fn codes_of_size(size: usize, store: &BTreeSet<BlockType>, conds: &[Condition]) -> Vec<Vec<Stmt>> {
    lists(size, store, conds, true)
}

fn lists(size: usize, store: &BTreeSet<BlockType>, conds: &[Condition], top: bool) -> Vec<Vec<Stmt>> {
    let mut out = Vec::new();
    for k in 1..=size {
        let rest: Vec<Vec<Stmt>> =
            if k == size { vec![Vec::new()] } else { lists(size - k, store, conds, top) };
        for s in stmts(k, store, conds, top && k == size) {
            for tail in &rest {
                let mut v = vec![s.clone()];
                v.extend(tail.iter().cloned());
                out.push(v);
            }
        }
    }
    out
}

fn stmts(size: usize, store: &BTreeSet<BlockType>, conds: &[Condition], last_top: bool) -> Vec<Stmt> {
    let mut out = Vec::new();
    if size == 1 {
        for a in Action::ALL {
            if store.contains(&BlockType::from(a)) {
                out.push(Stmt::Action(a));
            }
        }
        return out;
    }
    let inner = |k: usize| lists(k, store, conds, false);
    let has = |b: BlockType| store.contains(&b);
    let body = inner(size - 1);
    for b in &body {
        if has(BlockType::Repeat) {
            for count in MIN_REPEAT..=MAX_REPEAT {
                out.push(Stmt::Repeat { count, body: b.clone() });
            }
        }
        if has(BlockType::RepeatUntil) && last_top {
            out.push(Stmt::RepeatUntil { body: b.clone() });
        }
        for &cond in conds {
            if has(BlockType::While) {
                out.push(Stmt::While { cond, body: b.clone() });
            }
            if has(BlockType::If) {
                out.push(Stmt::If { cond, body: b.clone() });
            }
        }
    }
    if has(BlockType::IfElse) {
        for t in 1..size - 1 {
            let thens = inner(t);
            let elses = inner(size - 1 - t);
            for &cond in conds {
                for a in &thens {
                    for b in &elses {
                        out.push(Stmt::IfElse { cond, then_body: a.clone(), else_body: b.clone() });
                    }
                }
            }
        }
    }
    out
}
