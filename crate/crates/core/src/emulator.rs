//! Concrete semantics of HOC and Karel tasks.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::code::{Action, BlockType, Code, Condition, Domain, Stmt};

/// Action budget used when none is given.
pub const DEFAULT_STEP_CAP: usize = 1000;

pub const MIN_GRID: usize = 2;
pub const MAX_GRID: usize = 16;
pub const MAX_MARKERS: u8 = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dir {
    N,
    E,
    S,
    W,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::N, Dir::E, Dir::S, Dir::W];

    pub fn left(self) -> Dir {
        match self {
            Dir::N => Dir::W,
            Dir::W => Dir::S,
            Dir::S => Dir::E,
            Dir::E => Dir::N,
        }
    }

    pub fn right(self) -> Dir {
        self.left().left().left()
    }

    pub fn delta(self) -> (isize, isize) {
        match self {
            Dir::N => (-1, 0),
            Dir::E => (0, 1),
            Dir::S => (1, 0),
            Dir::W => (0, -1),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Dir::N => 'N',
            Dir::E => 'E',
            Dir::S => 'S',
            Dir::W => 'W',
        }
    }

    pub fn from_letter(c: char) -> Option<Dir> {
        Dir::ALL.into_iter().find(|d| d.letter() == c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pose {
    pub row: usize,
    pub col: usize,
    pub dir: Dir,
}

impl Pose {
    pub fn new(row: usize, col: usize, dir: Dir) -> Self {
        Pose { row, col, dir }
    }

    pub fn cell(&self) -> (usize, usize) {
        (self.row, self.col)
    }

    /// Neighbouring cell in direction `d`, if inside an `n × n` grid.
    pub fn step(&self, d: Dir, n: usize) -> Option<(usize, usize)> {
        let (dr, dc) = d.delta();
        let r = self.row.checked_add_signed(dr)?;
        let c = self.col.checked_add_signed(dc)?;
        (r < n && c < n).then_some((r, c))
    }
}

/// A visual puzzle together with its block store and size limit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskSpec {
    pub domain: Domain,
    pub size: usize,
    /// Row-major, `true` for walls.
    pub walls: Vec<bool>,
    pub start: Pose,
    /// HOC only.
    pub goal: Option<(usize, usize)>,
    /// Karel only; row-major marker counts.
    pub pre_markers: Vec<u8>,
    pub post_markers: Vec<u8>,
    pub post_pose: Option<Pose>,
    pub store: BTreeSet<BlockType>,
    pub size_threshold: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaskError {
    #[error("grid size {0} outside 2..=16")]
    GridSize(usize),
    #[error("grid has {got} cells, expected {expected}")]
    CellCount { expected: usize, got: usize },
    #[error("{0} is not on a free cell")]
    OnWall(&'static str),
    #[error("HOC task needs exactly one goal")]
    MissingGoal,
    #[error("goal only exists in HOC tasks")]
    UnexpectedGoal,
    #[error("marker count above 9")]
    TooManyMarkers,
    #[error("size threshold must be at least 1")]
    Threshold,
}

impl TaskSpec {
    pub fn index(&self, (r, c): (usize, usize)) -> usize {
        r * self.size + c
    }

    pub fn is_wall(&self, cell: (usize, usize)) -> bool {
        self.walls[self.index(cell)]
    }

    pub fn validate(&self) -> Result<(), TaskError> {
        let n = self.size;
        if !(MIN_GRID..=MAX_GRID).contains(&n) {
            return Err(TaskError::GridSize(n));
        }
        let cells = n * n;
        if self.walls.len() != cells {
            return Err(TaskError::CellCount { expected: cells, got: self.walls.len() });
        }
        let inside = |p: (usize, usize)| p.0 < n && p.1 < n;
        if !inside(self.start.cell()) || self.is_wall(self.start.cell()) {
            return Err(TaskError::OnWall("agent"));
        }
        if self.size_threshold == 0 {
            return Err(TaskError::Threshold);
        }
        match self.domain {
            Domain::Hoc => {
                let g = self.goal.ok_or(TaskError::MissingGoal)?;
                if !inside(g) || self.is_wall(g) {
                    return Err(TaskError::OnWall("goal"));
                }
            }
            Domain::Karel => {
                if self.goal.is_some() {
                    return Err(TaskError::UnexpectedGoal);
                }
                for m in [&self.pre_markers, &self.post_markers] {
                    if m.len() != cells {
                        return Err(TaskError::CellCount { expected: cells, got: m.len() });
                    }
                    for (i, &k) in m.iter().enumerate() {
                        if k > MAX_MARKERS {
                            return Err(TaskError::TooManyMarkers);
                        }
                        if k > 0 && self.walls[i] {
                            return Err(TaskError::OnWall("marker"));
                        }
                    }
                }
                if let Some(p) = self.post_pose {
                    if !inside(p.cell()) || self.is_wall(p.cell()) {
                        return Err(TaskError::OnWall("final agent"));
                    }
                }
            }
        }
        Ok(())
    }

    /// The action blocks of this task's store, in the fixed choice order.
    pub fn store_actions(&self) -> Vec<Action> {
        Action::ALL.into_iter().filter(|a| self.store.contains(&BlockType::from(*a))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Status {
    Success,
    Crash,
    Timeout,
    Incomplete,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Success => "success",
            Status::Crash => "crash",
            Status::Timeout => "timeout",
            Status::Incomplete => "incomplete",
        }
    }
}

/// One executed (or attempted) action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceStep {
    /// Agent pose before the action.
    pub pose: Pose,
    pub action: Action,
    pub crashed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionResult {
    pub status: Status,
    pub steps_used: usize,
    pub trace: Vec<TraceStep>,
    pub block_coverage: f64,
    pub visited: BTreeSet<(usize, usize)>,
    pub final_pose: Pose,
    pub final_markers: Vec<u8>,
    /// Pre-order node index of each condition-bearing construct mapped to
    /// (seen false, seen true).
    pub branch_outcomes: BTreeMap<usize, (bool, bool)>,
}

impl ExecutionResult {
    pub fn moves(&self) -> usize {
        self.trace.iter().filter(|s| !s.crashed && s.action == Action::Move).count()
    }

    pub fn turns(&self) -> usize {
        self.trace
            .iter()
            .filter(|s| !s.crashed && matches!(s.action, Action::TurnLeft | Action::TurnRight))
            .count()
    }

    /// Maximal runs of consecutive moves.
    pub fn segments(&self) -> usize {
        let mut n = 0;
        let mut prev = false;
        for s in self.trace.iter().filter(|s| !s.crashed) {
            let mv = s.action == Action::Move;
            if mv && !prev {
                n += 1;
            }
            prev = mv;
        }
        n
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunError {
    #[error("block {0} is not in the task's store")]
    StoreViolation(BlockType),
    #[error("code has {size} blocks, task allows {threshold}")]
    SizeViolation { size: usize, threshold: usize },
    #[error("code still contains a blank")]
    ContainsBlank,
}

enum Halt {
    Done(Status),
}

struct Machine<'t> {
    task: &'t TaskSpec,
    pose: Pose,
    markers: Vec<u8>,
    steps: usize,
    cap: usize,
    fuel: usize,
    trace: Vec<TraceStep>,
    visited: BTreeSet<(usize, usize)>,
    covered: Vec<bool>,
    outcomes: BTreeMap<usize, (bool, bool)>,
}

impl<'t> Machine<'t> {
    fn free(&self, cell: Option<(usize, usize)>) -> bool {
        cell.is_some_and(|c| !self.task.is_wall(c))
    }

    fn eval(&self, cond: Condition) -> bool {
        let n = self.task.size;
        let p = self.pose;
        match cond {
            Condition::PathAhead => self.free(p.step(p.dir, n)),
            Condition::NoPathAhead => !self.free(p.step(p.dir, n)),
            Condition::PathLeft => self.free(p.step(p.dir.left(), n)),
            Condition::PathRight => self.free(p.step(p.dir.right(), n)),
            Condition::MarkersPresent => self.markers[self.task.index(p.cell())] > 0,
            Condition::NoMarkersPresent => self.markers[self.task.index(p.cell())] == 0,
        }
    }

    fn at_goal(&self) -> bool {
        self.task.goal == Some(self.pose.cell())
    }

    fn burn(&mut self) -> Result<(), Halt> {
        if self.fuel == 0 {
            return Err(Halt::Done(Status::Timeout));
        }
        self.fuel -= 1;
        Ok(())
    }

    fn test(&mut self, id: usize, cond: Condition) -> Result<bool, Halt> {
        self.burn()?;
        let v = self.eval(cond);
        let e = self.outcomes.entry(id).or_insert((false, false));
        if v {
            e.1 = true;
        } else {
            e.0 = true;
        }
        Ok(v)
    }

    fn act(&mut self, a: Action) -> Result<(), Halt> {
        if self.steps >= self.cap {
            return Err(Halt::Done(Status::Timeout));
        }
        self.steps += 1;
        let before = self.pose;
        let n = self.task.size;
        let idx = self.task.index(before.cell());
        let ok = match a {
            Action::Move => match before.step(before.dir, n) {
                Some(c) if !self.task.is_wall(c) => {
                    self.pose.row = c.0;
                    self.pose.col = c.1;
                    self.visited.insert(c);
                    true
                }
                _ => false,
            },
            Action::TurnLeft => {
                self.pose.dir = before.dir.left();
                true
            }
            Action::TurnRight => {
                self.pose.dir = before.dir.right();
                true
            }
            Action::PickMarker => {
                if self.markers[idx] == 0 {
                    false
                } else {
                    self.markers[idx] -= 1;
                    true
                }
            }
            Action::PutMarker => {
                if self.markers[idx] >= MAX_MARKERS {
                    false
                } else {
                    self.markers[idx] += 1;
                    true
                }
            }
        };
        self.trace.push(TraceStep { pose: before, action: a, crashed: !ok });
        if !ok {
            return Err(Halt::Done(Status::Crash));
        }
        if a == Action::Move && self.task.domain == Domain::Hoc && self.at_goal() {
            return Err(Halt::Done(Status::Success));
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
            Stmt::Blank => unreachable!("blanks are rejected before execution"),
            Stmt::Repeat { count, body } => {
                for _ in 0..*count {
                    self.burn()?;
                    self.block(body, id + 1)?;
                }
                Ok(())
            }
            Stmt::RepeatUntil { body } => loop {
                self.burn()?;
                if self.at_goal() {
                    return Ok(());
                }
                self.block(body, id + 1)?;
            },
            Stmt::While { cond, body } => {
                while self.test(id, *cond)? {
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

    fn solved(&self) -> bool {
        match self.task.domain {
            Domain::Hoc => self.at_goal(),
            Domain::Karel => {
                self.markers == self.task.post_markers
                    && self.task.post_pose.is_none_or(|p| p == self.pose)
            }
        }
    }
}

/// Executes `code` on `task` deterministically.
///
/// `step_cap` bounds executed actions. Loop guards also draw from a budget
/// of `4 * step_cap + 64` evaluations so that action-free loops time out.
pub fn run(code: &Code, task: &TaskSpec, step_cap: usize) -> Result<ExecutionResult, RunError> {
    if code.blank_count() > 0 {
        return Err(RunError::ContainsBlank);
    }
    code.uses_only(&task.store).map_err(RunError::StoreViolation)?;
    let size = code.size();
    if size > task.size_threshold {
        return Err(RunError::SizeViolation { size, threshold: task.size_threshold });
    }
    let markers = match task.domain {
        Domain::Karel => task.pre_markers.clone(),
        Domain::Hoc => vec![0; task.size * task.size],
    };
    let mut m = Machine {
        task,
        pose: task.start,
        markers,
        steps: 0,
        cap: step_cap,
        fuel: step_cap.saturating_mul(4).saturating_add(64),
        trace: Vec::new(),
        visited: [task.start.cell()].into_iter().collect(),
        covered: vec![false; size],
        outcomes: BTreeMap::new(),
    };
    let status = match m.block(&code.body, 0) {
        Err(Halt::Done(s)) => s,
        Ok(()) if m.solved() => Status::Success,
        Ok(()) => Status::Incomplete,
    };
    let covered = m.covered.iter().filter(|c| **c).count();
    Ok(ExecutionResult {
        status,
        steps_used: m.steps,
        trace: m.trace,
        block_coverage: if size == 0 { 1.0 } else { covered as f64 / size as f64 },
        visited: m.visited,
        final_pose: m.pose,
        final_markers: m.markers,
        branch_outcomes: m.outcomes,
    })
}

/// Whether `code` solves `task` within the default step cap.
pub fn check_solves(code: &Code, task: &TaskSpec) -> bool {
    matches!(run(code, task, DEFAULT_STEP_CAP), Ok(r) if r.status == Status::Success)
}

/// Replays a trace's marker operations on the task's initial markers.
pub fn replay_markers(task: &TaskSpec, trace: &[TraceStep]) -> Vec<u8> {
    let mut m = task.pre_markers.clone();
    for s in trace.iter().filter(|s| !s.crashed) {
        let i = task.index(s.pose.cell());
        match s.action {
            Action::PickMarker => m[i] -= 1,
            Action::PutMarker => m[i] += 1,
            _ => {}
        }
    }
    m
}
