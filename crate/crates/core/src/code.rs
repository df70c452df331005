//! The block DSL shared by HOC mazes and Karel worlds.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use crate::ted::{self, Tree};

/// Task family a code or task belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Domain {
    Hoc,
    Karel,
}

impl Domain {
    /// Action blocks always present in a task's store.
    pub fn actions(self) -> &'static [Action] {
        match self {
            Domain::Hoc => &Action::ALL[..3],
            Domain::Karel => &Action::ALL,
        }
    }

    pub fn conditions(self) -> &'static [Condition] {
        match self {
            Domain::Hoc => &Condition::ALL[..4],
            Domain::Karel => &Condition::ALL,
        }
    }

    /// Every block type the domain knows about.
    pub fn full_store(self) -> BTreeSet<BlockType> {
        match self {
            Domain::Hoc => [
                BlockType::Move,
                BlockType::TurnLeft,
                BlockType::TurnRight,
                BlockType::Repeat,
                BlockType::RepeatUntil,
                BlockType::If,
                BlockType::IfElse,
            ]
            .into_iter()
            .collect(),
            Domain::Karel => [
                BlockType::Move,
                BlockType::TurnLeft,
                BlockType::TurnRight,
                BlockType::PickMarker,
                BlockType::PutMarker,
                BlockType::Repeat,
                BlockType::While,
                BlockType::If,
                BlockType::IfElse,
            ]
            .into_iter()
            .collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Hoc => "hoc",
            Domain::Karel => "karel",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Move,
    TurnLeft,
    TurnRight,
    PickMarker,
    PutMarker,
}

impl Action {
    /// Fixed answer-choice order.
    pub const ALL: [Action; 5] = [
        Action::Move,
        Action::TurnLeft,
        Action::TurnRight,
        Action::PickMarker,
        Action::PutMarker,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Action::Move => "move",
            Action::TurnLeft => "turnLeft",
            Action::TurnRight => "turnRight",
            Action::PickMarker => "pickMarker",
            Action::PutMarker => "putMarker",
        }
    }

    pub fn from_name(name: &str) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.name() == name)
    }

    /// The action that undoes this one when executed right after it.
    pub fn inverse(self) -> Option<Action> {
        match self {
            Action::Move => None,
            Action::TurnLeft => Some(Action::TurnRight),
            Action::TurnRight => Some(Action::TurnLeft),
            Action::PickMarker => Some(Action::PutMarker),
            Action::PutMarker => Some(Action::PickMarker),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    PathAhead,
    PathLeft,
    PathRight,
    NoPathAhead,
    MarkersPresent,
    NoMarkersPresent,
}

impl Condition {
    pub const ALL: [Condition; 6] = [
        Condition::PathAhead,
        Condition::PathLeft,
        Condition::PathRight,
        Condition::NoPathAhead,
        Condition::MarkersPresent,
        Condition::NoMarkersPresent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::PathAhead => "pathAhead",
            Condition::PathLeft => "pathLeft",
            Condition::PathRight => "pathRight",
            Condition::NoPathAhead => "noPathAhead",
            Condition::MarkersPresent => "markersPresent",
            Condition::NoMarkersPresent => "noMarkersPresent",
        }
    }

    pub fn from_name(name: &str) -> Option<Condition> {
        Condition::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn is_marker(self) -> bool {
        matches!(self, Condition::MarkersPresent | Condition::NoMarkersPresent)
    }

    /// Conditions a mutation may swap this one for.
    pub fn compatible(self) -> &'static [Condition] {
        if self.is_marker() {
            &Condition::ALL[4..]
        } else {
            &Condition::ALL[..4]
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockType {
    Move,
    TurnLeft,
    TurnRight,
    PickMarker,
    PutMarker,
    Repeat,
    RepeatUntil,
    While,
    If,
    IfElse,
}

impl BlockType {
    pub const ALL: [BlockType; 10] = [
        BlockType::Move,
        BlockType::TurnLeft,
        BlockType::TurnRight,
        BlockType::PickMarker,
        BlockType::PutMarker,
        BlockType::Repeat,
        BlockType::RepeatUntil,
        BlockType::While,
        BlockType::If,
        BlockType::IfElse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BlockType::Move => "move",
            BlockType::TurnLeft => "turnLeft",
            BlockType::TurnRight => "turnRight",
            BlockType::PickMarker => "pickMarker",
            BlockType::PutMarker => "putMarker",
            BlockType::Repeat => "Repeat",
            BlockType::RepeatUntil => "RepeatUntil",
            BlockType::While => "While",
            BlockType::If => "If",
            BlockType::IfElse => "IfElse",
        }
    }

    pub fn from_name(name: &str) -> Option<BlockType> {
        BlockType::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn action(self) -> Option<Action> {
        match self {
            BlockType::Move => Some(Action::Move),
            BlockType::TurnLeft => Some(Action::TurnLeft),
            BlockType::TurnRight => Some(Action::TurnRight),
            BlockType::PickMarker => Some(Action::PickMarker),
            BlockType::PutMarker => Some(Action::PutMarker),
            _ => None,
        }
    }
}

impl From<Action> for BlockType {
    fn from(a: Action) -> Self {
        match a {
            Action::Move => BlockType::Move,
            Action::TurnLeft => BlockType::TurnLeft,
            Action::TurnRight => BlockType::TurnRight,
            Action::PickMarker => BlockType::PickMarker,
            Action::PutMarker => BlockType::PutMarker,
        }
    }
}

impl fmt::Display for BlockType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const MIN_REPEAT: u8 = 2;
pub const MAX_REPEAT: u8 = 10;

/// One statement of a program. `Blank` only appears in quiz codes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stmt {
    Action(Action),
    Repeat { count: u8, body: Vec<Stmt> },
    RepeatUntil { body: Vec<Stmt> },
    While { cond: Condition, body: Vec<Stmt> },
    If { cond: Condition, body: Vec<Stmt> },
    IfElse { cond: Condition, then_body: Vec<Stmt>, else_body: Vec<Stmt> },
    Blank,
}

impl Stmt {
    pub fn block_type(&self) -> Option<BlockType> {
        Some(match self {
            Stmt::Action(a) => (*a).into(),
            Stmt::Repeat { .. } => BlockType::Repeat,
            Stmt::RepeatUntil { .. } => BlockType::RepeatUntil,
            Stmt::While { .. } => BlockType::While,
            Stmt::If { .. } => BlockType::If,
            Stmt::IfElse { .. } => BlockType::IfElse,
            Stmt::Blank => return None,
        })
    }

    pub fn is_construct(&self) -> bool {
        !matches!(self, Stmt::Action(_) | Stmt::Blank)
    }

    /// Child bodies in traversal order (then before else).
    pub fn bodies(&self) -> impl Iterator<Item = &Vec<Stmt>> {
        let (a, b) = match self {
            Stmt::Repeat { body, .. }
            | Stmt::RepeatUntil { body }
            | Stmt::While { body, .. }
            | Stmt::If { body, .. } => (Some(body), None),
            Stmt::IfElse { then_body, else_body, .. } => (Some(then_body), Some(else_body)),
            Stmt::Action(_) | Stmt::Blank => (None, None),
        };
        a.into_iter().chain(b)
    }

    pub fn bodies_mut(&mut self) -> impl Iterator<Item = &mut Vec<Stmt>> {
        let (a, b) = match self {
            Stmt::Repeat { body, .. }
            | Stmt::RepeatUntil { body }
            | Stmt::While { body, .. }
            | Stmt::If { body, .. } => (Some(body), None),
            Stmt::IfElse { then_body, else_body, .. } => (Some(then_body), Some(else_body)),
            Stmt::Action(_) | Stmt::Blank => (None, None),
        };
        a.into_iter().chain(b)
    }

    /// Number of nodes in this statement's subtree, itself included.
    pub fn node_count(&self) -> usize {
        1 + self.bodies().flatten().map(Stmt::node_count).sum::<usize>()
    }

    pub fn condition(&self) -> Option<Condition> {
        match self {
            Stmt::While { cond, .. } | Stmt::If { cond, .. } | Stmt::IfElse { cond, .. } => {
                Some(*cond)
            }
            _ => None,
        }
    }

    fn depth(&self) -> usize {
        1 + self.bodies().flatten().map(Stmt::depth).max().unwrap_or(0)
    }
}

/// A program: the ordered statement list under the `Run` root.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Code {
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMetrics {
    pub blocks: BTreeSet<BlockType>,
    pub size: usize,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("empty body")]
    EmptyBody,
    #[error("RepeatUntil must be the last top-level statement")]
    RepeatUntilNotLast,
    #[error("repeat count {0} outside 2..=10")]
    CountOutOfRange(u8),
    #[error("blank not allowed here")]
    UnexpectedBlank,
    #[error("at most one blank is allowed")]
    MultipleBlanks,
    #[error("else branch outside IfElse")]
    MisplacedElse,
}

impl Code {
    pub fn new(body: Vec<Stmt>) -> Self {
        Code { body }
    }

    /// Checks the concrete grammar. `allow_blank` admits a single `__blank__`.
    pub fn validate(&self, allow_blank: bool) -> Result<(), GrammarError> {
        if self.body.is_empty() {
            return Err(GrammarError::EmptyBody);
        }
        check_structure(&self.body)?;
        let blanks = self.blank_count();
        if blanks > 0 && !allow_blank {
            return Err(GrammarError::UnexpectedBlank);
        }
        if blanks > 1 {
            return Err(GrammarError::MultipleBlanks);
        }
        validate_bodies(&self.body)
    }

    pub fn is_valid(&self) -> bool {
        self.validate(false).is_ok()
    }

    pub fn metrics(&self) -> CodeMetrics {
        let mut blocks = BTreeSet::new();
        self.visit(&mut |s| {
            if let Some(b) = s.block_type() {
                blocks.insert(b);
            }
        });
        CodeMetrics {
            blocks,
            size: self.size(),
            depth: self.body.iter().map(Stmt::depth).max().unwrap_or(0),
        }
    }

    /// Block count, `Run` excluded.
    pub fn size(&self) -> usize {
        self.body.iter().map(Stmt::node_count).sum()
    }

    pub fn construct_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |s| n += s.is_construct() as usize);
        n
    }

    pub fn blank_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |s| n += matches!(s, Stmt::Blank) as usize);
        n
    }

    /// Pre-order walk over every statement.
    pub fn visit<F: FnMut(&Stmt)>(&self, f: &mut F) {
        fn go<F: FnMut(&Stmt)>(body: &[Stmt], f: &mut F) {
            for s in body {
                f(s);
                for b in s.bodies() {
                    go(b, f);
                }
            }
        }
        go(&self.body, f)
    }

    /// Action leaves in left-to-right order, then-branches before else-branches.
    pub fn actions(&self) -> Vec<Action> {
        let mut out = Vec::new();
        self.visit(&mut |s| {
            if let Stmt::Action(a) = s {
                out.push(*a);
            }
        });
        out
    }

    pub fn uses_only(&self, store: &BTreeSet<BlockType>) -> Result<(), BlockType> {
        let mut bad = None;
        self.visit(&mut |s| {
            if let Some(b) = s.block_type() {
                if bad.is_none() && !store.contains(&b) {
                    bad = Some(b);
                }
            }
        });
        bad.map_or(Ok(()), Err)
    }

    pub fn to_tree(&self) -> Tree<CodeLabel> {
        Tree::new(CodeLabel::Root, body_trees(&self.body, Branch::Body))
    }

    /// Inverse of [`Code::to_tree`]. Fails on trees no code maps to; empty
    /// bodies are accepted.
    pub fn from_tree(tree: &Tree<CodeLabel>) -> Option<Code> {
        if tree.label != CodeLabel::Root {
            return None;
        }
        let body = stmts_from_trees(&tree.children, false)?;
        check_structure(&body).ok()?;
        Some(Code { body })
    }
}

/// Positional rules independent of body emptiness: RepeatUntil placement and
/// repeat counts.
pub(crate) fn check_structure(body: &[Stmt]) -> Result<(), GrammarError> {
    for (i, s) in body.iter().enumerate() {
        if matches!(s, Stmt::RepeatUntil { .. }) && i + 1 != body.len() {
            return Err(GrammarError::RepeatUntilNotLast);
        }
    }
    fn nested(body: &[Stmt]) -> Result<(), GrammarError> {
        for s in body {
            match s {
                Stmt::RepeatUntil { .. } => return Err(GrammarError::RepeatUntilNotLast),
                Stmt::Repeat { count, .. } if !(MIN_REPEAT..=MAX_REPEAT).contains(count) => {
                    return Err(GrammarError::CountOutOfRange(*count))
                }
                _ => {}
            }
            for b in s.bodies() {
                nested(b)?;
            }
        }
        Ok(())
    }
    for s in body {
        if let Stmt::Repeat { count, .. } = s {
            if !(MIN_REPEAT..=MAX_REPEAT).contains(count) {
                return Err(GrammarError::CountOutOfRange(*count));
            }
        }
        for b in s.bodies() {
            nested(b)?;
        }
    }
    Ok(())
}

fn validate_bodies(body: &[Stmt]) -> Result<(), GrammarError> {
    for s in body {
        for b in s.bodies() {
            if b.is_empty() {
                return Err(GrammarError::EmptyBody);
            }
            validate_bodies(b)?;
        }
    }
    Ok(())
}

/// Which body of its parent a node sits in. IfElse else-children carry
/// `Else`; every other node carries `Body`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Branch {
    Body,
    Else,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Action(Action),
    Repeat(u8),
    RepeatUntil,
    While(Condition),
    If(Condition),
    IfElse(Condition),
    Blank,
}

impl NodeKind {
    pub fn is_construct(self) -> bool {
        !matches!(self, NodeKind::Action(_) | NodeKind::Blank)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CodeLabel {
    Root,
    Node(Branch, NodeKind),
}

fn body_trees(body: &[Stmt], branch: Branch) -> Vec<Tree<CodeLabel>> {
    body.iter().map(|s| stmt_tree(s, branch)).collect()
}

fn stmt_tree(s: &Stmt, branch: Branch) -> Tree<CodeLabel> {
    let (kind, children) = match s {
        Stmt::Action(a) => (NodeKind::Action(*a), Vec::new()),
        Stmt::Blank => (NodeKind::Blank, Vec::new()),
        Stmt::Repeat { count, body } => (NodeKind::Repeat(*count), body_trees(body, Branch::Body)),
        Stmt::RepeatUntil { body } => (NodeKind::RepeatUntil, body_trees(body, Branch::Body)),
        Stmt::While { cond, body } => (NodeKind::While(*cond), body_trees(body, Branch::Body)),
        Stmt::If { cond, body } => (NodeKind::If(*cond), body_trees(body, Branch::Body)),
        Stmt::IfElse { cond, then_body, else_body } => {
            let mut c = body_trees(then_body, Branch::Body);
            c.extend(body_trees(else_body, Branch::Else));
            (NodeKind::IfElse(*cond), c)
        }
    };
    Tree::new(CodeLabel::Node(branch, kind), children)
}

fn stmts_from_trees(trees: &[Tree<CodeLabel>], else_allowed: bool) -> Option<Vec<Stmt>> {
    trees
        .iter()
        .map(|t| match t.label {
            CodeLabel::Node(Branch::Else, _) if !else_allowed => None,
            CodeLabel::Node(_, kind) => stmt_from_tree(kind, &t.children),
            CodeLabel::Root => None,
        })
        .collect()
}

fn stmt_from_tree(kind: NodeKind, children: &[Tree<CodeLabel>]) -> Option<Stmt> {
    let plain = || stmts_from_trees(children, false);
    Some(match kind {
        NodeKind::Action(a) if children.is_empty() => Stmt::Action(a),
        NodeKind::Blank if children.is_empty() => Stmt::Blank,
        NodeKind::Action(_) | NodeKind::Blank => return None,
        NodeKind::Repeat(count) => Stmt::Repeat { count, body: plain()? },
        NodeKind::RepeatUntil => Stmt::RepeatUntil { body: plain()? },
        NodeKind::While(cond) => Stmt::While { cond, body: plain()? },
        NodeKind::If(cond) => Stmt::If { cond, body: plain()? },
        NodeKind::IfElse(cond) => {
            let split = children
                .iter()
                .position(|c| matches!(c.label, CodeLabel::Node(Branch::Else, _)))
                .unwrap_or(children.len());
            let then_body = stmts_from_trees(&children[..split], false)?;
            let else_trees = &children[split..];
            if else_trees
                .iter()
                .any(|c| !matches!(c.label, CodeLabel::Node(Branch::Else, _)))
            {
                return None;
            }
            let else_body = else_trees
                .iter()
                .map(|t| match t.label {
                    CodeLabel::Node(_, kind) => stmt_from_tree(kind, &t.children),
                    CodeLabel::Root => None,
                })
                .collect::<Option<Vec<_>>>()?;
            Stmt::IfElse { cond, then_body, else_body }
        }
    })
}

/// Unit-cost ordered tree edit distance between two codes.
pub fn code_distance(a: &Code, b: &Code) -> usize {
    ted::distance(&a.to_tree(), &b.to_tree())
}

/// Adjacent statement pairs in one body that cancel each other out.
pub fn has_inverse_pair(body: &[Stmt]) -> bool {
    body.windows(2).any(|w| match (&w[0], &w[1]) {
        (Stmt::Action(a), Stmt::Action(b)) => a.inverse() == Some(*b),
        _ => false,
    })
}
