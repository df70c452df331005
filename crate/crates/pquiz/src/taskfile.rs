//! The plain-text task format.
//!
//! ```text
//! kind:hoc
//! size:4
//! ...#
//! ##.#
//! ##..
//! ###+
//! agent:0,0,E
//! store:move,turnLeft,turnRight,RepeatUntil,IfElse
//! maxblocks:6
//! ```
//!
//! Karel files mark cells with marker digits instead of a goal, follow the
//! `agent:` line with a second grid giving the required final markers and may
//! add an `agentpost:` line for the required final pose.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use pquiz_core::emulator::MAX_MARKERS;
use pquiz_core::{BlockType, Dir, Domain, Pose, TaskError, TaskSpec};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid task: {0}")]
    Invalid(#[from] TaskError),
}

struct Lines<'a> {
    lines: Vec<&'a str>,
    next: usize,
}

impl<'a> Lines<'a> {
    fn new(src: &'a str) -> Self {
        let mut lines: Vec<&str> = src.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
        if lines.last() == Some(&"") {
            lines.pop();
        }
        Lines { lines, next: 0 }
    }

    /// 1-based number of the line most recently returned.
    fn number(&self) -> usize {
        self.next
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, TaskFileError> {
        Err(TaskFileError::Syntax { line: self.number(), message: message.into() })
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.next).copied()
    }

    fn line(&mut self, what: &str) -> Result<&'a str, TaskFileError> {
        match self.lines.get(self.next) {
            Some(l) => {
                self.next += 1;
                Ok(l)
            }
            None => {
                self.next += 1;
                self.err(format!("unexpected end of file, expected {what}"))
            }
        }
    }

    fn field(&mut self, key: &str) -> Result<&'a str, TaskFileError> {
        let l = self.line(&format!("'{key}:'"))?;
        match l.split_once(':') {
            Some((k, v)) if k == key => Ok(v.trim()),
            _ => self.err(format!("expected '{key}:', found '{l}'")),
        }
    }
}

fn parse_pose(lines: &Lines, v: &str, n: usize) -> Result<Pose, TaskFileError> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    let [r, c, d] = parts[..] else {
        return lines.err(format!("expected row,col,dir, found '{v}'"));
    };
    let coord = |s: &str| -> Result<usize, TaskFileError> {
        match s.parse::<usize>() {
            Ok(x) if x < n => Ok(x),
            Ok(x) => lines.err(format!("coordinate {x} outside the {n}x{n} grid")),
            Err(_) => lines.err(format!("bad coordinate '{s}'")),
        }
    };
    let dir = match d.chars().collect::<Vec<_>>()[..] {
        [ch] => Dir::from_letter(ch.to_ascii_uppercase()),
        _ => None,
    };
    let Some(dir) = dir else {
        return lines.err(format!("bad direction '{d}', expected one of N, E, S, W"));
    };
    Ok(Pose::new(coord(r)?, coord(c)?, dir))
}

/// Reads `n` grid rows. Returns walls, goal cells and marker counts.
fn parse_grid(
    lines: &mut Lines,
    n: usize,
    domain: Domain,
) -> Result<(Vec<bool>, Vec<(usize, usize)>, Vec<u8>), TaskFileError> {
    let mut walls = Vec::with_capacity(n * n);
    let mut goals = Vec::new();
    let mut markers = Vec::with_capacity(n * n);
    for r in 0..n {
        let row = lines.line("a grid row")?;
        let cells: Vec<char> = row.chars().collect();
        if cells.len() != n {
            return lines.err(format!("grid row has {} cells, expected {n}", cells.len()));
        }
        for (c, ch) in cells.into_iter().enumerate() {
            let (wall, marker) = match (ch, domain) {
                ('#', _) => (true, 0),
                ('.', _) => (false, 0),
                ('+', Domain::Hoc) => {
                    goals.push((r, c));
                    (false, 0)
                }
                ('1'..='9', Domain::Karel) => (false, ch as u8 - b'0'),
                _ => return lines.err(format!("unexpected cell '{ch}' in a {} grid", domain.name())),
            };
            walls.push(wall);
            markers.push(marker);
        }
    }
    Ok((walls, goals, markers))
}

pub fn parse(src: &str) -> Result<TaskSpec, TaskFileError> {
    let mut lines = Lines::new(src);
    let domain = match lines.field("kind")? {
        "hoc" => Domain::Hoc,
        "karel" => Domain::Karel,
        other => return lines.err(format!("unknown kind '{other}', expected hoc or karel")),
    };
    let size_text = lines.field("size")?;
    let n: usize = match size_text.parse() {
        Ok(n) if (2..=16).contains(&n) => n,
        _ => return lines.err(format!("grid size must be an integer in 2..=16, found '{size_text}'")),
    };
    let grid_start = lines.number() + 1;
    let (walls, goals, pre) = parse_grid(&mut lines, n, domain)?;
    let goal = match (domain, goals.as_slice()) {
        (Domain::Hoc, [g]) => Some(*g),
        (Domain::Hoc, gs) => {
            return Err(TaskFileError::Syntax {
                line: grid_start,
                message: format!("HOC grid needs exactly one goal '+', found {}", gs.len()),
            })
        }
        (Domain::Karel, _) => None,
    };
    let start = {
        let v = lines.field("agent")?;
        parse_pose(&lines, v, n)?
    };
    if walls[start.row * n + start.col] {
        return lines.err("agent starts on a wall");
    }
    let (post_markers, post_pose) = match domain {
        Domain::Hoc => (Vec::new(), None),
        Domain::Karel => {
            let first = lines.number() + 1;
            let (post_walls, _, post) = parse_grid(&mut lines, n, domain)?;
            if let Some(i) = (0..n * n).find(|&i| post_walls[i] != walls[i]) {
                return Err(TaskFileError::Syntax {
                    line: first + i / n,
                    message: format!("final grid disagrees with the initial grid on the wall at column {}", i % n),
                });
            }
            let pose = match lines.peek() {
                Some(l) if l.starts_with("agentpost:") => {
                    let v = lines.field("agentpost")?;
                    let p = parse_pose(&lines, v, n)?;
                    if walls[p.row * n + p.col] {
                        return lines.err("final agent pose is on a wall");
                    }
                    Some(p)
                }
                _ => None,
            };
            (post, pose)
        }
    };
    let mut store = BTreeSet::new();
    let store_text = lines.field("store")?;
    let full = domain.full_store();
    for name in store_text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match BlockType::from_name(name) {
            Some(b) if full.contains(&b) => {
                store.insert(b);
            }
            Some(_) => return lines.err(format!("block '{name}' is not available in {} tasks", domain.name())),
            None => return lines.err(format!("unknown block '{name}'")),
        }
    }
    let max_text = lines.field("maxblocks")?;
    let size_threshold: usize = match max_text.parse() {
        Ok(k) if k >= 1 => k,
        _ => return lines.err(format!("maxblocks must be a positive integer, found '{max_text}'")),
    };
    if let Some(extra) = lines.peek() {
        lines.next += 1;
        return lines.err(format!("unexpected trailing line '{extra}'"));
    }
    let (pre_markers, post_markers) = match domain {
        Domain::Hoc => (Vec::new(), Vec::new()),
        Domain::Karel => (pre, post_markers),
    };
    let task = TaskSpec { domain, size: n, walls, start, goal, pre_markers, post_markers, post_pose, store, size_threshold };
    task.validate()?;
    Ok(task)
}

fn grid(task: &TaskSpec, markers: &[u8], out: &mut String) {
    let n = task.size;
    for r in 0..n {
        for c in 0..n {
            let i = r * n + c;
            let ch = if task.walls[i] {
                '#'
            } else if task.goal == Some((r, c)) {
                '+'
            } else if let Some(&k @ 1..=MAX_MARKERS) = markers.get(i) {
                (b'0' + k) as char
            } else {
                '.'
            };
            out.push(ch);
        }
        out.push('\n');
    }
}

fn pose(p: &Pose) -> String {
    format!("{},{},{}", p.row, p.col, p.dir.letter())
}

pub fn serialize(task: &TaskSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "kind:{}", task.domain.name());
    let _ = writeln!(out, "size:{}", task.size);
    grid(task, &task.pre_markers, &mut out);
    let _ = writeln!(out, "agent:{}", pose(&task.start));
    if task.domain == Domain::Karel {
        grid(task, &task.post_markers, &mut out);
        if let Some(p) = &task.post_pose {
            let _ = writeln!(out, "agentpost:{}", pose(p));
        }
    }
    let names: Vec<&str> = task.store.iter().map(|b| b.name()).collect();
    let _ = writeln!(out, "store:{}", names.join(","));
    let _ = writeln!(out, "maxblocks:{}", task.size_threshold);
    out
}
