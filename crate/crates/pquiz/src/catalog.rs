//! Reference tasks shipped with the crate.

use pquiz_core::text::parse_code;
use pquiz_core::{Code, TaskSpec};

use crate::taskfile;

#[derive(Debug, Clone)]
pub struct Entry {
    pub id: &'static str,
    pub title: &'static str,
    pub task: TaskSpec,
    pub solution: Code,
}

const FILES: [(&str, &str, &str, &str); 2] = [
    (
        "hoc-maze",
        "Maze: follow the corridor to the goal",
        include_str!("../tasks/hoc-maze.task"),
        include_str!("../tasks/hoc-maze.code"),
    ),
    (
        "karel-fill",
        "Karel: fill the row with markers",
        include_str!("../tasks/karel-fill.task"),
        include_str!("../tasks/karel-fill.code"),
    ),
];

/// The bundled tasks, in a fixed order.
pub fn bundled() -> Vec<Entry> {
    FILES
        .iter()
        .map(|&(id, title, task, code)| Entry {
            id,
            title,
            task: taskfile::parse(task).expect("bundled task parses"),
            solution: parse_code(code.trim()).expect("bundled solution parses"),
        })
        .collect()
}

pub fn find(id: &str) -> Option<Entry> {
    bundled().into_iter().find(|e| e.id == id)
}
