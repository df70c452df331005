//! JSON form of a generated quiz.
//!
//! `task` holds the puzzle in the task-file format, `code` the blanked code
//! (the blank is written `__blank__`), `choices` the action names in display
//! order and `correct` the index of the only choice that solves the task.
//! `seed` is the seed code the quiz code was mutated from.

use pquiz_core::text::{parse_code, parse_quiz_code, parse_sketch};
use pquiz_core::{Action, Provenance, Quiz, Variant};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taskfile::{self, TaskFileError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QuizDoc {
    pub task: String,
    pub code: String,
    pub choices: Vec<String>,
    pub correct: usize,
    pub variant: String,
    pub sketch: String,
    pub lhat: usize,
    pub seed: String,
    pub full_code: String,
    pub quality: f64,
    pub rng_seed: u64,
}

#[derive(Debug, Error)]
pub enum QuizDocError {
    #[error("bad JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("task: {0}")]
    Task(#[from] TaskFileError),
    #[error("{field}: {message}")]
    Field { field: &'static str, message: String },
}

fn field<T, E: std::fmt::Display>(field: &'static str, r: Result<T, E>) -> Result<T, QuizDocError> {
    r.map_err(|e| QuizDocError::Field { field, message: e.to_string() })
}

impl QuizDoc {
    pub fn from_quiz(q: &Quiz) -> Self {
        let p = &q.provenance;
        QuizDoc {
            task: taskfile::serialize(&q.task),
            code: q.blanked.to_string(),
            choices: q.choices.iter().map(|a| a.name().to_string()).collect(),
            correct: q.correct,
            variant: p.variant.name().to_string(),
            sketch: p.sketch.to_string(),
            lhat: p.lhat,
            seed: p.seed_code.to_string(),
            full_code: p.full_code.to_string(),
            quality: q.quality,
            rng_seed: p.rng_seed,
        }
    }

    pub fn to_quiz(&self) -> Result<Quiz, QuizDocError> {
        let task = taskfile::parse(&self.task)?;
        let blanked = field("code", parse_quiz_code(&self.code))?;
        let choices = self
            .choices
            .iter()
            .map(|c| Action::from_name(c).ok_or_else(|| format!("unknown action '{c}'")))
            .collect::<Result<Vec<_>, _>>();
        let choices = field("choices", choices)?;
        if self.correct >= choices.len() {
            return field("correct", Err(format!("index {} with {} choices", self.correct, choices.len())));
        }
        let variant = field("variant", Variant::from_name(&self.variant).ok_or("unknown variant"))?;
        let provenance = Provenance {
            variant,
            sketch: field("sketch", parse_sketch(&self.sketch))?,
            lhat: self.lhat,
            seed_code: field("seed", parse_code(&self.seed))?,
            full_code: field("fullCode", parse_code(&self.full_code))?,
            rng_seed: self.rng_seed,
        };
        Ok(Quiz { task, blanked, choices, correct: self.correct, quality: self.quality, provenance })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("quiz documents always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, QuizDocError> {
        Ok(serde_json::from_str(s)?)
    }
}
