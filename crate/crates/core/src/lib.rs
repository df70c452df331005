//! Synthesis of adaptive pop quizzes for block-based programming tasks.
//!
//! Given a reference task, its solution code and a student's failed attempt,
//! the pipeline picks a sketch between the attempt and the solution, grows a
//! new code from a reduction of the solution, synthesizes grid puzzles that
//! the new code solves, and blanks out one action to form a multi-choice
//! question.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line and the practice service live in the companion `pquiz` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod code;
pub mod emulator;
pub mod hint;
pub mod mutation;
pub mod pipeline;
pub mod reduction;
pub mod sketch;
pub mod synth;
pub mod ted;
pub mod text;

pub use code::{Action, BlockType, Code, CodeMetrics, Condition, Domain, GrammarError, Stmt};
pub use emulator::{
    check_solves, run, Dir, ExecutionResult, Pose, RunError, Status, TaskError, TaskSpec,
    DEFAULT_STEP_CAP,
};
pub use mutation::{mutate, MutationError, MutationParams};
pub use pipeline::{
    assemble_quiz, blank_last_leaf, choose_seed, generate_popquiz, get_sketch, PipelineFailure,
    PipelineParams, Provenance, Quiz, QuizError, Variant,
};
pub use reduction::{red_codes, ReductionError};
pub use sketch::{Construct, Sketch, SketchNode};
pub use synth::{quality_score, select_diverse, synthesize_tasks, SynthError, SynthParams};
pub use text::ParseError;

/// Seeded generator used everywhere randomness is needed.
pub type Rng = rand_chacha::ChaCha8Rng;

pub(crate) fn rng_from(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
