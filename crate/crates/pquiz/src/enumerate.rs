//! Counting how many distinct quizzes each substructure of a solution yields.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use pquiz_core::mutation::mutate;
use pquiz_core::text::serialize_sketch;
use pquiz_core::{
    assemble_quiz, check_solves, choose_seed, synthesize_tasks, Code, PipelineFailure, PipelineParams,
    Provenance, Rng, Sketch, TaskSpec, Variant,
};
use rand::SeedableRng;
use rayon::prelude::*;

use crate::taskfile;

#[derive(Debug, Clone)]
pub struct EnumParams {
    /// Wall-clock allowance per substructure.
    pub budget: Duration,
    /// Seed codes drawn per substructure; each is mutated independently.
    pub rounds: usize,
    pub pipeline: PipelineParams,
}

impl Default for EnumParams {
    fn default() -> Self {
        EnumParams { budget: Duration::from_secs(300), rounds: 8, pipeline: PipelineParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub sketch: Sketch,
    /// Construct nesting depth, `Run` at 0.
    pub depth: usize,
    /// Distinct codes with at least one valid quiz.
    pub codes: usize,
    /// Distinct (task, code) pairs forming a valid quiz.
    pub tasks: usize,
    pub timed_out: bool,
}

fn sub_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 31)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^ (z >> 29)
}

/// Candidate codes for one substructure, in a seed-determined order.
fn candidate_codes(task: &TaskSpec, solution: &Code, sketch: &Sketch, row: usize, p: &EnumParams) -> Vec<Code> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for round in 0..p.rounds {
        let s = sub_seed(p.pipeline.rng_seed, row as u64, round as u64);
        let mut rng = Rng::seed_from_u64(s);
        let seed = choose_seed(solution, sketch, task.domain, &mut rng);
        let mut mp = p.pipeline.mutation();
        mp.rng_seed = s;
        for c in mutate(&seed, sketch, solution, task.domain.actions(), &mp).unwrap_or_default() {
            if seen.insert(c.clone()) {
                out.push(c);
            }
        }
    }
    out
}

fn quiz_pairs(code: &Code, task: &TaskSpec, sketch: &Sketch, salt: u64, p: &PipelineParams) -> Vec<(String, String)> {
    let Ok(tasks) = synthesize_tasks(code, &p.synth(task.domain, salt)) else {
        return Vec::new();
    };
    let code_text = code.to_string();
    tasks
        .into_iter()
        .filter(|(t, q)| {
            let prov = Provenance {
                variant: Variant::PQuizSyn,
                sketch: sketch.clone(),
                lhat: 0,
                seed_code: code.clone(),
                full_code: code.clone(),
                rng_seed: p.rng_seed,
            };
            assemble_quiz(t, code, prov, *q).is_ok()
        })
        .map(|(t, _)| (taskfile::serialize(&t), code_text.clone()))
        .collect()
}

/// One row per substructure of the solution's sketch, shallowest first.
/// Work is spread over the rayon pool; if the budget runs out the row is
/// marked and only completed codes are counted.
pub fn enumerate(task: &TaskSpec, solution: &Code, p: &EnumParams) -> Result<Vec<Row>, PipelineFailure> {
    if !check_solves(solution, task) {
        return Err(PipelineFailure::SolutionFails);
    }
    let subs = Sketch::of(solution).substructures();
    let mut rows = Vec::with_capacity(subs.len());
    for (i, sketch) in subs.into_iter().enumerate() {
        let depth = sketch.levels() - 1;
        if p.budget.is_zero() {
            rows.push(Row { sketch, depth, codes: 0, tasks: 0, timed_out: true });
            continue;
        }
        let deadline = Instant::now() + p.budget;
        let codes = candidate_codes(task, solution, &sketch, i, p);
        let results: Vec<Option<Vec<(String, String)>>> = codes
            .par_iter()
            .enumerate()
            .map(|(k, code)| {
                if Instant::now() >= deadline {
                    return None;
                }
                let salt = sub_seed(i as u64, k as u64, 1);
                Some(quiz_pairs(code, task, &sketch, salt, &p.pipeline))
            })
            .collect();
        let timed_out = results.iter().any(Option::is_none);
        let pairs: BTreeSet<(String, String)> = results.into_iter().flatten().flatten().collect();
        let codes: BTreeSet<&String> = pairs.iter().map(|(_, c)| c).collect();
        rows.push(Row { depth, codes: codes.len(), tasks: pairs.len(), timed_out, sketch });
    }
    Ok(rows)
}

/// Tab-separated table with a header line.
pub fn table(rows: &[Row]) -> String {
    let mut out = String::from("substructure\tdepth\tcodes\ttasks\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", serialize_sketch(&r.sketch), r.depth, r.codes, r.tasks);
    }
    out
}

