//! The three-stage quiz pipeline and its ablation variants.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;

use crate::code::{Action, Code, Domain, GrammarError, Stmt};
use crate::emulator::{check_solves, TaskSpec};
use crate::mutation::{mutate, MutationError, MutationParams};
use crate::reduction::red_codes;
use crate::sketch::{sketch_distance, Construct, Sketch};
use crate::synth::{synthesize_tasks, SynthParams};
use crate::text::serialize_sketch;
use crate::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    PQuizSyn,
    FullHop,
    OneHop,
    RedCode,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::PQuizSyn, Variant::FullHop, Variant::OneHop, Variant::RedCode];

    pub fn name(self) -> &'static str {
        match self {
            Variant::PQuizSyn => "pquizsyn",
            Variant::FullHop => "fullhop",
            Variant::OneHop => "onehop",
            Variant::RedCode => "redcode",
        }
    }

    pub fn from_name(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    pub theta_conceal: usize,
    pub delta_size: usize,
    pub max_candidates: usize,
    pub max_quizzes: usize,
    pub quizzes_per_code: usize,
    pub tasks_per_code: usize,
    /// Defaults to the domain's usual grid.
    pub grid_size: Option<usize>,
    pub beam_width: usize,
    pub check_minimality: bool,
    pub rng_seed: u64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            theta_conceal: 2,
            delta_size: 2,
            max_candidates: 64,
            max_quizzes: 5,
            quizzes_per_code: 2,
            tasks_per_code: 10,
            grid_size: None,
            beam_width: 200,
            check_minimality: false,
            rng_seed: 0,
        }
    }
}

impl PipelineParams {
    pub fn mutation(&self) -> MutationParams {
        MutationParams {
            delta_size: self.delta_size,
            theta_conceal: self.theta_conceal,
            max_candidates: self.max_candidates,
            rng_seed: self.rng_seed,
        }
    }

    pub fn synth(&self, domain: Domain, salt: u64) -> SynthParams {
        let mut p = SynthParams::new(domain);
        if let Some(n) = self.grid_size {
            p.grid_size = n;
        }
        p.beam_width = self.beam_width;
        p.tasks_per_code = self.tasks_per_code;
        p.check_minimality = self.check_minimality;
        p.rng_seed = mix(self.rng_seed, salt);
        p
    }
}

/// Derives independent sub-seeds.
pub(crate) fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Provenance {
    pub variant: Variant,
    pub sketch: Sketch,
    pub lhat: usize,
    pub seed_code: Code,
    pub full_code: Code,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quiz {
    pub task: TaskSpec,
    /// `full_code` with its last action replaced by a blank.
    pub blanked: Code,
    pub choices: Vec<Action>,
    pub correct: usize,
    pub quality: f64,
    pub provenance: Provenance,
}

impl Quiz {
    /// The blanked code with choice `i` filled in.
    pub fn fill(&self, i: usize) -> Option<Code> {
        self.choices.get(i).map(|a| fill_blank(&self.blanked, *a))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QuizError {
    #[error("code has no action leaf to blank")]
    NoLeaf,
    #[error("{0} answer choices solve the task")]
    AmbiguousQuiz(usize),
    #[error("no answer choice solves the task")]
    DegenerateQuiz,
}

/// Counters explaining why a run produced nothing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub sketches: usize,
    pub codes: usize,
    pub codes_without_tasks: usize,
    pub tasks: usize,
    pub ambiguous: usize,
    pub degenerate: usize,
    pub no_leaf: usize,
    pub mutation: Option<MutationError>,
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} sketches, {} codes ({} without tasks), {} tasks, {} ambiguous, {} degenerate, {} without leaf",
            self.sketches, self.codes, self.codes_without_tasks, self.tasks, self.ambiguous, self.degenerate, self.no_leaf
        )?;
        if let Some(e) = &self.mutation {
            write!(f, "; mutation: {e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PipelineFailure {
    #[error("solution does not solve the input task")]
    SolutionFails,
    #[error("attempt is not a valid code: {0}")]
    InvalidAttempt(GrammarError),
    #[error("no sketch at distance one from the attempt")]
    NoSketch,
    #[error("every candidate was rejected: {0}")]
    Rejected(Diagnostics),
}

/// Stage 1: the substructure of `solution` reachable from `student` within
/// the smallest radius, closest to `solution`. Returns it with that radius.
pub fn get_sketch(student: &Sketch, solution: &Sketch) -> (Sketch, usize) {
    let subs = solution.substructures();
    let dists: Vec<usize> = subs.iter().map(|s| sketch_distance(student, s)).collect();
    let lhat = dists.iter().copied().min().unwrap_or(0).max(1);
    let best = subs
        .iter()
        .zip(&dists)
        .filter(|(_, &d)| d <= lhat)
        .map(|(s, _)| s)
        .min_by_key(|s| (sketch_distance(s, solution), core::cmp::Reverse(s.levels()), serialize_sketch(s)))
        .expect("the bare root is always a substructure")
        .clone();
    (best, lhat)
}

/// Sketches one edit away from `student`, substructures of `solution` first,
/// then by closeness to `solution`.
pub fn one_hop_candidates(student: &Sketch, solution: &Sketch, allowed: &[Construct]) -> Vec<Sketch> {
    let subs: BTreeSet<Sketch> = solution.substructures().into_iter().collect();
    let mut hops = student.one_hop(allowed);
    hops.sort_by_cached_key(|s| (!subs.contains(s), sketch_distance(s, solution), serialize_sketch(s)));
    hops
}

/// A reduction of `solution` with the given sketch, the solution itself for
/// its own sketch, or a random instantiation when neither applies.
pub fn choose_seed(solution: &Code, sketch: &Sketch, domain: Domain, rng: &mut Rng) -> Code {
    if let Ok(reds) = red_codes(solution, sketch) {
        let reds: Vec<Code> = reds.into_iter().collect();
        if let Some(c) = reds.choose(rng) {
            return c.clone();
        }
    }
    if Sketch::of(solution) == *sketch {
        return solution.clone();
    }
    sketch.instantiate(domain, rng)
}

fn last_leaf(body: &mut [Stmt]) -> Option<&mut Stmt> {
    for s in body.iter_mut().rev() {
        if matches!(s, Stmt::Action(_)) {
            return Some(s);
        }
        let mut bodies: Vec<&mut Vec<Stmt>> = s.bodies_mut().collect();
        while let Some(b) = bodies.pop() {
            if let Some(leaf) = last_leaf(b) {
                return Some(leaf);
            }
        }
    }
    None
}

/// Replaces the last action leaf in in-order traversal by a blank.
pub fn blank_last_leaf(code: &Code) -> Result<(Code, Action), QuizError> {
    let mut out = code.clone();
    let leaf = last_leaf(&mut out.body).ok_or(QuizError::NoLeaf)?;
    let Stmt::Action(a) = *leaf else { unreachable!() };
    *leaf = Stmt::Blank;
    Ok((out, a))
}

fn fill_blank(code: &Code, a: Action) -> Code {
    fn go(body: &mut [Stmt], a: Action) {
        for s in body {
            if matches!(s, Stmt::Blank) {
                *s = Stmt::Action(a);
            }
            for b in s.bodies_mut() {
                go(b, a);
            }
        }
    }
    let mut out = code.clone();
    go(&mut out.body, a);
    out
}

/// Stage 3: blank the last leaf and keep the quiz only if exactly one of the
/// store's actions completes it.
pub fn assemble_quiz(task: &TaskSpec, full_code: &Code, provenance: Provenance, quality: f64) -> Result<Quiz, QuizError> {
    let (blanked, _) = blank_last_leaf(full_code)?;
    let choices = task.store_actions();
    let solving: Vec<usize> =
        (0..choices.len()).filter(|&i| check_solves(&fill_blank(&blanked, choices[i]), task)).collect();
    match solving.as_slice() {
        [] => Err(QuizError::DegenerateQuiz),
        [i] => Ok(Quiz { task: task.clone(), blanked, correct: *i, choices, quality, provenance }),
        many => Err(QuizError::AmbiguousQuiz(many.len())),
    }
}

/// Runs the pipeline for one student attempt and returns up to
/// `params.max_quizzes` validated quizzes, best task quality first.
pub fn generate_popquiz(
    task_in: &TaskSpec,
    solution: &Code,
    attempt: &Code,
    variant: Variant,
    params: &PipelineParams,
) -> Result<Vec<Quiz>, PipelineFailure> {
    if !check_solves(solution, task_in) {
        return Err(PipelineFailure::SolutionFails);
    }
    attempt.validate(false).map_err(PipelineFailure::InvalidAttempt)?;
    let domain = task_in.domain;
    let student = Sketch::of(attempt);
    let target = Sketch::of(solution);

    let sketches: Vec<(Sketch, usize)> = match variant {
        Variant::PQuizSyn | Variant::RedCode => alloc::vec![get_sketch(&student, &target)],
        Variant::FullHop => alloc::vec![(target.clone(), sketch_distance(&student, &target).max(1))],
        Variant::OneHop => {
            let allowed = Construct::in_store(&domain.full_store());
            one_hop_candidates(&student, &target, &allowed).into_iter().map(|s| (s, 1)).collect()
        }
    };
    if sketches.is_empty() {
        return Err(PipelineFailure::NoSketch);
    }

    let mut rng = crate::rng_from(params.rng_seed);
    let mut diag = Diagnostics::default();
    let mut quizzes: Vec<Quiz> = Vec::new();
    let mut salt = 0u64;
    for (sketch, lhat) in sketches {
        diag.sketches += 1;
        let seed = choose_seed(solution, &sketch, domain, &mut rng);
        let codes: Vec<Code> = match variant {
            Variant::RedCode => {
                let mut reds: Vec<Code> = red_codes(solution, &sketch).unwrap_or_default().into_iter().collect();
                reds.shuffle(&mut rng);
                reds.truncate(params.max_candidates.max(1));
                reds
            }
            _ => match mutate(&seed, &sketch, solution, domain.actions(), &params.mutation()) {
                Ok(c) => c,
                Err(e) => {
                    diag.mutation = Some(e);
                    Vec::new()
                }
            },
        };
        for code in codes {
            if quizzes.len() >= params.max_quizzes {
                break;
            }
            diag.codes += 1;
            salt += 1;
            let tasks = match synthesize_tasks(&code, &params.synth(domain, salt)) {
                Ok(t) => t,
                Err(_) => {
                    diag.codes_without_tasks += 1;
                    continue;
                }
            };
            let mut from_code = 0;
            for (task, quality) in tasks {
                if from_code >= params.quizzes_per_code || quizzes.len() >= params.max_quizzes {
                    break;
                }
                diag.tasks += 1;
                let prov = Provenance {
                    variant,
                    sketch: sketch.clone(),
                    lhat,
                    seed_code: seed.clone(),
                    full_code: code.clone(),
                    rng_seed: params.rng_seed,
                };
                match assemble_quiz(&task, &code, prov, quality) {
                    Ok(q) => {
                        from_code += 1;
                        quizzes.push(q);
                    }
                    Err(QuizError::AmbiguousQuiz(_)) => diag.ambiguous += 1,
                    Err(QuizError::DegenerateQuiz) => diag.degenerate += 1,
                    Err(QuizError::NoLeaf) => diag.no_leaf += 1,
                }
            }
        }
        if !quizzes.is_empty() {
            break;
        }
    }
    if quizzes.is_empty() {
        return Err(PipelineFailure::Rejected(diag));
    }
    quizzes.sort_by(|a, b| b.quality.total_cmp(&a.quality));
    Ok(quizzes)
}

/// Short human-readable description of a quiz's origin.
pub fn describe(q: &Quiz) -> String {
    alloc::format!(
        "{} sketch={} lhat={} code={}",
        q.provenance.variant,
        q.provenance.sketch,
        q.provenance.lhat,
        q.provenance.full_code
    )
}
