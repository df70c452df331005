//! The practice-session state machine.
//!
//! A session starts in step A with ten execution tries. Solving the task in A
//! ends it; running out of tries moves it to step B, where the learner gets
//! one piece of feedback according to a randomly assigned method, and then to
//! step C with a fresh set of tries.
//!
//! State only changes by applying [`Event`]s, and the `decide_*` methods only
//! compute events, so a session's log is enough to rebuild it.

use pquiz_core::hint::next_step;
use pquiz_core::text::parse_code;
use pquiz_core::{run, Code, ParseError, RunError, Status, TaskSpec, DEFAULT_STEP_CAP};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quizdoc::QuizDoc;

pub const TRIES: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    A,
    B,
    C,
    #[serde(rename = "done")]
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Method {
    NoHint,
    NextStep,
    #[serde(rename = "pquizsyn")]
    PQuizSyn,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::NoHint, Method::NextStep, Method::PQuizSyn];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Outcome {
    SolvedA,
    Proceeded,
    SolvedC,
    FailedC,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Feedback {
    None,
    /// The last attempt with one edit applied towards the solution.
    NextStep { code: String },
    Quiz { quiz: QuizDoc },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum Event {
    #[serde(rename_all = "camelCase")]
    Created { session_id: String, task_id: String },
    Ran {
        code: String,
        #[serde(with = "status_name")]
        status: Status,
        steps: usize,
    },
    #[serde(rename_all = "camelCase")]
    MethodAssigned { method: Method },
    #[serde(rename_all = "camelCase")]
    FeedbackIssued { feedback: Feedback },
    QuizAnswered { choice: usize, correct: bool },
}

pub(crate) mod status_name {
    use pquiz_core::Status;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    const ALL: [Status; 4] = [Status::Success, Status::Crash, Status::Timeout, Status::Incomplete];

    pub fn serialize<S: Serializer>(s: &Status, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(s.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Status, D::Error> {
        let name = String::deserialize(de)?;
        ALL.into_iter().find(|s| s.name() == name).ok_or_else(|| D::Error::custom(format!("unknown status '{name}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunRecord {
    pub step: Step,
    pub code: String,
    #[serde(with = "status_name")]
    pub status: Status,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Answer {
    pub choice: usize,
    pub correct: bool,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("unknown task '{0}'")]
    UnknownTask(String),
    #[error("unknown session '{0}'")]
    UnknownSession(String),
    #[error("{op} is not allowed in step {step:?}")]
    BadStep { op: &'static str, step: Step },
    #[error("feedback was already issued")]
    AlreadyIssued,
    #[error("no tries left")]
    OutOfTries,
    #[error("no quiz was issued")]
    NoQuiz,
    #[error("choice {choice} out of range for {len} choices")]
    IndexOutOfRange { choice: usize, len: usize },
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Rejected(#[from] RunError),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("event log: {0}")]
    Log(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Session {
    pub id: String,
    pub task_id: String,
    pub step: Step,
    pub tries_left: u8,
    pub method: Option<Method>,
    pub feedback: Option<Feedback>,
    pub answer: Option<Answer>,
    pub outcome: Option<Outcome>,
    pub runs: Vec<RunRecord>,
    /// Number of events applied so far.
    pub version: usize,
}

impl Session {
    pub fn created(id: &str, task_id: &str) -> Event {
        Event::Created { session_id: id.to_string(), task_id: task_id.to_string() }
    }

    /// Rebuilds a session from its complete log.
    pub fn replay(events: &[Event]) -> Result<Session, SessionError> {
        let (first, rest) = events.split_first().ok_or_else(|| SessionError::Log("empty log".into()))?;
        let mut s = Session::start(first)?;
        for e in rest {
            s.apply(e)?;
        }
        Ok(s)
    }

    pub fn start(event: &Event) -> Result<Session, SessionError> {
        let Event::Created { session_id, task_id } = event else {
            return Err(SessionError::Log("log does not start with a creation event".into()));
        };
        Ok(Session {
            id: session_id.clone(),
            task_id: task_id.clone(),
            step: Step::A,
            tries_left: TRIES,
            method: None,
            feedback: None,
            answer: None,
            outcome: None,
            runs: Vec::new(),
            version: 1,
        })
    }

    /// The last code run in step A; feedback is computed against it.
    pub fn last_attempt(&self) -> Option<&str> {
        self.runs.iter().rev().find(|r| r.step == Step::A).map(|r| r.code.as_str())
    }

    fn illegal(&self, what: &str) -> SessionError {
        SessionError::Log(format!("{what} in step {:?}", self.step))
    }

    fn bad(&self, op: &'static str) -> SessionError {
        SessionError::BadStep { op, step: self.step }
    }

    /// Applies one event, rejecting any that the state machine forbids.
    pub fn apply(&mut self, event: &Event) -> Result<(), SessionError> {
        match event {
            Event::Created { .. } => return Err(self.illegal("second creation event")),
            Event::Ran { code, status, steps } => {
                if !matches!(self.step, Step::A | Step::C) || self.tries_left == 0 {
                    return Err(self.illegal("run"));
                }
                self.tries_left -= 1;
                self.runs.push(RunRecord { step: self.step, code: code.clone(), status: *status, steps: *steps });
                match (self.step, *status == Status::Success, self.tries_left) {
                    (Step::A, true, _) => {
                        self.step = Step::Done;
                        self.outcome = Some(Outcome::SolvedA);
                    }
                    (Step::C, true, _) => {
                        self.step = Step::Done;
                        self.outcome = Some(Outcome::SolvedC);
                    }
                    (Step::A, false, 0) => {
                        self.step = Step::B;
                        self.outcome = Some(Outcome::Proceeded);
                    }
                    (Step::C, false, 0) => {
                        self.step = Step::Done;
                        self.outcome = Some(Outcome::FailedC);
                    }
                    _ => {}
                }
            }
            Event::MethodAssigned { method } => {
                if self.step != Step::B || self.method.is_some() {
                    return Err(self.illegal("method assignment"));
                }
                self.method = Some(*method);
            }
            Event::FeedbackIssued { feedback } => {
                if self.step != Step::B || self.method.is_none() || self.feedback.is_some() {
                    return Err(self.illegal("feedback"));
                }
                self.feedback = Some(feedback.clone());
                if !matches!(feedback, Feedback::Quiz { .. }) {
                    self.enter_c();
                }
            }
            Event::QuizAnswered { choice, correct } => {
                let Some(Feedback::Quiz { quiz }) = &self.feedback else {
                    return Err(self.illegal("answer without a quiz"));
                };
                if self.step != Step::B || self.answer.is_some() || *choice >= quiz.choices.len() {
                    return Err(self.illegal("answer"));
                }
                self.answer = Some(Answer { choice: *choice, correct: *correct });
                self.enter_c();
            }
        }
        self.version += 1;
        Ok(())
    }

    fn enter_c(&mut self) {
        self.step = Step::C;
        self.tries_left = TRIES;
    }

    /// Events for running `src` on `task`. Unparseable or out-of-store code
    /// is rejected without using a try. `assign` picks the feedback method
    /// if this run exhausts step A.
    pub fn decide_run(
        &self,
        src: &str,
        task: &TaskSpec,
        assign: impl FnOnce() -> Method,
    ) -> Result<(Vec<Event>, pquiz_core::ExecutionResult), SessionError> {
        if !matches!(self.step, Step::A | Step::C) {
            return Err(self.bad("run"));
        }
        if self.tries_left == 0 {
            return Err(SessionError::OutOfTries);
        }
        let code = parse_code(src)?;
        let result = run(&code, task, DEFAULT_STEP_CAP)?;
        let mut events = vec![Event::Ran { code: code.to_string(), status: result.status, steps: result.steps_used }];
        if self.step == Step::A && result.status != Status::Success && self.tries_left == 1 {
            events.push(Event::MethodAssigned { method: assign() });
        }
        Ok((events, result))
    }

    /// The one feedback event of step B. `quiz` is only called for the pop
    /// quiz method; when it yields nothing the learner gets a next-step hint.
    pub fn decide_feedback(
        &self,
        solution: &Code,
        quiz: impl FnOnce(&Code) -> Option<QuizDoc>,
    ) -> Result<Event, SessionError> {
        if self.feedback.is_some() {
            return Err(SessionError::AlreadyIssued);
        }
        if self.step != Step::B {
            return Err(self.bad("feedback"));
        }
        let method = self.method.ok_or_else(|| SessionError::Log("step B without a method".into()))?;
        let attempt = self
            .last_attempt()
            .map(parse_code)
            .transpose()?
            .ok_or_else(|| SessionError::Log("step B without an attempt".into()))?;
        let hint = || Feedback::NextStep { code: next_step(&attempt, solution).unwrap_or(attempt.clone()).to_string() };
        let feedback = match method {
            Method::NoHint => Feedback::None,
            Method::NextStep => hint(),
            Method::PQuizSyn => match quiz(&attempt) {
                Some(q) => Feedback::Quiz { quiz: q },
                None => hint(),
            },
        };
        Ok(Event::FeedbackIssued { feedback })
    }

    pub fn decide_answer(&self, choice: usize) -> Result<Event, SessionError> {
        if self.step != Step::B {
            return Err(self.bad("quiz answer"));
        }
        let Some(Feedback::Quiz { quiz }) = &self.feedback else {
            return Err(SessionError::NoQuiz);
        };
        if choice >= quiz.choices.len() {
            return Err(SessionError::IndexOutOfRange { choice, len: quiz.choices.len() });
        }
        Ok(Event::QuizAnswered { choice, correct: choice == quiz.correct })
    }
}
