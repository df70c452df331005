//! The practice service: session bookkeeping, event logs and the HTTP API.
//!
//! Every session has its own lock and, when a data directory is configured,
//! its own append-only log `<id>.jsonl` with one event per line. Logs found
//! in the directory at startup are replayed, so a restarted service picks up
//! where it left off.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::{Mutex, RwLock};
use pquiz_core::{generate_popquiz, Code, ExecutionResult, PipelineParams, Rng, TaskSpec, Variant};
use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::catalog::{self, Entry};
use crate::quizdoc::QuizDoc;
use crate::session::{Event, Feedback, Method, Session, SessionError};
use crate::taskfile;

#[derive(Debug, Clone, Default)]
pub struct Config {
    pub data_dir: Option<PathBuf>,
    pub rng_seed: u64,
}

struct Slot {
    session: Session,
    log: Option<File>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    seq: usize,
    event: Event,
}

pub struct Service {
    tasks: Vec<Entry>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Slot>>>>,
    data_dir: Option<PathBuf>,
    rng: Mutex<Rng>,
    quizzes: Mutex<HashMap<(String, String), Option<QuizDoc>>>,
    quiz_params: PipelineParams,
}

fn read_log(path: &Path) -> io::Result<Vec<Event>> {
    let mut events = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), i + 1)))?;
        events.push(rec.event);
    }
    Ok(events)
}

impl Service {
    pub fn new(config: Config) -> io::Result<Service> {
        let mut sessions = HashMap::new();
        if let Some(dir) = &config.data_dir {
            fs::create_dir_all(dir)?;
            for entry in fs::read_dir(dir)? {
                let path = entry?.path();
                if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
                    continue;
                }
                let session = Session::replay(&read_log(&path)?).map_err(|e| {
                    io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display()))
                })?;
                let log = OpenOptions::new().append(true).open(&path)?;
                sessions.insert(session.id.clone(), Arc::new(Mutex::new(Slot { session, log: Some(log) })));
            }
        }
        let quiz_params = PipelineParams { max_quizzes: 1, rng_seed: config.rng_seed, ..PipelineParams::default() };
        Ok(Service {
            tasks: catalog::bundled(),
            sessions: RwLock::new(sessions),
            data_dir: config.data_dir,
            rng: Mutex::new(Rng::seed_from_u64(config.rng_seed)),
            quizzes: Mutex::new(HashMap::new()),
            quiz_params,
        })
    }

    pub fn tasks(&self) -> &[Entry] {
        &self.tasks
    }

    pub fn task(&self, id: &str) -> Result<&Entry, SessionError> {
        self.tasks.iter().find(|e| e.id == id).ok_or_else(|| SessionError::UnknownTask(id.to_string()))
    }

    pub fn log_path(&self, id: &str) -> Option<PathBuf> {
        self.data_dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    /// All events recorded for a session, read back from disk.
    pub fn read_log(&self, id: &str) -> io::Result<Vec<Event>> {
        let path = self.log_path(id).ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, "no data directory"))?;
        read_log(&path)
    }

    fn slot(&self, id: &str) -> Result<Arc<Mutex<Slot>>, SessionError> {
        self.sessions.read().get(id).cloned().ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    /// Applies `events` to a copy of the session, appends them to the log
    /// and only then makes the new state visible.
    fn commit(slot: &mut Slot, events: &[Event]) -> Result<(), SessionError> {
        let mut next = slot.session.clone();
        let mut lines = Vec::with_capacity(events.len());
        for e in events {
            next.apply(e)?;
            let rec = Record { seq: next.version - 1, event: e.clone() };
            lines.push(serde_json::to_string(&rec).map_err(|e| SessionError::Log(e.to_string()))?);
        }
        if let Some(log) = &mut slot.log {
            for line in lines {
                // one write per record so a crash never leaves half a line
                log.write_all(format!("{line}\n").as_bytes()).map_err(|e| SessionError::Log(e.to_string()))?;
            }
            log.flush().map_err(|e| SessionError::Log(e.to_string()))?;
        }
        slot.session = next;
        Ok(())
    }

    pub fn create(&self, task_id: &str) -> Result<Session, SessionError> {
        self.task(task_id)?;
        let mut sessions = self.sessions.write();
        let id = loop {
            let id = format!("{:016x}", self.rng.lock().gen::<u64>());
            if !sessions.contains_key(&id) {
                break id;
            }
        };
        let created = Session::created(&id, task_id);
        let session = Session::start(&created)?;
        let log = match self.log_path(&id) {
            Some(path) => Some(
                OpenOptions::new().create_new(true).append(true).open(path).map_err(|e| SessionError::Log(e.to_string()))?,
            ),
            None => None,
        };
        let mut slot = Slot { session, log };
        if let Some(log) = &mut slot.log {
            let line = serde_json::to_string(&Record { seq: 0, event: created }).expect("events serialize");
            log.write_all(format!("{line}\n").as_bytes()).map_err(|e| SessionError::Log(e.to_string()))?;
        }
        let session = slot.session.clone();
        sessions.insert(id, Arc::new(Mutex::new(slot)));
        Ok(session)
    }

    pub fn get(&self, id: &str) -> Result<Session, SessionError> {
        Ok(self.slot(id)?.lock().session.clone())
    }

    pub fn submit_run(&self, id: &str, code: &str) -> Result<(ExecutionResult, Session), SessionError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock();
        let task = &self.task(&slot.session.task_id)?.task;
        let (events, result) = slot.session.decide_run(code, task, || {
            let i = self.rng.lock().gen_range(0..Method::ALL.len());
            Method::ALL[i]
        })?;
        Self::commit(&mut slot, &events)?;
        Ok((result, slot.session.clone()))
    }

    fn quiz_for(&self, task_id: &str, task: &TaskSpec, solution: &Code, attempt: &Code) -> Option<QuizDoc> {
        let key = (task_id.to_string(), attempt.to_string());
        if let Some(q) = self.quizzes.lock().get(&key) {
            return q.clone();
        }
        let doc = generate_popquiz(task, solution, attempt, Variant::PQuizSyn, &self.quiz_params)
            .ok()
            .and_then(|qs| qs.first().map(QuizDoc::from_quiz));
        self.quizzes.lock().insert(key, doc.clone());
        doc
    }

    pub fn request_feedback(&self, id: &str) -> Result<(Feedback, Session), SessionError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock();
        let entry = self.task(&slot.session.task_id)?;
        let event = slot
            .session
            .decide_feedback(&entry.solution, |attempt| self.quiz_for(entry.id, &entry.task, &entry.solution, attempt))?;
        Self::commit(&mut slot, std::slice::from_ref(&event))?;
        let Event::FeedbackIssued { feedback } = event else { unreachable!() };
        Ok((feedback, slot.session.clone()))
    }

    pub fn answer_quiz(&self, id: &str, choice: usize) -> Result<(bool, Session), SessionError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock();
        let event = slot.session.decide_answer(choice)?;
        Self::commit(&mut slot, std::slice::from_ref(&event))?;
        let Event::QuizAnswered { correct, .. } = event else { unreachable!() };
        Ok((correct, slot.session.clone()))
    }
}

/// What clients see of a feedback payload: the answer key stays hidden
/// until the quiz has been answered.
pub fn feedback_view(feedback: &Feedback, answered: bool) -> Value {
    let mut v = serde_json::to_value(feedback).expect("feedback serializes");
    if !answered {
        if let Some(q) = v.get_mut("quiz").and_then(Value::as_object_mut) {
            for k in ["correct", "fullCode", "seed", "quality"] {
                q.remove(k);
            }
        }
    }
    v
}

pub fn session_view(s: &Session) -> Value {
    let mut v = serde_json::to_value(s).expect("sessions serialize");
    if let Some(fb) = &s.feedback {
        v["feedback"] = feedback_view(fb, s.answer.is_some());
    }
    v
}

fn result_view(r: &ExecutionResult) -> Value {
    let pose = |p: &pquiz_core::Pose| json!({"row": p.row, "col": p.col, "dir": p.dir.letter().to_string()});
    json!({
        "status": r.status.name(),
        "stepsUsed": r.steps_used,
        "trace": r.trace.iter().map(|t| json!({
            "pose": pose(&t.pose),
            "action": t.action.name(),
            "crashed": t.crashed,
        })).collect::<Vec<_>>(),
        "finalPose": pose(&r.final_pose),
        "finalMarkers": r.final_markers,
    })
}

pub struct ApiError(SessionError);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        use SessionError::*;
        let (status, kind) = match &self.0 {
            UnknownTask(_) => (StatusCode::NOT_FOUND, "UnknownTask"),
            UnknownSession(_) => (StatusCode::NOT_FOUND, "UnknownSession"),
            BadStep { .. } => (StatusCode::CONFLICT, "BadStep"),
            AlreadyIssued => (StatusCode::CONFLICT, "AlreadyIssued"),
            OutOfTries => (StatusCode::CONFLICT, "OutOfTries"),
            NoQuiz => (StatusCode::CONFLICT, "NoQuiz"),
            IndexOutOfRange { .. } => (StatusCode::BAD_REQUEST, "IndexOutOfRange"),
            Parse(_) => (StatusCode::BAD_REQUEST, "ParseError"),
            Rejected(_) => (StatusCode::BAD_REQUEST, "Rejected"),
            BadRequest(_) => (StatusCode::BAD_REQUEST, "BadRequest"),
            Log(_) => (StatusCode::INTERNAL_SERVER_ERROR, "Internal"),
        };
        let mut body = json!({"error": kind, "message": self.0.to_string()});
        if let Parse(pquiz_core::ParseError::Syntax { position, .. }) = &self.0 {
            body["position"] = json!(position);
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn body<T: for<'de> Deserialize<'de>>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError(SessionError::BadRequest(e.to_string())))
}

/// Runs a service call off the async workers; quiz generation can take a
/// while.
async fn blocking<T: Send + 'static>(
    svc: &Arc<Service>,
    f: impl FnOnce(&Service) -> Result<T, SessionError> + Send + 'static,
) -> Result<T, ApiError> {
    let svc = svc.clone();
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ApiError(SessionError::Log(e.to_string())))?
        .map_err(ApiError)
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct CreateBody {
    task_id: String,
}

#[derive(Deserialize)]
struct RunBody {
    code: String,
}

#[derive(Deserialize)]
struct AnswerBody {
    choice: usize,
}

async fn list_tasks(State(svc): State<Arc<Service>>) -> Json<Value> {
    let tasks: Vec<Value> =
        svc.tasks().iter().map(|e| json!({"id": e.id, "title": e.title, "kind": e.task.domain.name()})).collect();
    Json(Value::Array(tasks))
}

async fn show_task(State(svc): State<Arc<Service>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let e = svc.task(&id)?;
    Ok(Json(json!({
        "id": e.id,
        "title": e.title,
        "kind": e.task.domain.name(),
        "task": taskfile::serialize(&e.task),
        "store": e.task.store.iter().map(|b| b.name()).collect::<Vec<_>>(),
        "maxBlocks": e.task.size_threshold,
    })))
}

async fn create_session(State(svc): State<Arc<Service>>, bytes: Bytes) -> ApiResult {
    let b: CreateBody = body(&bytes)?;
    let s = blocking(&svc, move |svc| svc.create(&b.task_id)).await?;
    Ok(Json(session_view(&s)))
}

async fn show_session(State(svc): State<Arc<Service>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    Ok(Json(session_view(&svc.get(&id)?)))
}

async fn run_code(State(svc): State<Arc<Service>>, UrlPath(id): UrlPath<String>, bytes: Bytes) -> ApiResult {
    let b: RunBody = body(&bytes)?;
    let (r, s) = blocking(&svc, move |svc| svc.submit_run(&id, &b.code)).await?;
    Ok(Json(json!({"result": result_view(&r), "triesLeft": s.tries_left, "step": s.step, "outcome": s.outcome})))
}

async fn feedback(State(svc): State<Arc<Service>>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let (fb, s) = blocking(&svc, move |svc| svc.request_feedback(&id)).await?;
    Ok(Json(json!({"method": s.method, "feedback": feedback_view(&fb, false), "step": s.step})))
}

async fn answer(State(svc): State<Arc<Service>>, UrlPath(id): UrlPath<String>, bytes: Bytes) -> ApiResult {
    let b: AnswerBody = body(&bytes)?;
    let (correct, s) = blocking(&svc, move |svc| svc.answer_quiz(&id, b.choice)).await?;
    Ok(Json(json!({"correct": correct, "step": s.step})))
}

pub fn router(svc: Arc<Service>) -> Router {
    Router::new()
        .route("/api/tasks", get(list_tasks))
        .route("/api/tasks/{id}", get(show_task))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(show_session))
        .route("/api/sessions/{id}/run", post(run_code))
        .route("/api/sessions/{id}/feedback", post(feedback))
        .route("/api/sessions/{id}/quiz/answer", post(answer))
        .with_state(svc)
}

pub async fn serve(svc: Arc<Service>, port: u16) -> io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(svc)).await
}
