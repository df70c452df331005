//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use pquiz_core::code::code_distance;
use pquiz_core::text::parse_code;
use pquiz_core::{generate_popquiz, run, Code, PipelineParams, Status, TaskSpec, Variant, DEFAULT_STEP_CAP};

use crate::enumerate::{self, EnumParams};
use crate::quizdoc::QuizDoc;
use crate::service::{self, Config, Service};
use crate::taskfile;

pub const EXIT_PARSE: i32 = 1;
pub const EXIT_PIPELINE: i32 = 2;
pub const EXIT_RUN: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "pquiz", version, about = "Pop-quiz synthesis for block-based programming tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Task file.
    #[arg(long)]
    task: PathBuf,
    /// File holding the solution code.
    #[arg(long)]
    solution: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Minimum code distance between quiz code and solution.
    #[arg(long, default_value_t = 2)]
    theta: usize,
    /// Reject tasks that a strictly shorter code also solves.
    #[arg(long)]
    check_minimality: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate quizzes for one student attempt.
    Synth {
        #[command(flatten)]
        common: Common,
        /// File holding the student's attempt.
        #[arg(long)]
        attempt: PathBuf,
        #[arg(long, default_value = "pquizsyn", value_parser = parse_variant)]
        variant: Variant,
        #[arg(long, default_value_t = 3)]
        count: usize,
        /// Directory the quiz documents are written to.
        #[arg(long)]
        out: PathBuf,
    },
    /// Count distinct codes and quizzes per substructure of the solution.
    Enumerate {
        #[command(flatten)]
        common: Common,
        /// Seconds allowed per substructure.
        #[arg(long, default_value_t = 300)]
        budget: u64,
    },
    /// Execute a code on a task.
    Run {
        #[arg(long)]
        task: PathBuf,
        /// File holding the code.
        #[arg(long, visible_alias = "solution")]
        code: PathBuf,
    },
    /// Serve the practice API on $PORT (default 8080).
    Serve {
        /// Directory for the per-session event logs.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::from_name(s).ok_or_else(|| "expected one of pquizsyn, fullhop, onehop, redcode".to_string())
}

struct Failure(i32, String);

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn load_task(path: &Path) -> Result<TaskSpec, Failure> {
    taskfile::parse(&read(path)?).map_err(|e| Failure(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn load_code(path: &Path) -> Result<Code, Failure> {
    parse_code(read(path)?.trim()).map_err(|e| Failure(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn params(c: &Common) -> PipelineParams {
    PipelineParams { theta_conceal: c.theta, check_minimality: c.check_minimality, rng_seed: c.seed, ..Default::default() }
}

fn synth(
    common: &Common,
    attempt: &Path,
    variant: Variant,
    count: usize,
    out_dir: &Path,
    out: &mut dyn Write,
) -> Result<(), Failure> {
    let task = load_task(&common.task)?;
    let solution = load_code(&common.solution)?;
    let attempt = load_code(attempt)?;
    let p = PipelineParams { max_quizzes: count, ..params(common) };
    if count == 0 {
        return Ok(());
    }
    let quizzes = generate_popquiz(&task, &solution, &attempt, variant, &p)
        .map_err(|e| Failure(EXIT_PIPELINE, format!("no quiz: {e}")))?;
    std::fs::create_dir_all(out_dir).map_err(|e| Failure(EXIT_PARSE, format!("{}: {e}", out_dir.display())))?;
    for (i, q) in quizzes.iter().enumerate() {
        let path = out_dir.join(format!("quiz-{i:03}.json"));
        std::fs::write(&path, QuizDoc::from_quiz(q).to_json() + "\n")
            .map_err(|e| Failure(EXIT_PARSE, format!("{}: {e}", path.display())))?;
        let _ = writeln!(
            out,
            "{}\tsketch={}\tlhat={}\tdistance={}\tquality={:.3}",
            path.display(),
            q.provenance.sketch,
            q.provenance.lhat,
            code_distance(&q.provenance.full_code, &solution),
            q.quality
        );
    }
    Ok(())
}

fn run_cmd(task: &Path, code: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let task = load_task(task)?;
    let code = load_code(code)?;
    let r = run(&code, &task, DEFAULT_STEP_CAP).map_err(|e| Failure(EXIT_RUN, format!("rejected: {e}")))?;
    let _ = writeln!(out, "status: {}", r.status.name());
    let _ = writeln!(out, "steps: {}", r.steps_used);
    for (i, s) in r.trace.iter().enumerate() {
        let mark = if s.crashed { " crash" } else { "" };
        let _ = writeln!(out, "{i}\t{},{},{}\t{}{mark}", s.pose.row, s.pose.col, s.pose.dir.letter(), s.action.name());
    }
    if r.status == Status::Success {
        Ok(())
    } else {
        Err(Failure(EXIT_RUN, String::new()))
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    match cli.command {
        Command::Synth { common, attempt, variant, count, out: dir } => synth(&common, &attempt, variant, count, &dir, out),
        Command::Enumerate { common, budget } => {
            let task = load_task(&common.task)?;
            let solution = load_code(&common.solution)?;
            let p = EnumParams { budget: Duration::from_secs(budget), pipeline: params(&common), ..Default::default() };
            let start = Instant::now();
            let rows = enumerate::enumerate(&task, &solution, &p).map_err(|e| Failure(EXIT_PIPELINE, e.to_string()))?;
            let _ = write!(out, "{}", enumerate::table(&rows));
            let _ = writeln!(err, "enumerated in {:.1}s", start.elapsed().as_secs_f64());
            for r in rows.iter().filter(|r| r.timed_out && budget > 0) {
                let _ = writeln!(err, "budget ran out for {}", r.sketch);
            }
            Ok(())
        }
        Command::Run { task, code } => run_cmd(&task, &code, out),
        Command::Serve { data_dir, seed } => {
            let port = match std::env::var("PORT") {
                Ok(p) => p.parse().map_err(|_| Failure(EXIT_USAGE, format!("bad PORT '{p}'")))?,
                Err(_) => 8080,
            };
            let svc = Service::new(Config { data_dir, rng_seed: seed }).map_err(|e| Failure(EXIT_PARSE, e.to_string()))?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| Failure(1, e.to_string()))?;
            rt.block_on(service::serve(Arc::new(svc), port)).map_err(|e| Failure(1, e.to_string()))
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli, out, err) {
        Ok(()) => 0,
        Err(Failure(code, msg)) => {
            if !msg.is_empty() {
                let _ = writeln!(err, "error: {msg}");
            }
            code
        }
    }
}
