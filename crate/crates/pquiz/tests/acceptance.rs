//! Acceptance suite: one line per criterion, each with its own time limit.
//!
//! Run with `cargo test -p pquiz --test acceptance`.

mod support;

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use pquiz::catalog;
use pquiz::enumerate::{enumerate, EnumParams};
use pquiz::service::{router, session_view, Config, Service};
use pquiz::session::{Event, Session, Step};
use pquiz_core::code::code_distance;
use pquiz_core::sketch::sketch_distance;
use pquiz_core::text::parse_sketch;
use pquiz_core::{
    check_solves, generate_popquiz, get_sketch, red_codes, run, Action, Code, Construct, Domain, PipelineParams,
    Sketch, SketchNode, TaskSpec, Variant,
};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde_json::{json, Value};
use support::*;
use tower::ServiceExt;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn s(x: &str) -> Sketch {
    parse_sketch(x).unwrap()
}

// ---------------------------------------------------------------------------
// substructures and reductions

fn substructure_oracle() -> Outcome {
    let got = Sketch::of(&code(C_STAR)).substructures();
    let want = [
        s("Run"),
        s("Run{RepeatUntil(goal)}"),
        s("Run{RepeatUntil(goal){IfElse(B)}}"),
        s("Run{RepeatUntil(goal){IfElse(B){}{IfElse(B)}}}"),
    ];
    ensure!(got == want, "got {got:?}");
    Ok("4 substructures in depth order".into())
}

fn reduction_oracle() -> Outcome {
    let got = red_codes(&code(C_STAR), &s("Run{RepeatUntil(goal)}")).map_err(|e| e.to_string())?;
    let want: BTreeSet<Code> = ["Run{RepeatUntil(goal){move}}", "Run{RepeatUntil(goal){turnRight}}", "Run{RepeatUntil(goal){turnLeft}}"]
        .into_iter()
        .map(code)
        .collect();
    ensure!(got == want, "got {:?}", got.iter().map(Code::to_string).collect::<Vec<_>>());
    Ok("exactly the 3 listed codes".into())
}

// ---------------------------------------------------------------------------
// stage 1

/// Depth-`d` prefix of a construct forest, written independently of the
/// library's truncation.
fn cut(nodes: &[SketchNode], d: usize) -> Vec<SketchNode> {
    if d == 0 {
        return Vec::new();
    }
    nodes
        .iter()
        .map(|n| SketchNode { construct: n.construct, body: cut(&n.body, d - 1), else_body: cut(&n.else_body, d - 1) })
        .collect()
}

fn depth(nodes: &[SketchNode]) -> usize {
    nodes.iter().map(|n| 1 + depth(&n.body).max(depth(&n.else_body))).max().unwrap_or(0)
}

fn subs_oracle(s: &Sketch) -> Vec<Sketch> {
    (0..=depth(&s.body)).map(|d| Sketch { body: cut(&s.body, d) }).collect()
}

/// Removes each construct with probability `p`, splicing its bodies.
fn drop_some(nodes: &[SketchNode], rng: &mut pquiz_core::Rng, p: f64) -> Vec<SketchNode> {
    let mut out = Vec::new();
    for n in nodes {
        let body = drop_some(&n.body, rng, p);
        let else_body = drop_some(&n.else_body, rng, p);
        if rng.gen_bool(p) {
            out.extend(body);
            out.extend(else_body);
        } else {
            out.push(SketchNode { construct: n.construct, body, else_body });
        }
    }
    out
}

fn students(sol: &Sketch, rng: &mut pquiz_core::Rng) -> Vec<(&'static str, Sketch)> {
    let mut out = vec![("Stu-A", Sketch::root())];
    if sol.node_count() >= 2 {
        loop {
            let b = Sketch { body: drop_some(&sol.body, rng, 0.5) };
            if b.node_count() >= 1 && b.node_count() < sol.node_count() && b.validate().is_ok() {
                out.push(("Stu-B", b));
                break;
            }
        }
    }
    out.push(("Stu-C", sol.clone()));
    let mut d = sol.clone();
    for _ in 0..rng.gen_range(1..=2) {
        let bigger: Vec<Sketch> =
            d.one_hop(&Construct::ALL).into_iter().filter(|x| x.node_count() == d.node_count() + 1).collect();
        d = bigger.choose(rng).expect("an insertion always exists").clone();
    }
    out.push(("Stu-D", d));
    out
}

fn stage1_adaptivity() -> Outcome {
    let mut rng = rng(0x5_7a6e);
    let mut sketches = BTreeSet::new();
    let mut k = 0;
    while sketches.len() < 150 {
        let dom = if k % 2 == 0 { Domain::Hoc } else { Domain::Karel };
        k += 1;
        let sk = Sketch::of(&random_code(&mut rng, dom, 14));
        if sk.node_count() >= 1 && depth(&sk.body) <= 4 {
            sketches.insert(sk);
        }
    }
    let (mut checked, mut radius_one) = (0, 0);
    for sol in &sketches {
        let subs = subs_oracle(sol);
        ensure!(sol.substructures() == subs, "substructures of {sol}");
        for (who, st) in students(sol, &mut rng) {
            let (got, lhat) = get_sketch(&st, sol);
            let dists: Vec<usize> = subs.iter().map(|x| sketch_distance(&st, x)).collect();
            let min = *dists.iter().min().unwrap();
            let want_lhat = min.max(1);
            ensure!(lhat == want_lhat, "{who} {st} vs {sol}: l̂ {lhat}, expected {want_lhat}");
            ensure!(subs.contains(&got), "{who}: {got} is not a substructure of {sol}");
            let d = sketch_distance(&st, &got);
            ensure!(d <= lhat, "{who}: {got} is {d} away from {st}");
            let best = subs
                .iter()
                .zip(&dists)
                .filter(|(_, &x)| x <= want_lhat)
                .map(|(x, _)| sketch_distance(x, sol))
                .min()
                .unwrap();
            ensure!(sketch_distance(&got, sol) == best, "{who}: {got} not closest to {sol}");
            if who == "Stu-C" {
                ensure!(got == *sol, "Stu-C got {got} for {sol}");
            }
            if d > min {
                radius_one += 1;
            }
            checked += 1;
        }
    }
    Ok(format!(
        "{} solution sketches, {checked} student cases; {radius_one} used the radius-1 floor",
        sketches.len()
    ))
}

// ---------------------------------------------------------------------------
// generation volume

fn generation_volume() -> Outcome {
    let mut lines = Vec::new();
    for id in ["hoc-maze", "karel-fill"] {
        let e = catalog::find(id).unwrap();
        let p = EnumParams { budget: Duration::from_secs(300), ..Default::default() };
        let rows = enumerate(&e.task, &e.solution, &p).map_err(|e| e.to_string())?;
        for r in &rows {
            ensure!(!r.timed_out, "{id} {}: budget exhausted", r.sketch);
            ensure!(r.tasks >= r.codes, "{id} {}: {} tasks < {} codes", r.sketch, r.tasks, r.codes);
            ensure!(r.tasks >= 50, "{id} {}: only {} pairs", r.sketch, r.tasks);
        }
        lines.push(format!("{id} pairs={:?}", rows.iter().map(|r| r.tasks).collect::<Vec<_>>()));
    }
    Ok(lines.join(", "))
}

// ---------------------------------------------------------------------------
// quizzes

struct Case {
    task: TaskSpec,
    solution: Code,
    students: Vec<Code>,
}

fn cases() -> Vec<Case> {
    let hoc = catalog::find("hoc-maze").unwrap();
    let karel = catalog::find("karel-fill").unwrap();
    vec![
        Case {
            task: hoc.task,
            solution: hoc.solution,
            students: [
                "Run{move; turnRight; move}",
                "Run{RepeatUntil(goal){move}}",
                "Run{RepeatUntil(goal){IfElse(pathAhead){turnLeft}{IfElse(pathRight){turnRight}{move}}}}",
                "Run{RepeatUntil(goal){Repeat(2){move}; If(pathRight){turnRight}}}",
            ]
            .map(code)
            .to_vec(),
        },
        Case {
            task: karel.task,
            solution: karel.solution,
            students: [
                "Run{move; putMarker; move}",
                "Run{While(pathAhead){move}}",
                "Run{While(noPathAhead){putMarker; If(markersPresent){move}}}",
                "Run{While(pathAhead){move; IfElse(noMarkersPresent){putMarker}{Repeat(2){turnLeft}}}}",
            ]
            .map(code)
            .to_vec(),
        },
    ]
}

struct QuizStats {
    quizzes: usize,
    per_variant: HashMap<Variant, usize>,
    failures: usize,
}

fn generate_all() -> Result<QuizStats, String> {
    let mut st = QuizStats { quizzes: 0, per_variant: HashMap::new(), failures: 0 };
    for seed in 0..3u64 {
        for case in cases() {
            for att in &case.students {
                for v in Variant::ALL {
                    let p = PipelineParams { rng_seed: seed, ..Default::default() };
                    let qs = match generate_popquiz(&case.task, &case.solution, att, v, &p) {
                        Ok(qs) => qs,
                        Err(e) => {
                            // only RedCode may come up empty, and only when stage 1 picks
                            // the full solution sketch, which has no reduction
                            let (picked, _) = get_sketch(&Sketch::of(att), &Sketch::of(&case.solution));
                            ensure!(
                                v == Variant::RedCode && picked == Sketch::of(&case.solution),
                                "{v} {att}: no quiz ({e})"
                            );
                            st.failures += 1;
                            continue;
                        }
                    };
                    for q in &qs {
                        check_quiz(q, &case.solution, att, v)?;
                    }
                    st.quizzes += qs.len();
                    *st.per_variant.entry(v).or_default() += qs.len();
                }
            }
        }
    }
    Ok(st)
}

fn check_quiz(q: &pquiz_core::Quiz, solution: &Code, att: &Code, v: Variant) -> Result<(), String> {
    let full = &q.provenance.full_code;
    let tag = format!("{v} {att} -> {full}");
    ensure!(check_solves(full, &q.task), "{tag}: full code does not solve its task");
    ensure!(q.blanked.blank_count() == 1, "{tag}: {} blanks", q.blanked.blank_count());
    ensure!(q.choices.as_slice() == q.task.domain.actions(), "{tag}: choices {:?}", q.choices);
    let solving: Vec<usize> = (0..q.choices.len()).filter(|&i| check_solves(&q.fill(i).unwrap(), &q.task)).collect();
    ensure!(solving == [q.correct], "{tag}: solving choices {solving:?}, correct {}", q.correct);
    ensure!(q.fill(q.correct).as_ref() == Some(full), "{tag}: correct choice does not restore the code");
    let student = Sketch::of(att);
    match v {
        Variant::PQuizSyn => ensure!(code_distance(full, solution) >= 2, "{tag}: too close to the solution"),
        Variant::FullHop => ensure!(q.provenance.sketch == Sketch::of(solution), "{tag}: not the solution sketch"),
        Variant::OneHop => {
            ensure!(sketch_distance(&student, &q.provenance.sketch) == 1, "{tag}: not one hop from {student}")
        }
        Variant::RedCode => {
            let reds = red_codes(solution, &q.provenance.sketch).map_err(|e| e.to_string())?;
            ensure!(reds.contains(full), "{tag}: not a reduction of the solution");
        }
    }
    Ok(())
}

fn quiz_validity(stats: &Result<QuizStats, String>) -> Outcome {
    let st = stats.as_ref().map_err(Clone::clone)?;
    ensure!(st.quizzes >= 200, "only {} quizzes", st.quizzes);
    Ok(format!("{} quizzes all valid ({} RedCode runs at the full sketch produced none)", st.quizzes, st.failures))
}

fn variant_contracts(stats: &Result<QuizStats, String>) -> Outcome {
    let st = stats.as_ref().map_err(Clone::clone)?;
    for v in Variant::ALL {
        ensure!(st.per_variant.get(&v).copied().unwrap_or(0) > 0, "no quizzes for {v}");
    }
    let mut per: Vec<String> = Variant::ALL.iter().map(|v| format!("{v}={}", st.per_variant[v])).collect();
    per.sort();
    Ok(per.join(" "))
}

// ---------------------------------------------------------------------------
// metrics

fn metric_properties() -> Outcome {
    let mut r = rng(0x3e7);
    for i in 0..10_000 {
        let dom = if i % 2 == 0 { Domain::Hoc } else { Domain::Karel };
        let [a, b, c] = [0; 3].map(|_| random_code(&mut r, dom, 10));
        let ab = code_distance(&a, &b);
        ensure!(code_distance(&a, &a) == 0, "D_C({a},{a}) != 0");
        ensure!(ab == code_distance(&b, &a), "D_C asymmetric on {a}, {b}");
        ensure!((ab == 0) == (a == b), "D_C zero on distinct {a}, {b}");
        ensure!(code_distance(&a, &c) <= ab + code_distance(&b, &c), "D_C triangle on {a}, {b}, {c}");
        let [x, y, z] = [0; 3].map(|_| Sketch::of(&random_code(&mut r, dom, 14)));
        let xy = sketch_distance(&x, &y);
        ensure!(sketch_distance(&x, &x) == 0, "D_S({x},{x}) != 0");
        ensure!(xy == sketch_distance(&y, &x), "D_S asymmetric on {x}, {y}");
        ensure!((xy == 0) == (x == y), "D_S zero on distinct {x}, {y}");
        ensure!(sketch_distance(&x, &z) <= xy + sketch_distance(&y, &z), "D_S triangle on {x}, {y}, {z}");
    }
    let (mut codes, mut sketches) = (0, 0);
    while codes < 500 || sketches < 500 {
        let dom = if (codes + sketches) % 2 == 0 { Domain::Hoc } else { Domain::Karel };
        let (a, b) = (random_code(&mut r, dom, 3), random_code(&mut r, dom, 3));
        let (ta, tb) = (a.to_tree(), b.to_tree());
        if codes < 500 && nodes(&ta) <= 4 && nodes(&tb) <= 4 {
            ensure!(code_distance(&a, &b) == brute_force(&ta, &tb), "D_C({a},{b}) disagrees with search");
            codes += 1;
        }
        let (x, y) = (Sketch::of(&random_code(&mut r, dom, 8)), Sketch::of(&random_code(&mut r, dom, 8)));
        let (tx, ty) = (x.to_tree(), y.to_tree());
        if sketches < 500 && nodes(&tx) <= 4 && nodes(&ty) <= 4 {
            ensure!(sketch_distance(&x, &y) == brute_force(&tx, &ty), "D_S({x},{y}) disagrees with search");
            sketches += 1;
        }
    }
    Ok("10^4 triples per metric; 500 + 500 pairs match exhaustive search".into())
}

// ---------------------------------------------------------------------------
// emulator

/// Marker grid obtained by replaying the trace by hand.
fn replay(task: &TaskSpec, trace: &[pquiz_core::emulator::TraceStep]) -> Vec<i64> {
    let mut m: Vec<i64> = task.pre_markers.iter().map(|&k| k as i64).collect();
    for t in trace.iter().filter(|t| !t.crashed) {
        let i = t.pose.row * task.size + t.pose.col;
        match t.action {
            Action::PutMarker => m[i] += 1,
            Action::PickMarker => m[i] -= 1,
            _ => {}
        }
    }
    m
}

fn emulator_replay() -> Outcome {
    let mut r = rng(0xe3);
    let mut karel = 0;
    for i in 0..1000 {
        let dom = if i % 2 == 0 { Domain::Hoc } else { Domain::Karel };
        let c = random_code(&mut r, dom, 12);
        let t = random_task(&mut r, dom, 2 + i % 9);
        let a = run(&c, &t, 1000).map_err(|e| e.to_string())?;
        let b = run(&c, &t, 1000).map_err(|e| e.to_string())?;
        ensure!(a == b, "case {i}: {c} ran differently twice");
        ensure!(a.steps_used <= 1000, "case {i}: step cap exceeded");
        if dom == Domain::Karel {
            let want: Vec<i64> = a.final_markers.iter().map(|&k| k as i64).collect();
            ensure!(replay(&t, &a.trace) == want, "case {i}: trace replay disagrees for {c}");
            karel += 1;
        }
    }
    Ok(format!("1000 pairs deterministic, {karel} Karel traces conserve markers"))
}

// ---------------------------------------------------------------------------
// sessions

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() })
}

fn step_rank(s: &str) -> usize {
    ["A", "B", "C", "done"].iter().position(|x| *x == s).expect("known step")
}

/// One scripted learner; returns the number of feedback payloads received.
async fn script(app: &Router, svc: &Service, rng: &mut pquiz_core::Rng, k: usize) -> Result<usize, String> {
    let entry = if k % 2 == 0 { catalog::find("hoc-maze") } else { catalog::find("karel-fill") }.unwrap();
    let wrong = match entry.task.domain {
        Domain::Hoc => ["Run{move}", "Run{turnLeft; move}", "Run{RepeatUntil(goal){move}}"],
        Domain::Karel => ["Run{move; putMarker}", "Run{While(pathAhead){move}}", "Run{putMarker}"],
    };
    let solve = entry.solution.to_string();
    let (_, v) = call(app, "POST", "/api/sessions", Some(json!({"taskId": entry.id}))).await;
    let id = v["id"].as_str().ok_or("no id")?.to_string();
    let base = format!("/api/sessions/{id}");
    let mut path = vec!["A".to_string()];
    let mut feedbacks = 0;
    let solves_in_a = rng.gen_bool(0.1);
    for _ in 0..60 {
        let (_, now) = call(app, "GET", &base, None).await;
        let step = now["step"].as_str().ok_or("no step")?.to_string();
        if path.last() != Some(&step) {
            path.push(step.clone());
        }
        if step == "done" {
            break;
        }
        let roll: f64 = rng.gen();
        let (status, _) = if roll < 0.05 {
            call(app, "POST", &format!("{base}/run"), Some(json!({"code": "Run{move"}))).await
        } else if roll < 0.10 {
            let (st, v) = call(app, "POST", &format!("{base}/feedback"), None).await;
            feedbacks += usize::from(st == StatusCode::OK);
            (st, v)
        } else if roll < 0.15 {
            call(app, "POST", &format!("{base}/quiz/answer"), Some(json!({"choice": rng.gen_range(0..6)}))).await
        } else {
            match step.as_str() {
                "A" | "C" => {
                    let good = (step == "A" && solves_in_a) || (step == "C" && rng.gen_bool(0.15));
                    let src = if good { solve.clone() } else { wrong.choose(rng).unwrap().to_string() };
                    call(app, "POST", &format!("{base}/run"), Some(json!({"code": src}))).await
                }
                _ if now["feedback"].is_null() => {
                    let (st, v) = call(app, "POST", &format!("{base}/feedback"), None).await;
                    feedbacks += usize::from(st == StatusCode::OK);
                    (st, v)
                }
                _ => {
                    let n = now["feedback"]["quiz"]["choices"].as_array().map_or(1, Vec::len);
                    call(app, "POST", &format!("{base}/quiz/answer"), Some(json!({"choice": rng.gen_range(0..n)}))).await
                }
            }
        };
        ensure!(
            [StatusCode::OK, StatusCode::BAD_REQUEST, StatusCode::CONFLICT].contains(&status),
            "session {id}: unexpected status {status}"
        );
    }
    let ranks: Vec<usize> = path.iter().map(|s| step_rank(s)).collect();
    ensure!(ranks.windows(2).all(|w| w[0] < w[1]), "session {id}: steps {path:?}");
    let (_, fin) = call(app, "GET", &base, None).await;
    if fin["outcome"] != "solvedA" {
        ensure!(path.contains(&"B".to_string()), "session {id} skipped B: {path:?}");
    }
    ensure!(feedbacks <= 1, "session {id}: {feedbacks} feedback payloads");
    let log = svc.read_log(&id).map_err(|e| e.to_string())?;
    let issued = log.iter().filter(|e| matches!(e, Event::FeedbackIssued { .. })).count();
    ensure!(issued == feedbacks, "session {id}: log has {issued} feedback events, client saw {feedbacks}");
    let replayed = Session::replay(&log).map_err(|e| e.to_string())?;
    ensure!(replayed == svc.get(&id).map_err(|e| e.to_string())?, "session {id}: replay differs");
    ensure!(session_view(&replayed) == fin, "session {id}: replayed view differs from the API");
    ensure!(replayed.step == Step::Done || replayed.step != Step::A || replayed.runs.len() < 10, "session {id} stuck");
    Ok(feedbacks)
}

fn session_state_machine() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let svc = Arc::new(Service::new(Config { data_dir: Some(dir.path().to_path_buf()), rng_seed: 77 }).unwrap());
    let app = router(svc.clone());
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    let mut r = rng(0x5e55);
    let mut with_feedback = 0;
    for k in 0..1000 {
        with_feedback += rt.block_on(script(&app, &svc, &mut r, k))?;
    }
    // a second service over the same directory sees identical sessions
    let again = Service::new(Config { data_dir: Some(dir.path().to_path_buf()), rng_seed: 0 }).unwrap();
    let ids: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path().file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    ensure!(ids.len() == 1000, "{} logs", ids.len());
    for id in &ids {
        ensure!(again.get(id).ok() == svc.get(id).ok(), "session {id} differs after restart");
    }
    Ok(format!("1000 sessions, {with_feedback} received feedback, all logs replay identically"))
}

// ---------------------------------------------------------------------------

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, limit: Duration, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if took <= limit => (true, d),
            Ok(d) => (false, format!("{d}; over the {limit:?} limit")),
            Err(e) => (false, e),
        };
        failed += usize::from(!ok);
        println!("{} {name}: {detail} [{:.2}s]", if ok { "PASS" } else { "FAIL" }, took.as_secs_f64());
    };
    let secs = Duration::from_secs;
    report("substructure oracle", secs(1), &mut substructure_oracle);
    report("reduction oracle", secs(1), &mut reduction_oracle);
    report("stage-1 adaptivity", secs(30), &mut stage1_adaptivity);
    report("generation volume", secs(2 * 7 * 300), &mut generation_volume);
    let mut stats = Err("not run".to_string());
    report("quiz validity", secs(600), &mut || {
        stats = generate_all();
        quiz_validity(&stats)
    });
    report("variant contracts", secs(600), &mut || variant_contracts(&stats));
    report("metric properties", secs(60), &mut metric_properties);
    report("emulator determinism and replay", secs(60), &mut emulator_replay);
    report("session state machine", secs(600), &mut session_state_machine);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
