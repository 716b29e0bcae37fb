use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use salbench_core::judgments::derive_scores;
use salbench_core::synth::{SynthBenchmark, SynthConfig};
use salbench_core::{Benchmark, JudgmentDataset};
use salbench_service::state::sides_swapped;
use salbench_service::*;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Fixture {
    _dir: tempfile::TempDir,
    manifest: PathBuf,
    log: PathBuf,
}

/// Two 24x24 images and four models: 7 questions per image.
fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let mut config = SynthConfig {
        n_images: 2,
        width: 24,
        height: 24,
        n_subjects: 3,
        ..SynthConfig::default()
    };
    config.models.truncate(4);
    SynthBenchmark::generate(&config).unwrap().write(dir.path()).unwrap();
    Fixture {
        manifest: dir.path().join("manifest.json"),
        log: dir.path().join("answers.jsonl"),
        _dir: dir,
    }
}

struct App {
    router: Router,
    clock: Arc<ManualClock>,
}

fn app(manifest: &Path, log: Option<&Path>, seed: u64) -> App {
    let clock = Arc::new(ManualClock::new(1_000_000));
    let config = ServiceConfig {
        manifest: manifest.to_path_buf(),
        log: log.map(Path::to_path_buf),
        seed,
        static_dir: None,
    };
    let state = AppState::open(&config, clock.clone()).unwrap();
    App {
        router: router(state),
        clock,
    }
}

impl App {
    async fn call(&self, req: Request<Body>) -> (StatusCode, Vec<u8>) {
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
    }

    async fn get(&self, uri: &str) -> (StatusCode, Vec<u8>) {
        self.call(Request::get(uri).body(Body::empty()).unwrap()).await
    }

    async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        let req = Request::post(uri)
            .header("content-type", "application/json")
            .body(Body::from(body.to_string()))
            .unwrap();
        let (s, b) = self.call(req).await;
        (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
    }

    async fn session(&self, subject: &str) -> String {
        let (s, v) = self.post("/session", json!({"subject_id": subject})).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        v["token"].as_str().unwrap().to_string()
    }

    async fn question(&self, token: &str) -> Option<QuestionView> {
        let (s, b) = self.get(&format!("/question?token={token}")).await;
        match s {
            StatusCode::OK => Some(serde_json::from_slice(&b).unwrap()),
            StatusCode::NO_CONTENT => None,
            other => panic!("GET /question returned {other}"),
        }
    }

    async fn answer(&self, token: &str, q: u64, choice: &str) -> (StatusCode, Value) {
        self.post("/answer", json!({"token": token, "question_id": q, "choice": choice}))
            .await
    }

    async fn export(&self) -> JudgmentDataset {
        let (s, b) = self.get("/export").await;
        assert_eq!(s, StatusCode::OK);
        JudgmentDataset::from_jsonl(std::str::from_utf8(&b).unwrap(), Path::new("export")).unwrap()
    }

    async fn progress(&self) -> Progress {
        let (s, b) = self.get("/progress").await;
        assert_eq!(s, StatusCode::OK);
        serde_json::from_slice(&b).unwrap()
    }
}

/// Map id shown on a side, taken from its URL.
fn map_of(url: &str) -> &str {
    url.rsplit('/').next().unwrap().strip_suffix(".png").unwrap()
}

fn questions(manifest: &Path) -> Vec<QuestionDef> {
    question_set(&Benchmark::load(manifest).unwrap()).unwrap()
}

#[tokio::test]
async fn answers_before_five_seconds_are_refused() {
    let f = fixture();
    let app = app(&f.manifest, None, 0);
    let t = app.session("s1").await;
    let q = app.question(&t).await.unwrap();
    app.clock.advance(4_900);
    let (s, v) = app.answer(&t, q.question_id, "left").await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["remaining_ms"], 100);
    app.clock.advance(100);
    let (s, v) = app.answer(&t, q.question_id, "left").await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["elapsed_ms"], 5_000);
    let (s, _) = app.answer(&t, q.question_id, "right").await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test]
async fn protocol_errors_map_to_status_codes() {
    let f = fixture();
    let app = app(&f.manifest, None, 0);
    let t = app.session("s1").await;
    assert_eq!(app.answer("nope", 0, "left").await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(app.get("/question?token=nope").await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(app.get("/question").await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(app.answer(&t, 999, "left").await.0, StatusCode::NOT_FOUND);
    // Answering a question that was never served.
    let q = app.question(&t).await.unwrap();
    let other = questions(&f.manifest)
        .into_iter()
        .find(|d| d.question_id != q.question_id)
        .unwrap();
    app.clock.advance(10_000);
    assert_eq!(app.answer(&t, other.question_id, "left").await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(app.post("/session", json!({"subject_id": "a b"})).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(app.post("/session", json!({"subject_id": ""})).await.0, StatusCode::BAD_REQUEST);
    let (s, _) = app.post("/answer", json!({"token": t, "question_id": q.question_id, "choice": "up"})).await;
    assert!(s.is_client_error());
}

#[tokio::test]
async fn sessions_are_idempotent_and_reserving_restarts_the_timer() {
    let f = fixture();
    let app = app(&f.manifest, None, 0);
    let t = app.session("s1").await;
    assert_eq!(app.session("s1").await, t);
    assert_ne!(app.session("s2").await, t);
    let q1 = app.question(&t).await.unwrap();
    app.clock.advance(4_000);
    // A reload shows the same question again with a fresh timer.
    let q2 = app.question(&t).await.unwrap();
    assert_eq!(q1.question_id, q2.question_id);
    assert_eq!(q2.served_at, q1.served_at + 4_000);
    app.clock.advance(4_000);
    assert_eq!(app.answer(&t, q1.question_id, "left").await.0, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn left_choice_is_stored_in_canonical_orientation() {
    let f = fixture();
    let defs = questions(&f.manifest);
    let app = app(&f.manifest, None, 7);
    let t = app.session("s1").await;
    let mut swapped_seen = [false; 2];
    while let Some(q) = app.question(&t).await {
        let def = defs.iter().find(|d| d.question_id == q.question_id).unwrap();
        let left = map_of(&q.left_url);
        let right = map_of(&q.right_url);
        let swapped = left == def.esm_b;
        assert_eq!(swapped, sides_swapped(7, "s1", q.question_id));
        assert_eq!((left, right), if swapped { (&*def.esm_b, &*def.esm_a) } else { (&*def.esm_a, &*def.esm_b) });
        swapped_seen[swapped as usize] = true;
        app.clock.advance(5_000);
        let (s, v) = app.answer(&t, q.question_id, "left").await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(v["chose_a"], !swapped);
    }
    assert_eq!(swapped_seen, [true, true]);
    // Every subject always choosing left yields l equal to the side assignment.
    for r in app.export().await.records() {
        let l = derive_scores(r).unwrap().l;
        assert_eq!(l, if sides_swapped(7, "s1", r.question_id) { 0.0 } else { 1.0 });
    }
}

#[tokio::test]
async fn full_session_exports_every_answer() {
    let f = fixture();
    let defs = questions(&f.manifest);
    assert_eq!(defs.len(), 14);
    let app = app(&f.manifest, Some(&f.log), 3);
    let subjects = ["ann", "bob"];
    let mut tokens = Vec::new();
    for s in subjects {
        tokens.push(app.session(s).await);
    }
    let mut orders = vec![Vec::new(); 2];
    // Interleave the two subjects; ann always picks left, bob alternates.
    for step in 0..defs.len() {
        for (i, t) in tokens.iter().enumerate() {
            let q = app.question(t).await.unwrap();
            assert_eq!(q.answered, step);
            orders[i].push(q.question_id);
            app.clock.advance(6_000);
            let choice = if i == 0 || step % 2 == 0 { "left" } else { "right" };
            assert_eq!(app.answer(t, q.question_id, choice).await.0, StatusCode::OK);
        }
    }
    for t in &tokens {
        assert!(app.question(t).await.is_none());
    }
    assert_ne!(orders[0], orders[1]);
    let ds = app.export().await;
    assert_eq!(ds.len(), 14);
    for (r, d) in ds.records().iter().zip(&defs) {
        assert_eq!(r.question_id, d.question_id);
        assert_eq!((&r.esm_a, &r.esm_b, &r.image_id), (&d.esm_a, &d.esm_b, &d.image_id));
        assert_eq!(r.answers.iter().map(|a| a.subject.as_str()).collect::<Vec<_>>(), subjects);
        assert!(r.answers.iter().all(|a| a.elapsed_ms == 6_000));
        // Hand count against the derived scores.
        let k = r.answers.iter().filter(|a| a.chose_a).count();
        let s = derive_scores(r).unwrap();
        assert_eq!(s.l, k as f64 / 2.0);
        assert_eq!(s.r, (2.0 * k as f64 - 2.0) / 2.0);
    }
    let p = app.progress().await;
    assert_eq!(p.questions, 14);
    assert_eq!(p.answers, 28);
    assert_eq!(p.subjects.values().copied().collect::<Vec<_>>(), vec![14, 14]);
    assert!(p.per_question.values().all(|&n| n == 2));

    // The same log replayed by a fresh process exports the same bytes.
    let (_, before) = app.get("/export").await;
    drop(app);
    let again = self::app(&f.manifest, Some(&f.log), 3);
    assert_eq!(again.get("/export").await.1, before);
    assert_eq!(again.session("ann").await, tokens[0]);
}

#[tokio::test]
async fn restart_resumes_a_served_question() {
    let f = fixture();
    let app1 = app(&f.manifest, Some(&f.log), 0);
    let t = app1.session("s1").await;
    let q = app1.question(&t).await.unwrap();
    app1.clock.advance(5_000);
    app1.answer(&t, q.question_id, "right").await;
    let pending = app1.question(&t).await.unwrap();
    let served_at = pending.served_at;
    drop(app1);

    let app2 = app(&f.manifest, Some(&f.log), 0);
    // The new clock starts at the same instant as the old one did.
    app2.clock.set(served_at + 5_000);
    // The token survives the restart without a new session call.
    let (s, v) = app2.answer(&t, pending.question_id, "left").await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(app2.answer(&t, q.question_id, "left").await.0, StatusCode::CONFLICT);
    let p = app2.progress().await;
    assert_eq!(p.subjects["s1"], 2);
    assert_ne!(app2.question(&t).await.unwrap().question_id, pending.question_id);
}

#[tokio::test]
async fn a_torn_final_log_line_is_dropped() {
    let f = fixture();
    {
        let a = app(&f.manifest, Some(&f.log), 0);
        let t = a.session("s1").await;
        let q = a.question(&t).await.unwrap();
        a.clock.advance(5_000);
        a.answer(&t, q.question_id, "left").await;
    }
    let intact = std::fs::read_to_string(&f.log).unwrap();
    assert_eq!(intact.lines().count(), 3);
    let mut torn = intact.clone();
    torn.push_str("{\"event\":\"answer\",\"subj");
    std::fs::write(&f.log, torn).unwrap();
    let a = app(&f.manifest, Some(&f.log), 0);
    assert_eq!(a.progress().await.answers, 1);
    assert_eq!(std::fs::read_to_string(&f.log).unwrap(), intact);

    // A corrupt line in the middle is not silently skipped.
    std::fs::write(&f.log, format!("garbage\n{intact}")).unwrap();
    let config = ServiceConfig {
        manifest: f.manifest.clone(),
        log: Some(f.log.clone()),
        seed: 0,
        static_dir: None,
    };
    let err = AppState::open(&config, Arc::new(ManualClock::new(0))).err().unwrap();
    assert!(err.contains(":1:"), "{err}");
}

#[tokio::test]
async fn empty_log_exports_nothing() {
    let f = fixture();
    let app = app(&f.manifest, Some(&f.log), 0);
    let (s, b) = app.get("/export").await;
    assert_eq!(s, StatusCode::OK);
    assert!(b.is_empty());
    let p = app.progress().await;
    assert_eq!((p.questions, p.answers), (14, 0));
    assert!(p.subjects.is_empty());
    // A served but unanswered question is still absent from the export.
    let t = app.session("s1").await;
    app.question(&t).await.unwrap();
    assert!(app.get("/export").await.1.is_empty());
}

#[tokio::test]
async fn renditions_are_equalized_gray_png() {
    let f = fixture();
    let app = app(&f.manifest, None, 0);
    let t = app.session("s1").await;
    let q = app.question(&t).await.unwrap();
    let bench = Benchmark::load(&f.manifest).unwrap();
    for url in [&q.left_url, &q.right_url, &q.gsm_url, &q.stimulus_url] {
        let (s, b) = app.get(url).await;
        assert_eq!(s, StatusCode::OK, "{url}");
        let img = image::load_from_memory(&b).unwrap().into_luma8();
        assert_eq!(img.dimensions(), (24, 24));
    }
    // Byte-identical on a second request, and equal to the core pipeline.
    let (_, first) = app.get(&q.left_url).await;
    assert_eq!(app.get(&q.left_url).await.1, first);
    let map = bench.load_map(&q.image_id, map_of(&q.left_url)).unwrap();
    assert_eq!(first, salbench_service::render::display_png(&map));
    let img = image::load_from_memory(&first).unwrap().into_luma8();
    assert_eq!(img.pixels().map(|p| p.0[0]).max(), Some(255));

    assert_eq!(app.get(&format!("/maps/{}/nope.png", q.image_id)).await.0, StatusCode::NOT_FOUND);
    assert_eq!(app.get("/maps/nope/G.png").await.0, StatusCode::NOT_FOUND);
    assert_eq!(app.get("/stimulus/nope.png").await.0, StatusCode::NOT_FOUND);
    let (s, page) = app.get("/").await;
    assert_eq!(s, StatusCode::OK);
    assert!(std::str::from_utf8(&page).unwrap().contains("/question?token="));
}

#[tokio::test]
async fn static_bundle_is_served_from_its_directory() {
    let f = fixture();
    let ui = tempfile::tempdir().unwrap();
    std::fs::write(ui.path().join("index.html"), "<p>bundle</p>").unwrap();
    std::fs::create_dir(ui.path().join("assets")).unwrap();
    std::fs::write(ui.path().join("assets/app.js"), "go()").unwrap();
    let config = ServiceConfig {
        manifest: f.manifest.clone(),
        log: None,
        seed: 0,
        static_dir: Some(ui.path().to_path_buf()),
    };
    let app = router(AppState::open(&config, Arc::new(ManualClock::new(0))).unwrap());
    let get = |uri: &'static str| {
        let app = app.clone();
        async move {
            let r = app.oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
            let ct = r.headers().get("content-type").map(|v| v.to_str().unwrap().to_string());
            (r.status(), ct, r.into_body().collect().await.unwrap().to_bytes())
        }
    };
    let (s, ct, b) = get("/").await;
    assert_eq!((s, &b[..]), (StatusCode::OK, &b"<p>bundle</p>"[..]));
    assert!(ct.unwrap().starts_with("text/html"));
    assert_eq!(get("/assets/app.js").await.2, &b"go()"[..]);
    assert_eq!(get("/missing.js").await.0, StatusCode::NOT_FOUND);
    assert_eq!(get("/assets/../../manifest.json").await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn question_order_is_seeded_per_subject() {
    let f = fixture();
    let run = |seed: u64, subject: &'static str| {
        let manifest = f.manifest.clone();
        async move {
            let app = app(&manifest, None, seed);
            let t = app.session(subject).await;
            let mut ids = Vec::new();
            while let Some(q) = app.question(&t).await {
                ids.push(q.question_id);
                app.clock.advance(5_000);
                app.answer(&t, q.question_id, "right").await;
            }
            ids
        }
    };
    let a = run(1, "x").await;
    assert_eq!(a, run(1, "x").await);
    assert_ne!(a, run(2, "x").await);
    assert_ne!(a, run(1, "y").await);
    let mut sorted = a.clone();
    sorted.sort();
    assert_eq!(sorted, (0..14).collect::<Vec<u64>>());
}

#[tokio::test]
async fn benchmarks_without_judgments_enumerate_model_pairs() {
    let f = fixture();
    let mut bench = Benchmark::load(&f.manifest).unwrap();
    bench.manifest.judgments = None;
    std::fs::write(&f.manifest, bench.manifest.to_json()).unwrap();
    let defs = questions(&f.manifest);
    // One anchor pair and six model pairs per image.
    assert_eq!(defs.len(), 14);
    assert_eq!((defs[0].esm_a.as_str(), defs[0].esm_b.as_str()), ("G", "R"));
    assert!(defs.iter().enumerate().all(|(i, d)| d.question_id == i as u64 && d.gsm == "G"));
    let app = app(&f.manifest, None, 0);
    let t = app.session("s1").await;
    assert!(app.question(&t).await.is_some());
}
