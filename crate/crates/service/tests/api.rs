use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use faultline::evalcore::{read_trajectory, run_agent, BudgetConfig, Clock, ScriptedAgent, SessionOptions};
use faultline::harness::{baseline_with, RunnerConfig, SuiteReport};
use faultline::pipeline::StoredBaseline;
use faultline::repo::{ingest_repository, Repository};
use faultline::taskgen::{
    delete_function, task_id, validate_task, write_task, Corruption, CorruptionMethod, GeneratorInfo, RepoRef,
    TaskInstance, TaskMode, ValidationConfig,
};
use faultline_service::{router, AppState, ServiceConfig};

const CHECKSUM: &str = "inventory/checksum.py::checksum";
const CLAMP: &str = "inventory/mathutil.py::_clamp";

fn fixture_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/inventory_repo")
}

fn task(repo: &Repository, baseline: &SuiteReport, mode: TaskMode, c: Corruption) -> TaskInstance {
    let v = validate_task(&repo.root, baseline, std::slice::from_ref(&c), &ValidationConfig::default()).unwrap();
    assert!(v.accepted);
    TaskInstance {
        task_id: task_id(&repo.commit, mode, std::slice::from_ref(&c)),
        repo_ref: RepoRef {
            source: "fixture".into(),
            commit: repo.commit.clone(),
        },
        mode,
        corruptions: vec![c],
        failing_tests: v.failing_tests.into_iter().collect(),
        metrics: Default::default(),
        generator: GeneratorInfo {
            version: "test".into(),
            seed: 0,
        },
    }
}

struct Fixture {
    _dir: tempfile::TempDir,
    store: PathBuf,
    repo: Repository,
    baseline: SuiteReport,
    remove: TaskInstance,
    discovery: TaskInstance,
}

fn fixture() -> Fixture {
    let root = fixture_root();
    let repo = ingest_repository(&root, faultline::harness::DEFAULT_TEST_COMMAND).unwrap();
    let baseline = baseline_with(&root, &RunnerConfig::default()).unwrap();
    let remove = task(&repo, &baseline, TaskMode::Remove, delete_function(&repo, CHECKSUM).unwrap());
    let unit = repo.unit(CLAMP).unwrap();
    let discovery = task(
        &repo,
        &baseline,
        TaskMode::Discovery,
        Corruption {
            target: unit.id.clone(),
            method: CorruptionMethod::Adversarial,
            corrupted_body: unit.source().replace("value < low", "value > low"),
            original_digest: unit.digest(),
        },
    );
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().to_path_buf();
    write_task(&store, &remove).unwrap();
    write_task(&store, &discovery).unwrap();
    let stored = StoredBaseline::from_report(&baseline, faultline::harness::DEFAULT_TEST_COMMAND);
    std::fs::write(store.join("baseline.json"), serde_json::to_string(&stored).unwrap()).unwrap();
    Fixture {
        _dir: dir,
        store,
        repo,
        baseline,
        remove,
        discovery,
    }
}

fn config(store: &Path) -> ServiceConfig {
    let mut c = ServiceConfig::new(store, fixture_root());
    c.clock = Clock::Logical;
    c
}

async fn send(app: &axum::Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn open(app: &axum::Router, task_id: &str, budget: &str, agent: &str) -> String {
    let (status, body) = send(app, Method::POST, "/sessions", Some(json!({"task_id": task_id, "budget": budget, "agent": agent}))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let id = body["session_id"].as_str().unwrap().to_string();
    assert_eq!(id.len(), 32);
    assert!(id.chars().all(|c| c.is_ascii_hexdigit()));
    id
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn api_matches_direct_evaluation() {
    let f = fixture();
    let original = f.repo.unit(CLAMP).unwrap().source();
    let calls = vec![
        ("list_directory", json!({"path": ""})),
        ("search_code", json!({"pattern": "_clamp("})),
        ("read_function", json!({"unit_id": CLAMP})),
        ("read_file", json!({"path": "../outside"})),
        ("replace_function", json!({"unit_id": CLAMP, "body": "def _clamp(value, low, high):\n    return low\n"})),
        ("replace_function", json!({"unit_id": CLAMP, "body": original})),
    ];
    let options = SessionOptions {
        clock: Clock::Logical,
        ..SessionOptions::default()
    };
    let mut agent = ScriptedAgent::from_pairs("parity", calls.clone());
    let direct = run_agent(&f.discovery, &fixture_root(), &f.baseline, BudgetConfig::default(), &mut agent, options).unwrap();

    let app = router(AppState::new(config(&f.store)));
    let id = open(&app, &f.discovery.task_id, "default", "parity").await;
    for (tool, args) in &calls {
        let (status, body) = if tool.starts_with("replace") {
            send(&app, Method::POST, &format!("/sessions/{id}/submit"), Some(args.clone())).await
        } else {
            send(&app, Method::POST, &format!("/sessions/{id}/tools/{tool}"), Some(args.clone())).await
        };
        assert!(status == StatusCode::OK || status == StatusCode::BAD_REQUEST, "{tool}: {status} {body}");
    }
    let (status, outcome) = send(&app, Method::DELETE, &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(outcome["score"], json!(1));

    let persisted = read_trajectory(&f.store.join("trajectories/parity").join(&f.discovery.task_id)).unwrap();
    assert_eq!(persisted.events, direct.events);
    let (mut a, mut b) = (persisted.outcome.clone(), direct.outcome.clone());
    a.session_id.clear();
    b.session_id.clear();
    a.reason = None;
    b.reason = None;
    assert_eq!(a, b);
    assert_eq!(persisted.calls, direct.calls);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn discovery_responses_never_name_the_target() {
    let f = fixture();
    let app = router(AppState::new(config(&f.store)));
    let mut seen = Vec::new();
    let (_, tasks) = send(&app, Method::GET, "/tasks", None).await;
    assert_eq!(tasks.as_array().unwrap().len(), 2);
    seen.push(tasks);
    seen.push(send(&app, Method::GET, &format!("/tasks/{}", f.discovery.task_id), None).await.1);
    let (_, created) = send(&app, Method::POST, "/sessions", Some(json!({"task_id": f.discovery.task_id}))).await;
    let id = created["session_id"].as_str().unwrap().to_string();
    seen.push(created);
    seen.push(send(&app, Method::POST, &format!("/sessions/{id}/tools/list_directory"), Some(json!({"path": "inventory"}))).await.1);
    seen.push(
        send(&app, Method::POST, &format!("/sessions/{id}/submit"), Some(json!({"unit_id": "inventory/mathutil.py::mean", "body": "def mean(values):\n    return 0.0\n"})))
            .await
            .1,
    );
    seen.push(send(&app, Method::GET, &format!("/sessions/{id}"), None).await.1);
    seen.push(send(&app, Method::DELETE, &format!("/sessions/{id}"), None).await.1);
    for body in &seen {
        let text = body.to_string();
        assert!(!text.contains(CLAMP), "target leaked: {text}");
        assert!(!text.contains("value > low"), "corrupted body leaked: {text}");
    }
    // remove-mode listings do name their target
    let listed = seen[0].to_string();
    assert!(listed.contains(CHECKSUM));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn status_codes() {
    let f = fixture();
    let app = router(AppState::new(config(&f.store)));
    let (status, body) = send(&app, Method::POST, "/sessions", Some(json!({"task_id": "0000000000000000"}))).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::NOT_FOUND, Some("unknown_task")));
    assert_eq!(send(&app, Method::GET, "/sessions/abc", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(send(&app, Method::GET, "/tasks/..%2F..", None).await.0, StatusCode::NOT_FOUND);

    let (status, body) = send(&app, Method::POST, "/sessions", Some(json!({"task_id": f.remove.task_id, "budget": "xl"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["budget"], json!({"max_tool_uses": 32, "max_attempts": 8}));

    let id = open(&app, &f.remove.task_id, "xs", "codes").await;
    let tool = |name: &str| format!("/sessions/{id}/tools/{name}");
    let (status, body) = send(&app, Method::POST, &tool("search_code"), Some(json!({"pattern": "(", "is_regex": true}))).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_pattern")));
    for _ in 0..4 {
        let (status, body) = send(&app, Method::POST, &tool("list_directory"), Some(json!({"path": ""}))).await;
        assert_eq!(status, StatusCode::OK);
        assert!(body["entries"].is_null() && body["result"]["entries"].is_array());
    }
    let (status, body) = send(&app, Method::POST, &tool("list_directory"), Some(json!({"path": ""}))).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::GONE, Some("budget_exhausted")));

    let submit = format!("/sessions/{id}/submit");
    let (status, body) = send(&app, Method::POST, &submit, Some(json!({"unit_id": CLAMP, "body": "def _clamp(v, l, h):\n    return v\n"}))).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::BAD_REQUEST, Some("target_mismatch")));
    let (status, body) = send(&app, Method::POST, &submit, Some(json!({"body": "def checksum(data):\n    return 0\n"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["result"]["passed"], json!(false));
    assert_eq!(body["remaining_attempts"], json!(0));
    let (status, _) = send(&app, Method::POST, &submit, Some(json!({"body": "def checksum(data):\n    return 1\n"}))).await;
    assert_eq!(status, StatusCode::GONE);

    std::fs::write(f.store.join(".lock"), "").unwrap();
    let (status, body) = send(&app, Method::POST, "/sessions", Some(json!({"task_id": f.remove.task_id}))).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::CONFLICT, Some("store_locked")));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn closing_twice_returns_the_same_outcome() {
    let f = fixture();
    let app = router(AppState::new(config(&f.store)));
    let id = open(&app, &f.remove.task_id, "default", "closer").await;
    let original = f.repo.unit(CHECKSUM).unwrap().source();
    let (status, body) = send(&app, Method::POST, &format!("/sessions/{id}/submit"), Some(json!({"body": original}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["result"]["passed"], json!(true));
    assert_eq!(body["state"], json!("solved"));
    let first = send(&app, Method::DELETE, &format!("/sessions/{id}"), None).await;
    let second = send(&app, Method::DELETE, &format!("/sessions/{id}"), None).await;
    assert_eq!(first, second);
    assert_eq!(first.1["score"], json!(1));
    let (status, _) = send(&app, Method::POST, &format!("/sessions/{id}/tools/list_directory"), Some(json!({"path": ""}))).await;
    assert_eq!(status, StatusCode::GONE);
    let view = send(&app, Method::GET, &format!("/sessions/{id}"), None).await.1;
    assert_eq!(view["outcome"]["score"], json!(1));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn idle_sessions_are_scored_on_expiry() {
    let f = fixture();
    let mut c = config(&f.store);
    c.idle_timeout = Duration::from_secs(60);
    let state = AppState::new(c);
    let app = router(Arc::clone(&state));
    let id = open(&app, &f.remove.task_id, "default", "idle").await;
    assert!(state.expire_idle(Instant::now()).await.is_empty());
    let expired = state.expire_idle(Instant::now() + Duration::from_secs(61)).await;
    assert_eq!(expired, vec![id.clone()]);
    let t = read_trajectory(&f.store.join("trajectories/idle").join(&f.remove.task_id)).unwrap();
    assert_eq!(t.outcome.score, 0);
    assert_eq!(t.outcome.reason.as_deref(), Some("idle_expired"));
    assert_eq!(send(&app, Method::GET, &format!("/sessions/{id}"), None).await.0, StatusCode::NOT_FOUND);
}
