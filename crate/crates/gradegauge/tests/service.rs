mod common;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use common::*;
use gradegauge::config::AppConfig;
use gradegauge::pipeline::{self, Score, StudentInput};
use gradegauge::service::{serve_on, AppState};
use gradegauge::store::Store;
use reqwest::multipart::{Form, Part};
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};

struct Server {
    base: String,
    http: Client,
    clock: Arc<AtomicU64>,
    state: AppState,
    _dir: tempfile::TempDir,
    _stop: tokio::sync::oneshot::Sender<()>,
}

async fn start(config: AppConfig) -> Server {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(&dir.path().join("service.redb")).unwrap();
    let clock = Arc::new(AtomicU64::new(1_700_000_000_000));
    let c = clock.clone();
    let state = AppState::new(store, config).with_clock(Arc::new(move || c.load(Ordering::SeqCst)));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let s = state.clone();
    tokio::spawn(async move {
        serve_on(listener, s, async {
            let _ = rx.await;
        })
        .await
        .unwrap();
    });
    Server {
        base,
        http: Client::new(),
        clock,
        state,
        _dir: dir,
        _stop: tx,
    }
}

impl Server {
    async fn call(&self, method: reqwest::Method, path: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = self.http.request(method, format!("{}{path}", self.base));
        if let Some(t) = token {
            req = req.bearer_auth(t);
        }
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().await.unwrap();
        let status = resp.status();
        let text = resp.text().await.unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::Null))
    }

    async fn post(&self, path: &str, token: Option<&str>, body: Value) -> (StatusCode, Value) {
        self.call(reqwest::Method::POST, path, token, Some(body)).await
    }

    async fn get(&self, path: &str, token: &str) -> (StatusCode, Value) {
        self.call(reqwest::Method::GET, path, Some(token), None).await
    }

    async fn account(&self, email: &str) -> String {
        let (s, _) = self
            .post(
                "/api/register",
                None,
                json!({"name": "Staff", "gender": "Male", "branch": "Computer", "email": email,
                       "password": "secret-pass", "re_password": "secret-pass"}),
            )
            .await;
        assert_eq!(s, StatusCode::CREATED);
        let (s, body) = self.post("/api/login", None, json!({"email": email, "password": "secret-pass"})).await;
        assert_eq!(s, StatusCode::OK, "{body}");
        body["token"].as_str().unwrap().to_string()
    }

    async fn upload(&self, token: &str, name: &str, csv: String) -> (StatusCode, Value) {
        let form = Form::new().part("file", Part::text(csv).file_name(name.to_string()));
        let resp = self
            .http
            .post(format!("{}/api/datasets", self.base))
            .bearer_auth(token)
            .multipart(form)
            .send()
            .await
            .unwrap();
        let status = resp.status();
        (status, resp.json().await.unwrap_or(Value::Null))
    }

    async fn ladder_model(&self, token: &str) -> String {
        let (s, ds) = self.upload(token, "train.csv", processed_csv(200, 7)).await;
        assert_eq!(s, StatusCode::CREATED, "{ds}");
        let (s, m) = self
            .post("/api/models", Some(token), json!({"dataset_id": ds["dataset_id"], "algorithm": "C45"}))
            .await;
        assert_eq!(s, StatusCode::CREATED, "{m}");
        m["model_id"].as_str().unwrap().to_string()
    }
}

fn fig13_request() -> Value {
    json!({"name": "Aditya Gaykar", "app_id": "DX123456", "gender": "Male",
           "percent": 89.17, "merit": 157, "type": "OTHER", "algorithm": "C45"})
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn full_staff_flow() {
    let srv = start(AppConfig::default()).await;
    let token = srv.account("aditya@college.edu").await;

    let (s, ds) = srv.upload(&token, "train.csv", processed_csv(200, 7)).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!((ds["layout"].as_str(), ds["rows"].as_u64(), ds["labeled"].as_bool()), (Some("processed"), Some(200), Some(true)));

    let (s, model) = srv
        .post("/api/models", Some(&token), json!({"dataset_id": ds["dataset_id"], "algorithm": "C4.5"}))
        .await;
    assert_eq!(s, StatusCode::CREATED, "{model}");
    assert!(model["stats"]["leaf_count"].as_u64().unwrap() <= 5);
    let model_id = model["model_id"].as_str().unwrap().to_string();

    let (s, p) = srv.post("/api/predict", Some(&token), fig13_request()).await;
    assert_eq!(s, StatusCode::OK, "{p}");
    assert_eq!(p["predicted"], "pass");
    assert_eq!(p["model_id"], model_id.as_str());
    assert_eq!(p["features"], json!({"merit": "good", "gender": "Male", "percent": "distinction", "type": "OTHER"}));

    let (s, planted) = srv.upload(&token, "planted.csv", planted_raw_csv()).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(planted["layout"], "raw");

    let (s, ev) = srv
        .post("/api/evaluate", Some(&token), json!({"model_id": model_id, "dataset_id": planted["dataset_id"]}))
        .await;
    assert_eq!(s, StatusCode::OK, "{ev}");
    assert_eq!(ev["rows"].as_array().unwrap().len(), 173);
    assert_eq!(ev["rows"][0]["record"]["app_id"], "DX120000");
    assert!(ev["wall_ms"].as_f64().unwrap() >= 0.0);

    let (s, v) = srv
        .post("/api/verify", Some(&token), json!({"algorithm": "C45", "dataset_id": planted["dataset_id"]}))
        .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!((v["total"].as_u64(), v["correct"].as_u64()), (Some(173), Some(130)));
    assert_eq!(v["accuracy"].as_f64(), Some(75.145));
    let mismatches = v["mismatches"].as_array().unwrap();
    assert_eq!(mismatches.len(), 43);
    assert_eq!(mismatches[0]["row"], 1);
    assert_eq!(mismatches[0]["record"]["name"], "Student 1");

    let (s, h) = srv.get("/api/history", &token).await;
    assert_eq!(s, StatusCode::OK);
    let entries = h["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 1);
    let e = &entries[0];
    assert_eq!(
        (
            e["app_id"].as_str(),
            e["name"].as_str(),
            e["gender"].as_str(),
            e["percent_raw"].as_f64(),
            e["merit_raw"].as_f64(),
            e["admission_type_raw"].as_str(),
            e["algorithm"].as_str(),
            e["predicted"].as_str()
        ),
        (Some("DX123456"), Some("Aditya Gaykar"), Some("Male"), Some(89.17), Some(157.0), Some("OTHER"), Some("C45"), Some("pass"))
    );

    let (s, code) = srv.get(&format!("/api/models/{model_id}/code?dialect=python&name=dtalgo"), &token).await;
    assert_eq!(s, StatusCode::OK);
    assert!(code["code"].as_str().unwrap().starts_with("def dtalgo("));

    let entry = e["entry_id"].as_str().unwrap();
    let (s, _) = srv.call(reqwest::Method::DELETE, &format!("/api/history/{entry}"), Some(&token), None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    let (_, h) = srv.get("/api/history", &token).await;
    assert!(h["entries"].as_array().unwrap().is_empty());
    let (s, _) = srv.call(reqwest::Method::DELETE, &format!("/api/history/{entry}"), Some(&token), None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (s, _) = srv.call(reqwest::Method::POST, "/api/logout", Some(&token), None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);
    assert_eq!(srv.get("/api/history", &token).await.0, StatusCode::UNAUTHORIZED);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn protected_routes_need_a_live_token() {
    let srv = start(AppConfig::default()).await;
    use reqwest::Method as M;
    let routes = [
        (M::POST, "/api/logout"),
        (M::POST, "/api/datasets"),
        (M::GET, "/api/datasets"),
        (M::POST, "/api/models"),
        (M::GET, "/api/models"),
        (M::GET, "/api/models/x"),
        (M::GET, "/api/models/x/code"),
        (M::POST, "/api/predict"),
        (M::POST, "/api/evaluate"),
        (M::POST, "/api/verify"),
        (M::GET, "/api/history"),
        (M::DELETE, "/api/history/x"),
    ];
    let token = srv.account("t@college.edu").await;
    srv.clock.fetch_add(srv.state.config.session_ttl_secs * 1000, Ordering::SeqCst);
    for (method, path) in routes {
        for t in [None, Some("not-a-token"), Some(token.as_str())] {
            let (s, body) = srv.call(method.clone(), path, t, Some(json!({}))).await;
            assert_eq!(s, StatusCode::UNAUTHORIZED, "{method} {path} {t:?}");
            assert_eq!(body["error"], "AuthRequired");
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn registration_and_login_errors() {
    let srv = start(AppConfig::default()).await;
    srv.account("dup@college.edu").await;
    let reg = |email: &str, password: &str, re: &str| {
        json!({"name": "N", "gender": "Female", "branch": "IT", "email": email, "password": password, "re_password": re})
    };
    let cases = [
        (reg("DUP@college.edu", "longenough", "longenough"), StatusCode::CONFLICT, "DuplicateEmail"),
        (reg("new@college.edu", "four", "four"), StatusCode::BAD_REQUEST, "WeakPassword"),
        (reg("not-an-email", "longenough", "longenough"), StatusCode::BAD_REQUEST, "InvalidEmail"),
        (reg("new@college.edu", "longenough", "different"), StatusCode::BAD_REQUEST, "PasswordMismatch"),
        (json!({"email": "x@y.z"}), StatusCode::BAD_REQUEST, "InvalidBody"),
    ];
    for (body, status, name) in cases {
        let (s, b) = srv.post("/api/register", None, body).await;
        assert_eq!((s, b["error"].as_str()), (status, Some(name)));
    }
    let (s1, wrong) = srv.post("/api/login", None, json!({"email": "dup@college.edu", "password": "wrong-pass"})).await;
    let (s2, unknown) = srv.post("/api/login", None, json!({"email": "who@college.edu", "password": "secret-pass"})).await;
    assert_eq!((s1, s2), (StatusCode::UNAUTHORIZED, StatusCode::UNAUTHORIZED));
    assert_eq!(wrong, unknown);
    assert_eq!(wrong["error"], "BadCredentials");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn ownership_and_missing_ids() {
    let srv = start(AppConfig::default()).await;
    let a = srv.account("a@college.edu").await;
    let b = srv.account("b@college.edu").await;
    let model_id = srv.ladder_model(&a).await;
    let (_, ds) = srv.upload(&a, "planted.csv", planted_raw_csv()).await;

    let (s, _) = srv.post("/api/verify", Some(&b), json!({"model_id": model_id, "dataset_id": ds["dataset_id"]})).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let (s, _) = srv.post("/api/models", Some(&b), json!({"dataset_id": ds["dataset_id"], "algorithm": "ID3"})).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let (_, list) = srv.get("/api/datasets", &b).await;
    assert!(list["datasets"].as_array().unwrap().is_empty());

    // Models are shared between staff accounts.
    let (s, p) = srv.post("/api/predict", Some(&b), fig13_request()).await;
    assert_eq!((s, p["predicted"].as_str()), (StatusCode::OK, Some("pass")));
    let entry = p["history_entry"]["entry_id"].as_str().unwrap().to_string();
    let (s, _) = srv.call(reqwest::Method::DELETE, &format!("/api/history/{entry}"), Some(&a), None).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    assert!(srv.get("/api/history", &a).await.1["entries"].as_array().unwrap().is_empty());
    assert_eq!(srv.get("/api/history", &b).await.1["entries"].as_array().unwrap().len(), 1);

    let (s, _) = srv.post("/api/verify", Some(&a), json!({"model_id": "nope", "dataset_id": ds["dataset_id"]})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = srv.post("/api/verify", Some(&a), json!({"model_id": model_id, "dataset_id": "nope"})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = srv.post("/api/predict", Some(&a), json!({"name": "n", "app_id": "x", "gender": "Male", "percent": 50, "merit": 100, "type": "AI", "algorithm": "ID3"})).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, body) = srv.post("/api/predict", Some(&a), json!({"name": "n", "app_id": "x", "gender": "Male", "percent": 123, "merit": 100, "type": "AI", "algorithm": "C45"})).await;
    assert_eq!((s, body["error"].as_str()), (StatusCode::BAD_REQUEST, Some("OutOfRange")));
    assert!(srv.get("/api/history", &a).await.1["entries"].as_array().unwrap().is_empty());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn oversized_and_malformed_uploads() {
    let config = AppConfig {
        max_upload_bytes: 4096,
        ..AppConfig::default()
    };
    let srv = start(config).await;
    let t = srv.account("u@college.edu").await;
    let (s, body) = srv.upload(&t, "big.csv", processed_csv(400, 1)).await;
    assert_eq!((s, body["error"].as_str()), (StatusCode::PAYLOAD_TOO_LARGE, Some("PayloadTooLarge")));
    let (s, body) = srv.upload(&t, "bad.csv", "foo,bar\n1,2\n".into()).await;
    assert_eq!((s, body["error"].as_str()), (StatusCode::BAD_REQUEST, Some("UnrecognizedHeader")));
    let (s, _) = srv.upload(&t, "ok.csv", processed_csv(20, 1)).await;
    assert_eq!(s, StatusCode::CREATED);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 8)]
async fn concurrent_sessions_keep_their_own_history() {
    let srv = Arc::new(start(AppConfig::default()).await);
    let owner = srv.account("owner@college.edu").await;
    srv.ladder_model(&owner).await;
    let mut tokens = Vec::new();
    for i in 0..6 {
        tokens.push(srv.account(&format!("staff{i}@college.edu")).await);
    }
    let mut tasks = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        for k in 0..5 {
            let srv = srv.clone();
            let t = t.clone();
            tasks.push(tokio::spawn(async move {
                let mut body = fig13_request();
                body["app_id"] = json!(format!("S{i}-{k}"));
                let (s, p) = srv.post("/api/predict", Some(&t), body).await;
                assert_eq!((s, p["predicted"].as_str()), (StatusCode::OK, Some("pass")));
            }));
        }
    }
    for task in tasks {
        task.await.unwrap();
    }
    for (i, t) in tokens.iter().enumerate() {
        let (_, h) = srv.get("/api/history", t).await;
        let entries = h["entries"].as_array().unwrap();
        assert_eq!(entries.len(), 5);
        assert!(entries.iter().all(|e| e["app_id"].as_str().unwrap().starts_with(&format!("S{i}-"))));
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn service_labels_equal_in_process_predictions() {
    let srv = start(AppConfig::default()).await;
    let t = srv.account("thin@college.edu").await;
    let model_id = srv.ladder_model(&t).await;
    let model = srv.state.store.load_model(&model_id).unwrap();
    for c in feature_space() {
        let (merit, pcm) = raw_scores(c[0], c[2]);
        let body = json!({"name": "n", "app_id": "a", "gender": c[1], "percent": pcm.parse::<f64>().unwrap(),
                          "merit": merit.parse::<f64>().unwrap(), "type": c[3], "model_id": model_id});
        let (s, p) = srv.post("/api/predict", Some(&t), body).await;
        assert_eq!(s, StatusCode::OK);
        let input = StudentInput {
            merit: Score::from_text(merit),
            gender: c[1].into(),
            percent: Score::from_text(pcm),
            admission_type: c[3].into(),
        };
        let local = pipeline::predict(&model, &input, &srv.state.config.thresholds).unwrap();
        assert_eq!(p["predicted"].as_str(), Some(local.predicted.as_str()));
        assert_eq!(local.predicted, ladder(c[2], c[0], c[3]));
    }
}
