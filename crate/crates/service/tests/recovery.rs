//! State survives restarts; work cut short is reported, never lost.

mod common;

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use common::*;
use memovis_core::adapters::mock::MockModels;
use memovis_core::adapters::ModelSuite;
use reqwest::StatusCode;
use serde_json::{json, Value};

fn edit_json(path: &Path, f: impl FnOnce(&mut Value)) {
    let mut v: Value = serde_json::from_slice(&fs::read(path).unwrap()).unwrap();
    f(&mut v);
    fs::write(path, serde_json::to_vec_pretty(&v).unwrap()).unwrap();
}

#[test]
fn restart_recovers_state_and_fails_interrupted_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (pid, cid, done_job, memo) = {
        let server = start(cfg.clone(), ModelSuite::mock());
        let api = Api::new(&server);
        let pid = api.create_project();
        api.build_index(&pid);
        let cid = api.create_comment(&pid, "a blue sofa");
        api.anchor(&cid, &front_view());
        let job = api.run_modifier(&cid, &json!({"kind": "text-scribble", "seed": 9}));
        let (_, memo) = api.get_bytes(&format!("/comments/{cid}/export"));
        (pid, cid, job["id"].as_str().unwrap().to_string(), memo)
    };

    // Simulate a crash mid-build and mid-run by rewriting the records the
    // way a killed process would have left them.
    let unindexed = {
        let server = start(cfg.clone(), ModelSuite::mock());
        Api::new(&server).create_project()
    };
    let jobs = dir.path().join("jobs");
    let mut running = fs::read(jobs.join(format!("{done_job}.json"))).unwrap();
    running = String::from_utf8(running).unwrap().replace(&done_job, "crashedrun").into_bytes();
    fs::write(jobs.join("crashedrun.json"), &running).unwrap();
    edit_json(&jobs.join("crashedrun.json"), |j| {
        j["state"] = json!("running");
        j["finished_at"] = Value::Null;
        j["result"] = Value::Null;
    });
    fs::write(
        jobs.join("crashedbuild.json"),
        serde_json::to_vec(&json!({
            "id": "crashedbuild", "kind": "index-build", "project_id": unindexed, "comment_id": null,
            "state": "queued", "progress": {"done": 3, "total": 8}, "submitted_at": 1,
            "started_at": null, "finished_at": null, "result": null
        }))
        .unwrap(),
    )
    .unwrap();
    for p in [&pid, &unindexed] {
        edit_json(&dir.path().join("projects").join(p).join("project.json"), |proj| {
            proj["index"] = json!({"status": "building", "job": "crashedbuild", "progress": 0.4});
        });
    }

    let server = start(cfg, ModelSuite::mock());
    let api = Api::new(&server);
    for id in ["crashedrun", "crashedbuild"] {
        let (_, job) = api.get(&format!("/jobs/{id}"));
        assert_eq!(job["state"], "failed", "{job}");
        assert_eq!(job["reason"], "interrupted");
        assert!(job["finished_at"].is_u64());
    }
    let (_, job) = api.get(&format!("/jobs/{done_job}"));
    assert_eq!(job["state"], "done");

    let (_, p) = api.get(&format!("/projects/{pid}"));
    assert_eq!(p["index"]["status"], "ready", "valid index file on disk");
    let (_, p) = api.get(&format!("/projects/{unindexed}"));
    assert_eq!(p["index"], json!({"status": "absent"}));

    let (_, c) = api.get(&format!("/comments/{cid}"));
    assert_eq!(c["anchor"], serde_json::to_value(front_view()).unwrap());
    assert_eq!(c["attachments"], json!([done_job]));
    let (_, again) = api.get_bytes(&format!("/comments/{cid}/export"));
    assert_eq!(again, memo);

    let (status, s) = api.post(&format!("/comments/{cid}/suggest"), &json!({"text": "sofa"}));
    assert_eq!(status, StatusCode::OK, "{s}");
    api.build_index(&unindexed);
}

#[test]
fn jobs_queued_at_shutdown_are_interrupted_on_restart() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.workers = 1;
    let gate = Gate::default();
    let mut models = ModelSuite::mock();
    models.depth = Arc::new(GatedGeneration { gate: gate.clone(), inner: MockModels::new(512) });
    let server = start(cfg.clone(), models);
    let api = Api::new(&server);
    let pid = api.create_project();
    let a = api.create_comment(&pid, "first");
    let b = api.create_comment(&pid, "second");
    api.anchor(&a, &front_view());
    api.anchor(&b, &front_view());
    let req = json!({"kind": "text-scribble", "seed": 2});
    let (_, ja) = api.post(&format!("/comments/{a}/modifiers"), &req);
    let (_, jb) = api.post(&format!("/comments/{b}/modifiers"), &req);
    while api.get(&format!("/jobs/{}", ja["id"].as_str().unwrap())).1["state"] != "running" {
        std::thread::sleep(Duration::from_millis(10));
    }
    let opener = std::thread::spawn(move || {
        std::thread::sleep(Duration::from_millis(200));
        gate.open();
    });
    server.stop();
    opener.join().unwrap();

    let server = start(cfg, ModelSuite::mock());
    let api = Api::new(&server);
    let (_, ja) = api.get(&format!("/jobs/{}", ja["id"].as_str().unwrap()));
    let (_, jb) = api.get(&format!("/jobs/{}", jb["id"].as_str().unwrap()));
    assert_eq!(ja["state"], "done", "the running job finished before shutdown");
    assert_eq!((jb["state"].as_str(), jb["reason"].as_str()), (Some("failed"), Some("interrupted")));
    let (_, c) = api.get(&format!("/comments/{b}"));
    assert_eq!(c["attachments"], json!([]));
    assert_eq!(api.run_modifier(&b, &req)["state"], "done");
}

#[test]
fn missing_result_directories_are_pruned() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (pid, cid, job) = {
        let server = start(cfg.clone(), ModelSuite::mock());
        let api = Api::new(&server);
        let pid = api.create_project();
        let cid = api.create_comment(&pid, "note");
        api.anchor(&cid, &front_view());
        let job = api.run_modifier(&cid, &json!({"kind": "text-scribble"}));
        (pid, cid, job["id"].as_str().unwrap().to_string())
    };
    fs::remove_dir_all(dir.path().join("projects").join(&pid).join("results").join(&job)).unwrap();
    let server = start(cfg, ModelSuite::mock());
    let (_, c) = Api::new(&server).get(&format!("/comments/{cid}"));
    assert_eq!(c["attachments"], json!([]));
    assert_eq!(c["revision"], 4);
}
