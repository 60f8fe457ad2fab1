#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;
use std::path::Path;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use memovis_core::adapters::mock::MockModels;
use memovis_core::adapters::{GenerationBackend, GenerationRequest, ModelSuite, Result as AdapterResult, TextEmbedder};
use memovis_core::scene::{write_glb, Mesh};
use memovis_core::viewpoint::SamplingConfig;
use memovis_core::{RenderConfig, RgbImage, SceneModel, Viewpoint};
use memovis_service::{App, RunningServer, ServiceConfig};
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::Value;

pub const RED: [u8; 3] = [220, 40, 40];
pub const GREEN: [u8; 3] = [40, 200, 60];
pub const BLUE: [u8; 3] = [40, 60, 220];

pub fn three_cubes() -> SceneModel {
    SceneModel::new(vec![
        Mesh::cuboid([-1.5, 0.0, 0.0], [0.5; 3], RED).with_name("A"),
        Mesh::cuboid([0.0, 0.0, 0.0], [0.5; 3], GREEN).with_name("B"),
        Mesh::cuboid([1.5, 0.0, 0.0], [0.5; 3], BLUE).with_name("C"),
    ])
    .unwrap()
}

pub fn three_cubes_glb() -> Vec<u8> {
    write_glb(&three_cubes())
}

pub fn front_view() -> Viewpoint {
    Viewpoint::new(FRAC_PI_2, FRAC_PI_2, 2.0, [0.0; 3])
}

/// 64x64 renders and an 8-row grid keep a full lifecycle to seconds.
pub fn small_config(data_dir: &Path) -> ServiceConfig {
    ServiceConfig {
        data_dir: data_dir.to_path_buf(),
        viewport: RenderConfig::default().with_size(64, 64),
        sampling: SamplingConfig {
            bins_per_axis: 1,
            angle_step_deg: 90,
            radii: vec![1.0],
        },
        thumbnail_size: 32,
        ..ServiceConfig::default()
    }
}

pub fn start(config: ServiceConfig, models: ModelSuite) -> RunningServer {
    let app = App::start(config, models).unwrap();
    RunningServer::spawn(app, "127.0.0.1:0".parse().unwrap()).unwrap()
}

pub struct Api {
    pub base: String,
    pub http: Client,
}

impl Api {
    pub fn new(server: &RunningServer) -> Self {
        Self {
            base: format!("{}/api/v1", server.url()),
            http: Client::builder().timeout(Duration::from_secs(60)).build().unwrap(),
        }
    }

    fn finish(resp: reqwest::blocking::Response) -> (StatusCode, Value) {
        let status = resp.status();
        let text = resp.text().unwrap();
        let value = serde_json::from_str(&text).unwrap_or(Value::String(text));
        (status, value)
    }

    pub fn get(&self, path: &str) -> (StatusCode, Value) {
        Self::finish(self.http.get(format!("{}{path}", self.base)).send().unwrap())
    }

    pub fn get_bytes(&self, path: &str) -> (StatusCode, Vec<u8>) {
        let resp = self.http.get(format!("{}{path}", self.base)).send().unwrap();
        (resp.status(), resp.bytes().unwrap().to_vec())
    }

    pub fn post(&self, path: &str, body: &Value) -> (StatusCode, Value) {
        Self::finish(self.http.post(format!("{}{path}", self.base)).json(body).send().unwrap())
    }

    pub fn post_bytes(&self, path: &str, body: Vec<u8>) -> (StatusCode, Value) {
        Self::finish(self.http.post(format!("{}{path}", self.base)).body(body).send().unwrap())
    }

    pub fn put(&self, path: &str, body: &Value) -> (StatusCode, Value) {
        Self::finish(self.http.put(format!("{}{path}", self.base)).json(body).send().unwrap())
    }

    pub fn create_project(&self) -> String {
        let (status, p) = self.post_bytes("/projects", three_cubes_glb());
        assert_eq!(status, StatusCode::CREATED, "{p}");
        p["id"].as_str().unwrap().to_string()
    }

    pub fn create_comment(&self, pid: &str, body: &str) -> String {
        let (status, c) = self.post(&format!("/projects/{pid}/comments"), &serde_json::json!({"body": body}));
        assert_eq!(status, StatusCode::CREATED, "{c}");
        c["id"].as_str().unwrap().to_string()
    }

    pub fn anchor(&self, cid: &str, v: &Viewpoint) -> Value {
        let (status, c) = self.put(&format!("/comments/{cid}/anchor"), &serde_json::to_value(v).unwrap());
        assert_eq!(status, StatusCode::OK, "{c}");
        c
    }

    /// Polls a job until it leaves the queued and running states.
    pub fn wait_job(&self, id: &str) -> Value {
        let start = Instant::now();
        loop {
            let (status, job) = self.get(&format!("/jobs/{id}"));
            assert_eq!(status, StatusCode::OK, "{job}");
            if job["state"] == "done" || job["state"] == "failed" {
                return job;
            }
            assert!(start.elapsed() < Duration::from_secs(120), "job {id} stuck: {job}");
            std::thread::sleep(Duration::from_millis(20));
        }
    }

    pub fn build_index(&self, pid: &str) -> Value {
        let (status, job) = self.post_bytes(&format!("/projects/{pid}/index"), Vec::new());
        assert_eq!(status, StatusCode::ACCEPTED, "{job}");
        let job = self.wait_job(job["id"].as_str().unwrap());
        assert_eq!(job["state"], "done", "{job}");
        job
    }

    pub fn run_modifier(&self, cid: &str, request: &Value) -> Value {
        let (status, job) = self.post(&format!("/comments/{cid}/modifiers"), request);
        assert_eq!(status, StatusCode::ACCEPTED, "{job}");
        self.wait_job(job["id"].as_str().unwrap())
    }
}

/// A switch that blocks callers until opened.
#[derive(Clone, Default)]
pub struct Gate(Arc<(Mutex<bool>, Condvar)>);

impl Gate {
    pub fn open(&self) {
        *self.0 .0.lock().unwrap() = true;
        self.0 .1.notify_all();
    }

    pub fn wait(&self) {
        let mut open = self.0 .0.lock().unwrap();
        while !*open {
            open = self.0 .1.wait(open).unwrap();
        }
    }
}

/// Mock generation that waits for a gate first.
pub struct GatedGeneration {
    pub gate: Gate,
    pub inner: MockModels,
}

impl GenerationBackend for GatedGeneration {
    fn generate(&self, request: GenerationRequest<'_>) -> AdapterResult<RgbImage> {
        self.gate.wait();
        self.inner.generate(request)
    }
}

/// Mock text encoder that sleeps before embedding texts containing "slow".
pub struct SlowText(pub MockModels, pub Duration);

impl TextEmbedder for SlowText {
    fn dim(&self) -> usize {
        TextEmbedder::dim(&self.0)
    }

    fn embed_text(&self, text: &str) -> AdapterResult<Vec<f32>> {
        if text.contains("slow") {
            std::thread::sleep(self.1);
        }
        self.0.embed_text(text)
    }
}
