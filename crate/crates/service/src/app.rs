//! The review service: request-level operations plus the job workers.

use std::collections::{HashMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;

use base64::Engine;
use memovis_core::adapters::ModelSuite;
use memovis_core::viewpoint::{attach_thumbnails, SamplingConfig};
use memovis_core::Viewpoint;
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::memo::{plain_text, sanitize_html, AnchorRecord, Memo, MemoAttachment};
use crate::ops::{self, ModifierRequest};
use crate::store::{Comment, JobRecord, Project, Store};

enum Task {
    IndexBuild {
        sampling: SamplingConfig,
    },
    Modifier {
        request: ModifierRequest,
        anchor: Viewpoint,
    },
}

#[derive(Default)]
struct QueueState {
    items: VecDeque<(String, Task)>,
    shutdown: bool,
}

/// FIFO of queued jobs shared by the worker threads.
#[derive(Default)]
struct Queue {
    state: Mutex<QueueState>,
    ready: Condvar,
}

impl Queue {
    fn push(&self, id: String, task: Task) {
        let mut s = self.state.lock().unwrap_or_else(|p| p.into_inner());
        s.items.push_back((id, task));
        self.ready.notify_one();
    }

    /// Blocks for the next job; `None` once shut down.
    fn pop(&self) -> Option<(String, Task)> {
        let mut s = self.state.lock().unwrap_or_else(|p| p.into_inner());
        loop {
            if s.shutdown {
                return None;
            }
            if let Some(item) = s.items.pop_front() {
                return Some(item);
            }
            s = self.ready.wait(s).unwrap_or_else(|p| p.into_inner());
        }
    }

    fn shutdown(&self) {
        self.state.lock().unwrap_or_else(|p| p.into_inner()).shutdown = true;
        self.ready.notify_all();
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuggestRequest {
    pub text: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "yes")]
    pub thumbnails: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuggestionOut {
    pub row: usize,
    pub viewpoint: Viewpoint,
    pub score: f64,
    /// Base64 PNG.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thumbnail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuggestResponse {
    pub comment_id: String,
    pub text: String,
    pub suggestions: Vec<SuggestionOut>,
}

/// Shared service state. Handlers and workers hold it through an `Arc`.
pub struct Service {
    config: ServiceConfig,
    store: Store,
    models: ModelSuite,
    queue: Queue,
    suggest_seq: Mutex<HashMap<String, u64>>,
}

impl Service {
    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn create_project(&self, scene_bytes: &[u8]) -> Result<Project, ServiceError> {
        self.store.create_project(scene_bytes)
    }

    pub fn start_index_build(
        &self,
        pid: &str,
        sampling: Option<SamplingConfig>,
    ) -> Result<JobRecord, ServiceError> {
        let sampling = sampling.unwrap_or_else(|| self.config.sampling.clone());
        sampling
            .validate()
            .map_err(|e| ServiceError::Validation(e.to_string()))?;
        let job = self.store.submit_index_build(pid, sampling.count())?;
        self.queue.push(job.id.clone(), Task::IndexBuild { sampling });
        Ok(job)
    }

    pub fn create_comment(&self, pid: &str, body: &str) -> Result<Comment, ServiceError> {
        self.store.create_comment(pid, sanitize_html(body))
    }

    pub fn edit_comment(&self, cid: &str, body: &str) -> Result<Comment, ServiceError> {
        let body = sanitize_html(body);
        self.store.update_comment(cid, |c| {
            c.body = body;
            Ok(())
        })
    }

    /// Stores the anchor. Re-anchoring replaces the previous viewpoint.
    pub fn anchor(&self, cid: &str, v: Viewpoint) -> Result<Comment, ServiceError> {
        v.validate().map_err(|e| ServiceError::Validation(e.to_string()))?;
        self.store.update_comment(cid, |c| {
            c.anchor = Some(v);
            Ok(())
        })
    }

    /// Suggests views for a draft. When a newer request for the same comment
    /// arrives before this one finishes, this one returns
    /// [`ServiceError::Superseded`].
    pub fn suggest(&self, cid: &str, req: &SuggestRequest) -> Result<SuggestResponse, ServiceError> {
        let ticket = {
            let mut seq = self.suggest_seq.lock().unwrap_or_else(|p| p.into_inner());
            let n = seq.entry(cid.to_string()).or_insert(0);
            *n += 1;
            *n
        };
        let current = || {
            self.suggest_seq
                .lock()
                .unwrap_or_else(|p| p.into_inner())
                .get(cid)
                .copied()
                == Some(ticket)
        };
        let comment = self.store.comment(cid)?;
        if req.text.trim().is_empty() {
            return Err(ServiceError::Validation("draft text is empty".into()));
        }
        let k = req.k.unwrap_or(self.config.k);
        if k == 0 {
            return Err(ServiceError::Validation("k must be at least 1".into()));
        }
        let index = self.store.ready_index(&comment.project_id)?;
        let mut found = ops::suggest(&index, &req.text, k, &self.models)?;
        if !current() {
            return Err(ServiceError::Superseded);
        }
        if req.thumbnails {
            let scene = self.store.scene(&comment.project_id)?;
            attach_thumbnails(&mut found, &scene, &self.config.viewport, self.config.thumbnail_size)
                .map_err(|e| ServiceError::Internal(e.to_string()))?;
        }
        if !current() {
            return Err(ServiceError::Superseded);
        }
        let suggestions = found
            .into_iter()
            .map(|s| {
                let thumbnail = match &s.thumbnail {
                    Some(img) => Some(
                        base64::engine::general_purpose::STANDARD
                            .encode(img.to_png().map_err(|e| ServiceError::Internal(e.to_string()))?),
                    ),
                    None => None,
                };
                Ok(SuggestionOut {
                    row: s.row,
                    viewpoint: s.viewpoint,
                    score: s.score,
                    thumbnail,
                })
            })
            .collect::<Result<_, ServiceError>>()?;
        Ok(SuggestResponse {
            comment_id: cid.to_string(),
            text: req.text.clone(),
            suggestions,
        })
    }

    /// Validates and queues a modifier run for an anchored comment.
    pub fn submit_modifier(&self, cid: &str, request: ModifierRequest) -> Result<JobRecord, ServiceError> {
        let comment = self.store.comment(cid)?;
        let Some(anchor) = comment.anchor else {
            return Err(ServiceError::Validation(
                "comment has no anchored viewpoint; anchor it first".into(),
            ));
        };
        let v = &self.config.viewport;
        request.check(v.width, v.height, !comment.attachments.is_empty(), &plain_text(&comment.body))?;
        let json = serde_json::to_value(&request).map_err(|e| ServiceError::Internal(e.to_string()))?;
        let (job, _) = self.store.submit_modifier(cid, json)?;
        self.queue.push(job.id.clone(), Task::Modifier { request, anchor });
        Ok(job)
    }

    pub fn memo(&self, cid: &str) -> Result<Memo, ServiceError> {
        let comment = self.store.comment(cid)?;
        use memovis_core::compositor::{PROVENANCE_FILE, REFERENCE_FILE, SEG_FILE, SYN_FILE};
        let attachments = comment
            .attachments
            .iter()
            .map(|job| {
                Ok(MemoAttachment {
                    job: job.clone(),
                    reference: self.store.result_file(cid, job, REFERENCE_FILE)?,
                    syn: self.store.result_file(cid, job, SYN_FILE)?,
                    seg: self.store.result_file(cid, job, SEG_FILE)?,
                    provenance: self.store.result_file(cid, job, PROVENANCE_FILE)?,
                })
            })
            .collect::<Result<_, ServiceError>>()?;
        Ok(Memo {
            anchor: AnchorRecord {
                comment_id: comment.id.clone(),
                revision: comment.revision,
                viewpoint: comment.anchor,
            },
            body: comment.body,
            attachments,
        })
    }

    pub fn export_memo(&self, cid: &str) -> Result<Vec<u8>, ServiceError> {
        self.memo(cid)?
            .to_zip()
            .map_err(|e| ServiceError::Internal(e.to_string()))
    }

    fn run_job(&self, id: &str, task: Task) {
        if let Err(e) = self.store.mark_running(id) {
            tracing::error!(job = id, "cannot start job: {e}");
            return;
        }
        tracing::info!(job = id, "job started");
        let outcome = catch_unwind(AssertUnwindSafe(|| match task {
            Task::IndexBuild { sampling } => self.run_index_build(id, &sampling),
            Task::Modifier { request, anchor } => self.run_modifier(id, &request, anchor),
        }))
        .unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            Err(format!("internal error: {msg}"))
        });
        match outcome {
            Ok(()) => tracing::info!(job = id, "job done"),
            Err(reason) => {
                tracing::warn!(job = id, %reason, "job failed");
                if let Err(e) = self.store.fail_job(id, reason) {
                    tracing::error!(job = id, "cannot record failure: {e}");
                }
            }
        }
    }

    fn run_index_build(&self, id: &str, sampling: &SamplingConfig) -> Result<(), String> {
        let job = self.store.job(id).map_err(|e| e.to_string())?;
        let scene = self.store.scene(&job.project_id).map_err(|e| e.to_string())?;
        let progress = |done: usize, total: usize| self.store.set_progress(id, done, total);
        let index = ops::build_scene_index(&scene, sampling, &self.config, &self.models, Some(&progress))
            .map_err(|e| e.to_string())?;
        self.store
            .finish_index_build(id, index)
            .map(|_| ())
            .map_err(|e| e.to_string())
    }

    fn run_modifier(&self, id: &str, request: &ModifierRequest, anchor: Viewpoint) -> Result<(), String> {
        let job = self.store.job(id).map_err(|e| e.to_string())?;
        let cid = job.comment_id.ok_or("modifier job without a comment")?;
        let comment = self.store.comment(&cid).map_err(|e| e.to_string())?;
        let scene = self.store.scene(&job.project_id).map_err(|e| e.to_string())?;
        let prior = self.store.latest_result(&comment).map_err(|e| e.to_string())?;
        let session = ops::modifier_session(scene, anchor, &self.config, self.models.clone())
            .map_err(|e| e.to_string())?;
        let result = ops::run_modifier(&session, request, prior.as_ref(), &plain_text(&comment.body), &self.config)
            .map_err(|e| e.to_string())?;
        self.store
            .finish_modifier(id, &result)
            .map(|_| ())
            .map_err(|e| e.to_string())
    }
}

/// Owns the service and its worker threads. Dropping it stops the workers
/// after their current job; jobs still queued stay queued on disk and are
/// marked interrupted at the next start.
pub struct App {
    service: Arc<Service>,
    workers: Vec<JoinHandle<()>>,
}

impl App {
    pub fn start(config: ServiceConfig, models: ModelSuite) -> Result<Self, ServiceError> {
        config.validate()?;
        let store = Store::open(&config.data_dir)?;
        let workers = config.workers;
        let service = Arc::new(Service {
            config,
            store,
            models,
            queue: Queue::default(),
            suggest_seq: Mutex::default(),
        });
        let workers = (0..workers)
            .map(|i| {
                let service = service.clone();
                std::thread::Builder::new()
                    .name(format!("memovis-worker-{i}"))
                    .spawn(move || {
                        while let Some((id, task)) = service.queue.pop() {
                            service.run_job(&id, task);
                        }
                    })
                    .map_err(|e| ServiceError::Internal(format!("cannot spawn worker: {e}")))
            })
            .collect::<Result<_, _>>()?;
        Ok(App { service, workers })
    }

    pub fn service(&self) -> &Arc<Service> {
        &self.service
    }

    pub fn shutdown(&mut self) {
        self.service.queue.shutdown();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for App {
    fn drop(&mut self) {
        self.shutdown();
    }
}
