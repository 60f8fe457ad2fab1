//! Persistent state: projects, comments and job records.
//!
//! ```text
//! <data_dir>/projects/<pid>/project.json
//! <data_dir>/projects/<pid>/scene.glb | scene.gltf
//! <data_dir>/projects/<pid>/index.mvix
//! <data_dir>/projects/<pid>/comments.json
//! <data_dir>/projects/<pid>/results/<job-id>/{reference,syn,seg}.png, provenance.json
//! <data_dir>/jobs/<job-id>.json
//! ```
//!
//! Every file is replaced atomically. The whole state is also held in
//! memory behind one mutex and rebuilt from disk at startup.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use memovis_core::compositor::ModifierResult;
use memovis_core::scene::load_scene_from_slice;
use memovis_core::viewpoint::ViewpointIndex;
use memovis_core::{SceneModel, Viewpoint};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

pub const INTERRUPTED: &str = "interrupted";
const INDEX_FILE: &str = "index.mvix";
const COMMENTS_FILE: &str = "comments.json";
const PROJECT_FILE: &str = "project.json";

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

pub fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum IndexStatus {
    Absent,
    Building { job: String, progress: f64 },
    Ready { fingerprint: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub id: String,
    pub scene_file: String,
    pub scene_fingerprint: String,
    pub created_at: u64,
    pub index: IndexStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comment {
    pub id: String,
    pub project_id: String,
    /// Sanitized HTML.
    pub body: String,
    pub anchor: Option<Viewpoint>,
    /// Ids of the modifier jobs whose results are attached, oldest first.
    pub attachments: Vec<String>,
    pub revision: u64,
    pub created_at: u64,
    pub updated_at: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobKind {
    IndexBuild,
    Modifier,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed { reason: String },
}

impl JobState {
    pub fn is_active(&self) -> bool {
        matches!(self, JobState::Queued | JobState::Running)
    }

    /// queued -> running -> done | failed. Queued jobs may also fail
    /// without running when the service restarts.
    pub fn can_become(&self, next: &JobState) -> bool {
        matches!(
            (self, next),
            (JobState::Queued, JobState::Running)
                | (JobState::Queued, JobState::Failed { .. })
                | (JobState::Running, JobState::Done)
                | (JobState::Running, JobState::Failed { .. })
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub done: usize,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub kind: JobKind,
    pub project_id: String,
    pub comment_id: Option<String>,
    #[serde(flatten)]
    pub state: JobState,
    pub progress: Option<Progress>,
    pub submitted_at: u64,
    pub started_at: Option<u64>,
    pub finished_at: Option<u64>,
    /// Where the output lives: an index file or a result directory,
    /// relative to the data directory.
    pub result: Option<String>,
    /// The modifier request as submitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request: Option<serde_json::Value>,
}

struct ProjectEntry {
    project: Project,
    scene: Arc<SceneModel>,
    index: Option<Arc<ViewpointIndex>>,
}

#[derive(Default)]
struct State {
    projects: BTreeMap<String, ProjectEntry>,
    comments: BTreeMap<String, Comment>,
    jobs: BTreeMap<String, JobRecord>,
}

pub struct Store {
    root: PathBuf,
    state: Mutex<State>,
}

/// Writes `bytes` to `path` through a sibling temporary file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension(format!("tmp-{}", new_id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ServiceError> {
    let bytes = serde_json::to_vec_pretty(value).map_err(|e| ServiceError::Internal(e.to_string()))?;
    write_atomic(path, &bytes).map_err(|e| ServiceError::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ServiceError> {
    let bytes = fs::read(path).map_err(|e| ServiceError::io(path, e))?;
    serde_json::from_slice(&bytes)
        .map_err(|e| ServiceError::Internal(format!("{}: {e}", path.display())))
}

fn scene_extension(bytes: &[u8]) -> &'static str {
    if bytes.starts_with(b"glTF") {
        "glb"
    } else {
        "gltf"
    }
}

impl Store {
    /// Opens or creates the data directory and recovers its state.
    pub fn open(root: &Path) -> Result<Self, ServiceError> {
        for dir in [root.join("projects"), root.join("jobs")] {
            fs::create_dir_all(&dir).map_err(|e| ServiceError::io(&dir, e))?;
        }
        let store = Store {
            root: root.to_path_buf(),
            state: Mutex::new(State::default()),
        };
        store.recover()?;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn project_dir(&self, pid: &str) -> PathBuf {
        self.root.join("projects").join(pid)
    }

    fn job_path(&self, id: &str) -> PathBuf {
        self.root.join("jobs").join(format!("{id}.json"))
    }

    pub fn result_dir(&self, pid: &str, job: &str) -> PathBuf {
        self.project_dir(pid).join("results").join(job)
    }

    fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }

    fn recover(&self) -> Result<(), ServiceError> {
        let mut state = self.lock();
        let projects_dir = self.root.join("projects");
        let mut entries: Vec<_> = fs::read_dir(&projects_dir)
            .map_err(|e| ServiceError::io(&projects_dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.join(PROJECT_FILE).is_file())
            .collect();
        entries.sort();
        for dir in entries {
            let mut project: Project = read_json(&dir.join(PROJECT_FILE))?;
            let scene_path = dir.join(&project.scene_file);
            let bytes = fs::read(&scene_path).map_err(|e| ServiceError::io(&scene_path, e))?;
            let scene = Arc::new(
                load_scene_from_slice(&bytes)
                    .map_err(|e| ServiceError::Internal(format!("{}: {e}", scene_path.display())))?,
            );
            // Ready only if a valid index file matches the scene.
            let index = ViewpointIndex::read(&dir.join(INDEX_FILE))
                .ok()
                .filter(|i| i.check_scene(&scene).is_ok())
                .map(Arc::new);
            let status = match &index {
                Some(_) => IndexStatus::Ready {
                    fingerprint: scene.fingerprint_hex(),
                },
                None => IndexStatus::Absent,
            };
            if status != project.index {
                tracing::warn!(project = %project.id, ?status, "index status recovered from disk");
                project.index = status;
                write_json(&dir.join(PROJECT_FILE), &project)?;
            }
            let comments_path = dir.join(COMMENTS_FILE);
            let comments: Vec<Comment> = if comments_path.is_file() {
                read_json(&comments_path)?
            } else {
                Vec::new()
            };
            for c in comments {
                state.comments.insert(c.id.clone(), c);
            }
            state.projects.insert(
                project.id.clone(),
                ProjectEntry {
                    project,
                    scene,
                    index,
                },
            );
        }

        let jobs_dir = self.root.join("jobs");
        let mut paths: Vec<_> = fs::read_dir(&jobs_dir)
            .map_err(|e| ServiceError::io(&jobs_dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let now = now_ms();
        for path in paths {
            let mut job: JobRecord = read_json(&path)?;
            if job.state.is_active() {
                tracing::warn!(job = %job.id, "job was cut short by a restart");
                job.state = JobState::Failed {
                    reason: INTERRUPTED.into(),
                };
                job.finished_at = Some(now);
                write_json(&path, &job)?;
            }
            state.jobs.insert(job.id.clone(), job);
        }

        // Attachments must point at results that exist.
        let mut touched = Vec::new();
        for c in state.comments.values_mut() {
            let before = c.attachments.len();
            let root = &self.root;
            c.attachments.retain(|job| {
                root.join("projects")
                    .join(&c.project_id)
                    .join("results")
                    .join(job)
                    .join(memovis_core::compositor::PROVENANCE_FILE)
                    .is_file()
            });
            if c.attachments.len() != before {
                c.revision += 1;
                touched.push(c.project_id.clone());
            }
        }
        touched.dedup();
        for pid in touched {
            self.persist_comments(&state, &pid)?;
        }
        Ok(())
    }

    pub fn create_project(&self, bytes: &[u8]) -> Result<Project, ServiceError> {
        let scene = load_scene_from_slice(bytes).map_err(|e| ServiceError::Unprocessable(e.to_string()))?;
        let id = new_id();
        let dir = self.project_dir(&id);
        fs::create_dir_all(dir.join("results")).map_err(|e| ServiceError::io(&dir, e))?;
        let scene_file = format!("scene.{}", scene_extension(bytes));
        write_atomic(&dir.join(&scene_file), bytes).map_err(|e| ServiceError::io(&dir, e))?;
        let project = Project {
            id: id.clone(),
            scene_file,
            scene_fingerprint: scene.fingerprint_hex(),
            created_at: now_ms(),
            index: IndexStatus::Absent,
        };
        write_json(&dir.join(COMMENTS_FILE), &Vec::<Comment>::new())?;
        write_json(&dir.join(PROJECT_FILE), &project)?;
        self.lock().projects.insert(
            id,
            ProjectEntry {
                project: project.clone(),
                scene: Arc::new(scene),
                index: None,
            },
        );
        Ok(project)
    }

    pub fn project(&self, pid: &str) -> Result<Project, ServiceError> {
        self.lock()
            .projects
            .get(pid)
            .map(|e| e.project.clone())
            .ok_or_else(|| ServiceError::NotFound(format!("project {pid}")))
    }

    pub fn projects(&self) -> Vec<Project> {
        self.lock().projects.values().map(|e| e.project.clone()).collect()
    }

    pub fn scene(&self, pid: &str) -> Result<Arc<SceneModel>, ServiceError> {
        self.lock()
            .projects
            .get(pid)
            .map(|e| e.scene.clone())
            .ok_or_else(|| ServiceError::NotFound(format!("project {pid}")))
    }

    pub fn scene_path(&self, pid: &str) -> Result<PathBuf, ServiceError> {
        let p = self.project(pid)?;
        Ok(self.project_dir(pid).join(p.scene_file))
    }

    /// The ready index of a project, or [`ServiceError::IndexNotReady`].
    pub fn ready_index(&self, pid: &str) -> Result<Arc<ViewpointIndex>, ServiceError> {
        let state = self.lock();
        let entry = state
            .projects
            .get(pid)
            .ok_or_else(|| ServiceError::NotFound(format!("project {pid}")))?;
        entry.index.clone().ok_or(ServiceError::IndexNotReady)
    }

    fn persist_project(&self, project: &Project) -> Result<(), ServiceError> {
        write_json(&self.project_dir(&project.id).join(PROJECT_FILE), project)
    }

    fn persist_comments(&self, state: &State, pid: &str) -> Result<(), ServiceError> {
        let list: Vec<&Comment> = state.comments.values().filter(|c| c.project_id == pid).collect();
        write_json(&self.project_dir(pid).join(COMMENTS_FILE), &list)
    }

    fn persist_job(&self, job: &JobRecord) -> Result<(), ServiceError> {
        write_json(&self.job_path(&job.id), job)
    }

    pub fn create_comment(&self, pid: &str, body: String) -> Result<Comment, ServiceError> {
        let mut state = self.lock();
        if !state.projects.contains_key(pid) {
            return Err(ServiceError::NotFound(format!("project {pid}")));
        }
        let now = now_ms();
        let comment = Comment {
            id: new_id(),
            project_id: pid.to_string(),
            body,
            anchor: None,
            attachments: Vec::new(),
            revision: 1,
            created_at: now,
            updated_at: now,
        };
        state.comments.insert(comment.id.clone(), comment.clone());
        self.persist_comments(&state, pid)?;
        Ok(comment)
    }

    pub fn comment(&self, cid: &str) -> Result<Comment, ServiceError> {
        self.lock()
            .comments
            .get(cid)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("comment {cid}")))
    }

    pub fn comments(&self, pid: &str) -> Result<Vec<Comment>, ServiceError> {
        let state = self.lock();
        if !state.projects.contains_key(pid) {
            return Err(ServiceError::NotFound(format!("project {pid}")));
        }
        Ok(state.comments.values().filter(|c| c.project_id == pid).cloned().collect())
    }

    /// Applies `edit` to a comment. The revision advances only when the
    /// comment actually changed, which keeps repeated identical edits
    /// idempotent.
    pub fn update_comment(
        &self,
        cid: &str,
        edit: impl FnOnce(&mut Comment) -> Result<(), ServiceError>,
    ) -> Result<Comment, ServiceError> {
        let mut state = self.lock();
        let current = state
            .comments
            .get(cid)
            .ok_or_else(|| ServiceError::NotFound(format!("comment {cid}")))?;
        let mut next = current.clone();
        edit(&mut next)?;
        if next == *current {
            return Ok(next);
        }
        next.revision = current.revision + 1;
        next.updated_at = now_ms();
        let pid = next.project_id.clone();
        state.comments.insert(cid.to_string(), next.clone());
        self.persist_comments(&state, &pid)?;
        Ok(next)
    }

    pub fn job(&self, id: &str) -> Result<JobRecord, ServiceError> {
        self.lock()
            .jobs
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("job {id}")))
    }

    /// Records a queued index build unless one is already active.
    pub fn submit_index_build(&self, pid: &str, total: usize) -> Result<JobRecord, ServiceError> {
        let mut state = self.lock();
        let entry = state
            .projects
            .get(pid)
            .ok_or_else(|| ServiceError::NotFound(format!("project {pid}")))?;
        if let IndexStatus::Building { job, .. } = &entry.project.index {
            return Err(ServiceError::Conflict(format!("index build {job} is already in progress")));
        }
        let job = JobRecord {
            id: new_id(),
            kind: JobKind::IndexBuild,
            project_id: pid.to_string(),
            comment_id: None,
            state: JobState::Queued,
            progress: Some(Progress { done: 0, total }),
            submitted_at: now_ms(),
            started_at: None,
            finished_at: None,
            result: None,
            request: None,
        };
        self.persist_job(&job)?;
        let entry = state.projects.get_mut(pid).expect("checked above");
        entry.project.index = IndexStatus::Building {
            job: job.id.clone(),
            progress: 0.0,
        };
        self.persist_project(&entry.project)?;
        state.jobs.insert(job.id.clone(), job.clone());
        Ok(job)
    }

    /// Records a queued modifier job for an anchored comment with no other
    /// active modifier job.
    pub fn submit_modifier(
        &self,
        cid: &str,
        request: serde_json::Value,
    ) -> Result<(JobRecord, Comment), ServiceError> {
        let mut state = self.lock();
        let comment = state
            .comments
            .get(cid)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("comment {cid}")))?;
        if comment.anchor.is_none() {
            return Err(ServiceError::Validation(
                "comment has no anchored viewpoint; anchor it first".into(),
            ));
        }
        if let Some(active) = state.jobs.values().find(|j| {
            j.kind == JobKind::Modifier && j.comment_id.as_deref() == Some(cid) && j.state.is_active()
        }) {
            return Err(ServiceError::Conflict(format!(
                "modifier job {} is still active for this comment",
                active.id
            )));
        }
        let job = JobRecord {
            id: new_id(),
            kind: JobKind::Modifier,
            project_id: comment.project_id.clone(),
            comment_id: Some(cid.to_string()),
            state: JobState::Queued,
            progress: None,
            submitted_at: now_ms(),
            started_at: None,
            finished_at: None,
            result: None,
            request: Some(request),
        };
        self.persist_job(&job)?;
        state.jobs.insert(job.id.clone(), job.clone());
        Ok((job, comment))
    }

    fn transition(&self, state: &mut State, id: &str, next: JobState) -> Result<JobRecord, ServiceError> {
        let job = state
            .jobs
            .get_mut(id)
            .ok_or_else(|| ServiceError::NotFound(format!("job {id}")))?;
        if !job.state.can_become(&next) {
            return Err(ServiceError::Internal(format!(
                "job {id}: illegal transition {:?} -> {next:?}",
                job.state
            )));
        }
        let now = now_ms();
        match next {
            JobState::Running => job.started_at = Some(now),
            _ => job.finished_at = Some(now),
        }
        job.state = next;
        let job = job.clone();
        self.persist_job(&job)?;
        Ok(job)
    }

    pub fn mark_running(&self, id: &str) -> Result<JobRecord, ServiceError> {
        let mut state = self.lock();
        self.transition(&mut state, id, JobState::Running)
    }

    /// In-memory progress update; persisted with the next transition.
    pub fn set_progress(&self, id: &str, done: usize, total: usize) {
        let mut state = self.lock();
        let Some(job) = state.jobs.get_mut(id) else {
            return;
        };
        job.progress = Some(Progress { done, total });
        let pid = job.project_id.clone();
        if let Some(entry) = state.projects.get_mut(&pid) {
            if let IndexStatus::Building { job, progress } = &mut entry.project.index {
                if job == id {
                    *progress = if total == 0 { 1.0 } else { done as f64 / total as f64 };
                }
            }
        }
    }

    pub fn fail_job(&self, id: &str, reason: String) -> Result<JobRecord, ServiceError> {
        let mut state = self.lock();
        let job = self.transition(&mut state, id, JobState::Failed { reason })?;
        if job.kind == JobKind::IndexBuild {
            if let Some(entry) = state.projects.get_mut(&job.project_id) {
                if matches!(&entry.project.index, IndexStatus::Building { job: j, .. } if *j == job.id) {
                    entry.project.index = match &entry.index {
                        Some(_) => IndexStatus::Ready {
                            fingerprint: entry.scene.fingerprint_hex(),
                        },
                        None => IndexStatus::Absent,
                    };
                    self.persist_project(&entry.project)?;
                }
            }
        }
        Ok(job)
    }

    /// Stores a built index and marks the project ready.
    pub fn finish_index_build(&self, id: &str, index: ViewpointIndex) -> Result<JobRecord, ServiceError> {
        let pid = self.job(id)?.project_id;
        let scene = self.scene(&pid)?;
        index
            .check_scene(&scene)
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        let path = self.project_dir(&pid).join(INDEX_FILE);
        write_atomic(&path, &index.to_bytes()).map_err(|e| ServiceError::io(&path, e))?;
        let mut state = self.lock();
        let mut job = self.transition(&mut state, id, JobState::Done)?;
        job.result = Some(self.relative(&path));
        self.persist_job(&job)?;
        state.jobs.insert(job.id.clone(), job.clone());
        let entry = state
            .projects
            .get_mut(&pid)
            .ok_or_else(|| ServiceError::NotFound(format!("project {pid}")))?;
        entry.index = Some(Arc::new(index));
        entry.project.index = IndexStatus::Ready {
            fingerprint: entry.scene.fingerprint_hex(),
        };
        self.persist_project(&entry.project)?;
        Ok(job)
    }

    /// Writes a modifier result, attaches it to its comment and marks the
    /// job done.
    pub fn finish_modifier(&self, id: &str, result: &ModifierResult) -> Result<JobRecord, ServiceError> {
        let job = self.job(id)?;
        let cid = job
            .comment_id
            .clone()
            .ok_or_else(|| ServiceError::Internal(format!("job {id} has no comment")))?;
        let dir = self.result_dir(&job.project_id, id);
        let staging = dir.with_extension("partial");
        let _ = fs::remove_dir_all(&staging);
        result
            .write_dir(&staging)
            .map_err(|e| ServiceError::Internal(format!("{}: {e}", staging.display())))?;
        fs::rename(&staging, &dir).map_err(|e| ServiceError::io(&dir, e))?;
        // Attach before marking done so a finished job is always visible
        // on its comment.
        let mut state = self.lock();
        let comment = state
            .comments
            .get_mut(&cid)
            .ok_or_else(|| ServiceError::NotFound(format!("comment {cid}")))?;
        comment.attachments.push(id.to_string());
        comment.revision += 1;
        comment.updated_at = now_ms();
        let pid = comment.project_id.clone();
        self.persist_comments(&state, &pid)?;
        let mut job = self.transition(&mut state, id, JobState::Done)?;
        job.result = Some(self.relative(&dir));
        self.persist_job(&job)?;
        state.jobs.insert(job.id.clone(), job.clone());
        Ok(job)
    }

    /// The newest attachment of a comment, if any.
    pub fn latest_result(&self, comment: &Comment) -> Result<Option<ModifierResult>, ServiceError> {
        let Some(last) = comment.attachments.last() else {
            return Ok(None);
        };
        self.read_result(&comment.project_id, last).map(Some)
    }

    pub fn read_result(&self, pid: &str, job: &str) -> Result<ModifierResult, ServiceError> {
        if !valid_id(job) {
            return Err(ServiceError::NotFound(format!("result {job}")));
        }
        let dir = self.result_dir(pid, job);
        ModifierResult::read_dir(&dir).map_err(|e| ServiceError::Internal(format!("{}: {e}", dir.display())))
    }

    /// Raw bytes of one file of an attached result.
    pub fn result_file(&self, cid: &str, job: &str, file: &str) -> Result<Vec<u8>, ServiceError> {
        use memovis_core::compositor::{PROVENANCE_FILE, REFERENCE_FILE, SEG_FILE, SYN_FILE};
        let comment = self.comment(cid)?;
        if !comment.attachments.iter().any(|a| a == job)
            || ![REFERENCE_FILE, SYN_FILE, SEG_FILE, PROVENANCE_FILE].contains(&file)
        {
            return Err(ServiceError::NotFound(format!("attachment {job}/{file}")));
        }
        let path = self.result_dir(&comment.project_id, job).join(file);
        fs::read(&path).map_err(|e| ServiceError::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn job_transitions() {
        use JobState::*;
        let failed = Failed { reason: "x".into() };
        assert!(Queued.can_become(&Running));
        assert!(Running.can_become(&Done));
        assert!(Running.can_become(&failed));
        assert!(Queued.can_become(&failed));
        assert!(!Queued.can_become(&Done));
        assert!(!Done.can_become(&Running));
        assert!(!failed.can_become(&Running));
        assert!(!Running.can_become(&Queued));
    }

    #[test]
    fn job_record_json_shape() {
        let job = JobRecord {
            id: "j".into(),
            kind: JobKind::IndexBuild,
            project_id: "p".into(),
            comment_id: None,
            state: JobState::Failed { reason: "boom".into() },
            progress: Some(Progress { done: 1, total: 8 }),
            submitted_at: 1,
            started_at: Some(2),
            finished_at: Some(3),
            result: None,
            request: None,
        };
        let v = serde_json::to_value(&job).unwrap();
        assert_eq!(v["state"], "failed");
        assert_eq!(v["reason"], "boom");
        assert_eq!(v["kind"], "index-build");
        let back: JobRecord = serde_json::from_value(v).unwrap();
        assert_eq!(back, job);
    }

    #[test]
    fn ids_are_path_safe() {
        assert!(valid_id(&new_id()));
        assert!(!valid_id("../x"));
        assert!(!valid_id(""));
    }
}
