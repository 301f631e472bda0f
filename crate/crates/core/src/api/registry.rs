//! Persistent run registry: an append-only JSON-lines journal replayed at
//! startup, per-run directories, and a FIFO worker pool.

use std::collections::{HashMap, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use parking_lot::{Condvar, Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::runner::{read_dataset, run_experiment_with_progress, unix_now, write_dataset};
use crate::scenario::ExperimentSpec;
use crate::{Error, Result, FORMAT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunState {
    Queued,
    Running,
    Completed,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum JournalEntry {
    Created {
        run_id: String,
        spec: ExperimentSpec,
        idempotency_key: Option<String>,
        body_sha256: String,
        t: f64,
    },
    Submitted {
        run_id: String,
        t: f64,
    },
    Started {
        run_id: String,
        t: f64,
    },
    Completed {
        run_id: String,
        t: f64,
        iq_sha256: String,
    },
    Failed {
        run_id: String,
        t: f64,
        error: String,
    },
}

#[derive(Debug)]
struct Run {
    spec: ExperimentSpec,
    state: RunState,
    submitted: bool,
    created: f64,
    started: Option<f64>,
    finished: Option<f64>,
    iq_sha256: Option<String>,
    error: Option<String>,
    done: AtomicUsize,
    total: AtomicUsize,
}

impl Run {
    fn new(spec: ExperimentSpec, created: f64) -> Self {
        let total = spec.num_snapshots() * spec.ues.len();
        Self {
            spec,
            state: RunState::Queued,
            submitted: false,
            created,
            started: None,
            finished: None,
            iq_sha256: None,
            error: None,
            done: AtomicUsize::new(0),
            total: AtomicUsize::new(total),
        }
    }

    fn progress(&self) -> f64 {
        match self.state {
            RunState::Completed => 1.0,
            RunState::Queued => 0.0,
            _ => {
                let total = self.total.load(Ordering::Relaxed);
                if total == 0 {
                    0.0
                } else {
                    (self.done.load(Ordering::Relaxed) as f64 / total as f64).min(1.0)
                }
            }
        }
    }
}

/// What clients see of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunView {
    pub format_version: u32,
    pub run_id: String,
    pub name: String,
    pub state: RunState,
    pub progress: f64,
    /// Whether the run has been handed to the worker queue.
    pub submitted: bool,
    /// 0-based position in the FIFO while waiting for a worker.
    pub queue_position: Option<usize>,
    pub created_unix_s: f64,
    pub started_unix_s: Option<f64>,
    pub finished_unix_s: Option<f64>,
    pub dataset_path: Option<String>,
    pub iq_sha256: Option<String>,
    pub error: Option<String>,
    pub spec: ExperimentSpec,
}

#[derive(Debug, PartialEq, Eq)]
pub enum CreateOutcome {
    Created(String),
    Existing(String),
    /// Same idempotency key, different body.
    Conflict(String),
}

struct Inner {
    data_dir: PathBuf,
    runs: RwLock<HashMap<String, Run>>,
    /// Creation order, for listing.
    order: RwLock<Vec<String>>,
    idempotency: Mutex<HashMap<String, (String, String)>>,
    journal: Mutex<File>,
    queue: Mutex<VecDeque<String>>,
    wake: Condvar,
    shutdown: AtomicBool,
}

/// Cheap to clone; all clones share one registry.
#[derive(Clone)]
pub struct Registry {
    inner: Arc<Inner>,
    workers: Arc<Mutex<Vec<JoinHandle<()>>>>,
}

impl Registry {
    /// Opens (or creates) the registry under `data_dir`, replays the journal
    /// and starts `workers` background workers. Runs interrupted mid-execution
    /// by a previous shutdown are marked failed; submitted runs that never
    /// started are queued again.
    pub fn open(data_dir: impl Into<PathBuf>, workers: usize) -> Result<Self> {
        let data_dir = data_dir.into();
        fs::create_dir_all(data_dir.join("runs")).map_err(|e| Error::io(&data_dir, e))?;
        let journal_path = data_dir.join("journal.jsonl");
        let (runs, order, idempotency) = replay(&journal_path)?;
        let journal = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&journal_path)
            .map_err(|e| Error::io(&journal_path, e))?;
        let registry = Self {
            inner: Arc::new(Inner {
                data_dir,
                runs: RwLock::new(runs),
                order: RwLock::new(order),
                idempotency: Mutex::new(idempotency),
                journal: Mutex::new(journal),
                queue: Mutex::new(VecDeque::new()),
                wake: Condvar::new(),
                shutdown: AtomicBool::new(false),
            }),
            workers: Arc::new(Mutex::new(Vec::new())),
        };

        let (interrupted, pending): (Vec<String>, Vec<String>) = {
            let runs = registry.inner.runs.read();
            let order = registry.inner.order.read();
            let interrupted = order.iter().filter(|id| runs[*id].state == RunState::Running).cloned().collect();
            let pending = order
                .iter()
                .filter(|id| runs[*id].state == RunState::Queued && runs[*id].submitted)
                .cloned()
                .collect();
            (interrupted, pending)
        };
        for id in interrupted {
            registry.fail(&id, "service stopped while the run was executing")?;
        }
        registry.inner.queue.lock().extend(pending);

        let mut handles = registry.workers.lock();
        for _ in 0..workers.max(1) {
            let inner = Arc::clone(&registry.inner);
            handles.push(std::thread::spawn(move || worker_loop(&inner)));
        }
        drop(handles);
        Ok(registry)
    }

    pub fn data_dir(&self) -> &Path {
        &self.inner.data_dir
    }

    pub fn run_dir(&self, id: &str) -> PathBuf {
        self.inner.data_dir.join("runs").join(id)
    }

    pub fn dataset_dir(&self, id: &str) -> PathBuf {
        self.run_dir(id).join("dataset")
    }

    fn append(&self, entry: &JournalEntry) -> Result<()> {
        append(&self.inner, entry)
    }

    /// Registers a validated spec. With an idempotency key, a repeated body
    /// returns the original run and a different body is a conflict.
    pub fn create(&self, spec: ExperimentSpec, body_sha256: String, idempotency_key: Option<String>) -> Result<CreateOutcome> {
        let mut keys = self.inner.idempotency.lock();
        if let Some(key) = &idempotency_key {
            if let Some((run_id, digest)) = keys.get(key) {
                return Ok(if *digest == body_sha256 {
                    CreateOutcome::Existing(run_id.clone())
                } else {
                    CreateOutcome::Conflict(run_id.clone())
                });
            }
        }
        let run_id = uuid::Uuid::new_v4().simple().to_string();
        let t = unix_now();
        self.append(&JournalEntry::Created {
            run_id: run_id.clone(),
            spec: spec.clone(),
            idempotency_key: idempotency_key.clone(),
            body_sha256: body_sha256.clone(),
            t,
        })?;
        self.inner.runs.write().insert(run_id.clone(), Run::new(spec, t));
        self.inner.order.write().push(run_id.clone());
        if let Some(key) = idempotency_key {
            keys.insert(key, (run_id.clone(), body_sha256));
        }
        Ok(CreateOutcome::Created(run_id))
    }

    /// Hands a queued run to the workers. Returns false if it was already submitted.
    pub fn submit(&self, id: &str) -> Result<Option<bool>> {
        {
            let mut runs = self.inner.runs.write();
            let Some(run) = runs.get_mut(id) else {
                return Ok(None);
            };
            if run.submitted || run.state != RunState::Queued {
                return Ok(Some(false));
            }
            run.submitted = true;
        }
        self.append(&JournalEntry::Submitted { run_id: id.to_string(), t: unix_now() })?;
        self.inner.queue.lock().push_back(id.to_string());
        self.inner.wake.notify_one();
        Ok(Some(true))
    }

    fn fail(&self, id: &str, error: &str) -> Result<()> {
        finish(&self.inner, id, Err(error.to_string()))
    }

    pub fn get(&self, id: &str) -> Option<RunView> {
        let runs = self.inner.runs.read();
        let run = runs.get(id)?;
        let queue_position = if run.state == RunState::Queued && run.submitted {
            self.inner.queue.lock().iter().position(|q| q == id)
        } else {
            None
        };
        Some(RunView {
            format_version: FORMAT_VERSION,
            run_id: id.to_string(),
            name: run.spec.name.clone(),
            state: run.state,
            progress: run.progress(),
            submitted: run.submitted,
            queue_position,
            created_unix_s: run.created,
            started_unix_s: run.started,
            finished_unix_s: run.finished,
            dataset_path: (run.state == RunState::Completed).then(|| self.dataset_dir(id).display().to_string()),
            iq_sha256: run.iq_sha256.clone(),
            error: run.error.clone(),
            spec: run.spec.clone(),
        })
    }

    pub fn list(&self) -> Vec<RunView> {
        let order = self.inner.order.read().clone();
        order.iter().filter_map(|id| self.get(id)).collect()
    }

    /// Stops the workers after their current run. Queued runs stay in the journal.
    pub fn shutdown(&self) {
        self.inner.shutdown.store(true, Ordering::SeqCst);
        self.inner.wake.notify_all();
        let handles: Vec<_> = self.workers.lock().drain(..).collect();
        for h in handles {
            let _ = h.join();
        }
    }
}

fn append(inner: &Inner, entry: &JournalEntry) -> Result<()> {
    let mut line = serde_json::to_string(entry)?;
    line.push('\n');
    let path = inner.data_dir.join("journal.jsonl");
    let mut f = inner.journal.lock();
    f.write_all(line.as_bytes()).map_err(|e| Error::io(&path, e))?;
    f.sync_data().map_err(|e| Error::io(&path, e))
}

fn finish(inner: &Inner, id: &str, result: std::result::Result<String, String>) -> Result<()> {
    let t = unix_now();
    let entry = match &result {
        Ok(digest) => JournalEntry::Completed { run_id: id.to_string(), t, iq_sha256: digest.clone() },
        Err(e) => JournalEntry::Failed { run_id: id.to_string(), t, error: e.clone() },
    };
    append(inner, &entry)?;
    if let Some(run) = inner.runs.write().get_mut(id) {
        run.finished = Some(t);
        match result {
            Ok(digest) => {
                run.state = RunState::Completed;
                run.iq_sha256 = Some(digest);
            }
            Err(e) => {
                run.state = RunState::Failed;
                run.error = Some(e);
            }
        }
    }
    Ok(())
}

type Replayed = (HashMap<String, Run>, Vec<String>, HashMap<String, (String, String)>);

fn replay(path: &Path) -> Result<Replayed> {
    let mut runs = HashMap::new();
    let mut order = Vec::new();
    let mut keys = HashMap::new();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((runs, order, keys)),
        Err(e) => return Err(Error::io(path, e)),
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: JournalEntry = match serde_json::from_str(&line) {
            Ok(e) => e,
            // A torn final line from a crash mid-append is dropped.
            Err(_) if i > 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    reason: format!("line {}: {e}", i + 1),
                })
            }
        };
        match entry {
            JournalEntry::Created { run_id, spec, idempotency_key, body_sha256, t } => {
                if let Some(k) = idempotency_key {
                    keys.insert(k, (run_id.clone(), body_sha256));
                }
                runs.insert(run_id.clone(), Run::new(spec, t));
                order.push(run_id);
            }
            JournalEntry::Submitted { run_id, .. } => {
                if let Some(r) = runs.get_mut(&run_id) {
                    r.submitted = true;
                }
            }
            JournalEntry::Started { run_id, t } => {
                if let Some(r) = runs.get_mut(&run_id) {
                    r.state = RunState::Running;
                    r.started = Some(t);
                }
            }
            JournalEntry::Completed { run_id, t, iq_sha256 } => {
                if let Some(r) = runs.get_mut(&run_id) {
                    r.state = RunState::Completed;
                    r.finished = Some(t);
                    r.iq_sha256 = Some(iq_sha256);
                    let total = r.total.load(Ordering::Relaxed);
                    r.done.store(total, Ordering::Relaxed);
                }
            }
            JournalEntry::Failed { run_id, t, error } => {
                if let Some(r) = runs.get_mut(&run_id) {
                    r.state = RunState::Failed;
                    r.finished = Some(t);
                    r.error = Some(error);
                }
            }
        }
    }
    Ok((runs, order, keys))
}

fn worker_loop(inner: &Arc<Inner>) {
    loop {
        let id = {
            let mut q = inner.queue.lock();
            loop {
                if inner.shutdown.load(Ordering::SeqCst) {
                    return;
                }
                if let Some(id) = q.pop_front() {
                    break id;
                }
                inner.wake.wait(&mut q);
            }
        };
        let spec = {
            let mut runs = inner.runs.write();
            let Some(run) = runs.get_mut(&id) else { continue };
            if run.state != RunState::Queued {
                continue;
            }
            run.state = RunState::Running;
            run.started = Some(unix_now());
            run.spec.clone()
        };
        let started = JournalEntry::Started { run_id: id.clone(), t: unix_now() };
        if let Err(e) = append(inner, &started) {
            let _ = finish(inner, &id, Err(e.to_string()));
            continue;
        }
        let result = execute(inner, &id, &spec);
        let _ = finish(inner, &id, result);
    }
}

fn execute(inner: &Arc<Inner>, id: &str, spec: &ExperimentSpec) -> std::result::Result<String, String> {
    let dir = inner.data_dir.join("runs").join(id).join("dataset");
    let progress = |p: crate::runner::Progress| {
        if let Some(run) = inner.runs.read().get(id) {
            run.total.store(p.total, Ordering::Relaxed);
            run.done.fetch_max(p.completed, Ordering::Relaxed);
        }
    };
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| -> Result<String> {
        let ds = run_experiment_with_progress(spec, &progress)?;
        let digest = write_dataset(&ds, &dir)?;
        read_dataset(&dir)?;
        Ok(digest)
    }));
    match outcome {
        Ok(Ok(digest)) => Ok(digest),
        Ok(Err(e)) => Err(e.to_string()),
        Err(_) => Err("run panicked".to_string()),
    }
}
