//! Interactive sessions: one [`Experiment`] per session, a background
//! training thread while running, and a broadcast of [`MetricsFrame`]s.
//!
//! Sessions live in memory only; nothing survives a restart except what a
//! client exported as an [`ExperimentRecord`].

pub mod http;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::thread;

use capmeter_core::{Edit, MeasurementReport, TrainingConfig};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

use crate::csv_io::parse_csv;
use crate::error::{Error, Result};
use crate::experiment::{
    unix_now, DatasetSpec, DatasetSummary, Experiment, ExperimentRecord, ExperimentSpec, MetricsFrame,
    SCHEMA_VERSION,
};

/// Frames buffered per subscriber before the slowest one starts skipping.
const FRAME_BUFFER: usize = 1024;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub max_sessions: usize,
    /// Epochs per metric frame for sessions created without a `config`.
    pub cadence: u32,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { max_sessions: 64, cadence: TrainingConfig::default().epochs_per_tick }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Idle,
    Running,
    Paused,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Control {
    Start,
    Pause,
    Step { count: u64 },
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    #[serde(flatten)]
    pub summary: DatasetSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDescriptor {
    pub schema_version: u32,
    pub session_id: String,
    pub state: RunState,
    pub created_at: u64,
    pub step: u64,
    pub generation: u64,
    pub topology: capmeter_core::Topology,
    pub config: TrainingConfig,
    pub dataset: DatasetInfo,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub latest: MetricsFrame,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub last_error: Option<String>,
}

/// Body of `POST /sessions`; every part falls back to the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CreateRequest {
    pub schema_version: u32,
    #[serde(default)]
    pub topology: Option<capmeter_core::Topology>,
    #[serde(default)]
    pub config: Option<TrainingConfig>,
    #[serde(default)]
    pub dataset: Option<DatasetSpec>,
    #[serde(default)]
    pub train_fraction: Option<f64>,
    #[serde(default)]
    pub split_seed: Option<u64>,
    #[serde(default)]
    pub bias_threshold: Option<capmeter_core::BiasThreshold>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchResponse {
    pub schema_version: u32,
    pub session: SessionDescriptor,
    pub measurements: MeasurementReport,
}

struct Session {
    id: String,
    created_at: u64,
    state: RunState,
    loop_active: bool,
    experiment: Experiment,
    latest: MetricsFrame,
    last_error: Option<String>,
}

struct Handle {
    session: Mutex<Session>,
    frames: broadcast::Sender<MetricsFrame>,
}

impl Handle {
    fn lock(&self) -> MutexGuard<'_, Session> {
        self.session.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Records and broadcasts the current frame. Callers hold the lock, so
    /// every subscriber sees frames in the same order.
    fn publish(&self, s: &mut Session) -> Result<()> {
        s.latest = s.experiment.frame()?;
        // no receivers is fine
        let _ = self.frames.send(s.latest.clone());
        Ok(())
    }

    fn refresh(&self, s: &mut Session) -> Result<()> {
        s.latest = s.experiment.frame()?;
        Ok(())
    }
}

#[derive(Clone)]
pub struct SessionManager {
    inner: Arc<Inner>,
}

struct Inner {
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Handle>>>,
}

impl SessionManager {
    pub fn new(config: ServiceConfig) -> Self {
        Self { inner: Arc::new(Inner { config, sessions: RwLock::new(HashMap::new()) }) }
    }

    fn handle(&self, id: &str) -> Result<Arc<Handle>> {
        self.inner
            .sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| Error::NotFound(id.to_owned()))
    }

    fn register(&self, experiment: Experiment) -> Result<SessionDescriptor> {
        let latest = experiment.frame()?;
        let mut sessions = self.inner.sessions.write().unwrap_or_else(|e| e.into_inner());
        if sessions.len() >= self.inner.config.max_sessions {
            return Err(Error::SessionLimit(self.inner.config.max_sessions));
        }
        let id = uuid::Uuid::new_v4().simple().to_string();
        let (frames, _) = broadcast::channel(FRAME_BUFFER);
        let session = Session {
            id: id.clone(),
            created_at: unix_now(),
            state: RunState::Idle,
            loop_active: false,
            experiment,
            latest,
            last_error: None,
        };
        let descriptor = describe(&session);
        sessions.insert(id, Arc::new(Handle { session: Mutex::new(session), frames }));
        Ok(descriptor)
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn create(&self, request: CreateRequest) -> Result<SessionDescriptor> {
        if request.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion { found: request.schema_version.into(), expected: SCHEMA_VERSION });
        }
        let defaults = ExperimentSpec::default();
        let config = request.config.unwrap_or_else(|| TrainingConfig {
            epochs_per_tick: self.inner.config.cadence,
            ..TrainingConfig::default()
        });
        let spec = ExperimentSpec {
            topology: request.topology.unwrap_or(defaults.topology),
            config,
            dataset: request.dataset.unwrap_or(defaults.dataset),
            train_fraction: request.train_fraction.unwrap_or(defaults.train_fraction),
            split_seed: request.split_seed.unwrap_or(defaults.split_seed),
            bias_threshold: request.bias_threshold.unwrap_or(defaults.bias_threshold),
            epochs: defaults.epochs,
        };
        self.register(Experiment::new(spec)?)
    }

    pub fn get(&self, id: &str) -> Result<SessionDescriptor> {
        Ok(describe(&self.handle(id)?.lock()))
    }

    /// Applies an edit. A running session is paused for the duration (the
    /// training thread blocks on the session lock) and then continues.
    pub fn patch_topology(&self, id: &str, edit: &Edit) -> Result<PatchResponse> {
        let handle = self.handle(id)?;
        let mut s = handle.lock();
        let mut next = s.experiment.clone();
        let measurements = next.apply_edit(edit)?;
        s.experiment = next;
        handle.refresh(&mut s)?;
        Ok(PatchResponse { schema_version: SCHEMA_VERSION, session: describe(&s), measurements })
    }

    pub fn control(&self, id: &str, action: &Control) -> Result<SessionDescriptor> {
        let handle = self.handle(id)?;
        let mut s = handle.lock();
        match (action, s.state) {
            (Control::Start, RunState::Idle | RunState::Paused) => {
                s.state = RunState::Running;
                s.last_error = None;
                if !s.loop_active {
                    s.loop_active = true;
                    spawn_training(Arc::clone(&handle));
                }
            }
            (Control::Pause, RunState::Running) => s.state = RunState::Paused,
            (Control::Step { count }, RunState::Idle | RunState::Paused) => {
                if *count == 0 {
                    return Err(Error::Validation("step count must be at least 1".into()));
                }
                let mut next = s.experiment.clone();
                next.train_epochs(*count)?;
                s.experiment = next;
                handle.publish(&mut s)?;
            }
            (Control::Reset, _) => {
                // a running loop notices the state change and exits
                s.experiment.reset();
                s.state = RunState::Idle;
                handle.publish(&mut s)?;
            }
            (action, state) => {
                return Err(Error::Conflict(format!("cannot {action:?} a session that is {state:?}")));
            }
        }
        Ok(describe(&s))
    }

    pub fn upload_dataset(&self, id: &str, csv: &[u8]) -> Result<DatasetSummary> {
        let dataset = parse_csv(csv)?;
        let handle = self.handle(id)?;
        let mut s = handle.lock();
        let mut next = s.experiment.clone();
        let summary = next.replace_dataset(dataset)?;
        s.experiment = next;
        s.state = RunState::Idle;
        handle.publish(&mut s)?;
        Ok(summary)
    }

    pub fn export(&self, id: &str) -> Result<ExperimentRecord> {
        Ok(self.handle(id)?.lock().experiment.to_record())
    }

    pub fn import(&self, record: &ExperimentRecord) -> Result<SessionDescriptor> {
        self.register(Experiment::from_record(record)?)
    }

    /// The latest frame plus a receiver for everything published after it.
    pub fn subscribe(&self, id: &str) -> Result<(MetricsFrame, broadcast::Receiver<MetricsFrame>)> {
        let handle = self.handle(id)?;
        let s = handle.lock();
        Ok((s.latest.clone(), handle.frames.subscribe()))
    }
}

fn describe(s: &Session) -> SessionDescriptor {
    let e = &s.experiment;
    let d = e.dataset();
    let generated = d.source() != capmeter_core::DataSource::Uploaded;
    SessionDescriptor {
        schema_version: SCHEMA_VERSION,
        session_id: s.id.clone(),
        state: s.state,
        created_at: s.created_at,
        step: e.epoch(),
        generation: e.generation(),
        topology: e.topology().clone(),
        config: e.spec().config.clone(),
        dataset: DatasetInfo {
            summary: e.dataset_summary(),
            seed: generated.then(|| d.seed()),
            noise: generated.then(|| d.noise()),
        },
        train_fraction: e.spec().train_fraction,
        split_seed: e.spec().split_seed,
        latest: s.latest.clone(),
        last_error: s.last_error.clone(),
    }
}

/// Trains one tick at a time while the session is running. Only one loop
/// exists per session (`loop_active`).
fn spawn_training(handle: Arc<Handle>) {
    thread::spawn(move || loop {
        {
            let mut s = handle.lock();
            if s.state != RunState::Running {
                s.loop_active = false;
                return;
            }
            let tick = u64::from(s.experiment.spec().config.epochs_per_tick);
            let result = s.experiment.train_epochs(tick).and_then(|_| handle.publish(&mut s));
            if let Err(e) = result {
                tracing::warn!(session = %s.id, error = %e, "training stopped");
                s.last_error = Some(e.to_string());
                s.state = RunState::Paused;
                s.loop_active = false;
                return;
            }
        }
        thread::yield_now();
    });
}
