//! HTTP service for interactive evolution sessions.
//!
//! A session streams the held-out images of a trained model one at a time.
//! For each image the client fetches a proposal, edits the mask and posts
//! it back; the rule base evolves before the next proposal is served.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/sessions` | `{"dataset", "config"}` | `201 {"session_id", "queue_len", "rule_count"}` |
//! | GET | `/sessions/{id}/next` | | `{"status": "pending", "image_id", "image_png", "mask_png", "t_star", ...}` or `{"status": "complete"}` |
//! | POST | `/sessions/{id}/feedback` | `{"image_id", "mask_png"}` | `{"t_b", "rule_count", "score", ...}` |
//! | GET | `/sessions/{id}/log` | | `{"entries", "skipped", "summary"}` |
//! | GET | `/sessions/{id}/rules/stats` | | `{"trajectory", "rule_count", "m_rows"}` |
//!
//! Images and masks travel as base64 PNG. Errors are
//! `{"error", "message", "hint"?}` with 404 for unknown sessions, datasets
//! and configs, 409 for out-of-order or duplicate feedback and 422 for
//! undecodable or wrongly sized masks.

mod error;
mod routes;
pub mod session;
pub mod store;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use scefis_core::pipeline::{Dataset, TrainedModel};

pub use error::{Result, ServiceError};
pub use routes::{router, serve};
pub use session::{Session, SessionState};

pub const DATA_DIR_ENV: &str = "SCEFIS_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "scefis-data";

/// Persistence root: `SCEFIS_DATA_DIR` if set, else `./scefis-data`.
pub fn data_dir_from_env() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR))
}

/// Where `scefis train` stores the model for a dataset and config name.
pub fn model_path(data_dir: &Path, dataset: &str, config: &str) -> PathBuf {
    data_dir
        .join("models")
        .join(dataset)
        .join(format!("{config}.json"))
}

/// Names become path components, so keep them plain.
pub fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && !name.starts_with('.')
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Reference name of a dataset directory or config file path.
pub fn ref_name(path: &Path) -> String {
    let stem = if path.is_dir() {
        path.file_name()
    } else {
        path.file_stem()
    };
    stem.map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "default".into())
}

#[derive(Debug)]
struct Inner {
    data_dir: PathBuf,
    datasets: HashMap<String, Arc<Dataset>>,
    configs: Vec<String>,
    snapshot_every: u64,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
}

/// Shared handle used by the router.
#[derive(Debug, Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub data_dir: PathBuf,
    /// Events between rule-base snapshots.
    pub snapshot_every: u64,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self {
            data_dir: data_dir_from_env(),
            snapshot_every: 1,
        }
    }
}

impl AppState {
    /// Registers the datasets and config names, then restores every stored
    /// session whose dataset is registered. Returns the ids of sessions that
    /// could not be restored alongside the state.
    pub fn open(
        opts: ServiceOptions,
        datasets: Vec<(String, Dataset)>,
        configs: Vec<String>,
    ) -> Result<(Self, Vec<(String, ServiceError)>)> {
        for name in datasets.iter().map(|d| &d.0).chain(&configs) {
            if !valid_name(name) {
                return Err(ServiceError::Validation(format!(
                    "'{name}' is not a valid reference name"
                )));
            }
        }
        let datasets: HashMap<_, _> = datasets
            .into_iter()
            .map(|(n, d)| (n, Arc::new(d)))
            .collect();
        let mut sessions = HashMap::new();
        let mut failed = Vec::new();
        let root = opts.data_dir.join("sessions");
        if root.is_dir() {
            for entry in std::fs::read_dir(&root)? {
                let dir = entry?.path();
                let id = dir
                    .file_name()
                    .unwrap_or_default()
                    .to_string_lossy()
                    .into_owned();
                match restore_one(&dir, &datasets, opts.snapshot_every) {
                    Ok(Some(s)) => {
                        sessions.insert(id, Arc::new(s));
                    }
                    Ok(None) => {}
                    Err(e) => failed.push((id, e)),
                }
            }
        }
        let inner = Inner {
            data_dir: opts.data_dir,
            datasets,
            configs,
            snapshot_every: opts.snapshot_every,
            sessions: RwLock::new(sessions),
        };
        Ok((
            Self {
                inner: Arc::new(inner),
            },
            failed,
        ))
    }

    pub fn data_dir(&self) -> &Path {
        &self.inner.data_dir
    }

    pub fn session(&self, id: &str) -> Result<Arc<Session>> {
        self.inner
            .sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("no session '{id}'")))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<_> = self
            .inner
            .sessions
            .read()
            .expect("session map poisoned")
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }

    /// Starts a session over the model's held-out images.
    pub fn create_session(&self, dataset: &str, config: &str) -> Result<Arc<Session>> {
        let ds = self
            .inner
            .datasets
            .get(dataset)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("unknown dataset '{dataset}'")))?;
        if !self.inner.configs.iter().any(|c| c == config) {
            return Err(ServiceError::NotFound(format!("unknown config '{config}'")));
        }
        let path = model_path(&self.inner.data_dir, dataset, config);
        if !path.is_file() {
            return Err(ServiceError::RuleBaseMissing {
                dataset: dataset.into(),
                config: config.into(),
            });
        }
        let model = TrainedModel::load(&path)?;
        if let Some(missing) = model.test_ids.iter().find(|id| ds.index_of(id).is_none()) {
            return Err(ServiceError::Validation(format!(
                "model at {} streams image '{missing}', which dataset '{dataset}' lacks",
                path.display()
            )));
        }
        let id = uuid::Uuid::new_v4().to_string();
        let created = store::Event::Created {
            seq: 0,
            session_id: id.clone(),
            dataset: dataset.into(),
            config: config.into(),
            queue: model.test_ids.clone(),
            model: Box::new(model),
        };
        let dir = self.inner.data_dir.join("sessions").join(&id);
        let session = Arc::new(Session::create(
            &dir,
            created,
            ds,
            self.inner.snapshot_every,
        )?);
        self.inner
            .sessions
            .write()
            .expect("session map poisoned")
            .insert(id, session.clone());
        Ok(session)
    }
}

fn restore_one(
    dir: &Path,
    datasets: &HashMap<String, Arc<Dataset>>,
    snapshot_every: u64,
) -> Result<Option<Session>> {
    if !dir.join(store::EVENTS_FILE).is_file() {
        return Ok(None);
    }
    let dataset = match store::read_events(dir)?.first() {
        Some(store::Event::Created { dataset, .. }) => dataset.clone(),
        _ => {
            return Err(ServiceError::Internal(
                "event log lacks a creation event".into(),
            ))
        }
    };
    let Some(ds) = datasets.get(&dataset) else {
        // Belongs to a dataset this server does not serve.
        return Ok(None);
    };
    Session::restore(dir, ds.clone(), snapshot_every).map(Some)
}
