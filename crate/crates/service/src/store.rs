//! On-disk layout of a session directory:
//!
//! ```text
//! <data dir>/sessions/<id>/events.jsonl   append-only, one event per line
//! <data dir>/sessions/<id>/snapshot.json  latest state, replaced atomically
//! ```
//!
//! An event is acknowledged only after it is flushed to disk. The snapshot
//! may lag behind the log; restoring replays the events it has not seen.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use scefis_core::pipeline::TrainedModel;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::session::SessionState;

pub const EVENTS_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Created {
        seq: u64,
        session_id: String,
        dataset: String,
        config: String,
        queue: Vec<String>,
        model: Box<TrainedModel>,
    },
    Feedback {
        seq: u64,
        image_id: String,
        /// Corrected mask, base64 PNG exactly as submitted.
        mask_png: String,
    },
}

impl Event {
    pub fn seq(&self) -> u64 {
        match self {
            Event::Created { seq, .. } | Event::Feedback { seq, .. } => *seq,
        }
    }
}

/// Writer side of one session directory.
#[derive(Debug)]
pub struct Journal {
    dir: PathBuf,
    events: File,
    snapshot_every: u64,
    pending: u64,
}

fn sync_dir(dir: &Path) -> Result<()> {
    #[cfg(unix)]
    File::open(dir)?.sync_all()?;
    #[cfg(not(unix))]
    let _ = dir;
    Ok(())
}

impl Journal {
    /// Starts a new session directory with its creation event.
    pub fn create(dir: &Path, created: &Event, snapshot_every: u64) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let events = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(dir.join(EVENTS_FILE))?;
        if let Some(parent) = dir.parent() {
            sync_dir(parent)?;
        }
        let mut j = Self {
            dir: dir.to_path_buf(),
            events,
            snapshot_every: snapshot_every.max(1),
            pending: 0,
        };
        j.append(created)?;
        Ok(j)
    }

    pub fn open(dir: &Path, snapshot_every: u64) -> Result<Self> {
        let events = OpenOptions::new()
            .append(true)
            .open(dir.join(EVENTS_FILE))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            events,
            snapshot_every: snapshot_every.max(1),
            pending: 0,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Appends one line and flushes it to stable storage.
    pub fn append(&mut self, event: &Event) -> Result<()> {
        let mut line = serde_json::to_vec(event).map_err(scefis_core::Error::from)?;
        line.push(b'\n');
        self.events.write_all(&line)?;
        self.events.sync_data()?;
        self.pending += 1;
        Ok(())
    }

    /// Writes a snapshot when enough events have accumulated since the last.
    pub fn maybe_snapshot(&mut self, state: &SessionState) -> Result<bool> {
        if self.pending < self.snapshot_every {
            return Ok(false);
        }
        self.snapshot(state)?;
        Ok(true)
    }

    pub fn snapshot(&mut self, state: &SessionState) -> Result<()> {
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        let text = serde_json::to_vec(state).map_err(scefis_core::Error::from)?;
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&text)?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, self.dir.join(SNAPSHOT_FILE))?;
        sync_dir(&self.dir)?;
        self.pending = 0;
        Ok(())
    }
}

/// Reads every complete event. A torn final line, left by a crash during
/// an unacknowledged append, is dropped and cut from the file.
pub fn read_events(dir: &Path) -> Result<Vec<Event>> {
    let path = dir.join(EVENTS_FILE);
    let reader = BufReader::new(File::open(&path)?);
    let mut events = Vec::new();
    let mut good_len = 0u64;
    let mut torn = false;
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    let n = lines.len();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            good_len += line.len() as u64 + 1;
            continue;
        }
        match serde_json::from_str::<Event>(line) {
            Ok(e) => {
                if e.seq() != events.len() as u64 {
                    return Err(ServiceError::Internal(format!(
                        "{}: event {} out of sequence",
                        path.display(),
                        e.seq()
                    )));
                }
                events.push(e);
                good_len += line.len() as u64 + 1;
            }
            Err(_) if i + 1 == n => torn = true,
            Err(e) => {
                return Err(ServiceError::Internal(format!(
                    "{}: corrupt event line {}: {e}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    if torn {
        OpenOptions::new()
            .write(true)
            .open(&path)?
            .set_len(good_len)?;
    }
    Ok(events)
}

pub fn read_snapshot(dir: &Path) -> Result<Option<SessionState>> {
    let path = dir.join(SNAPSHOT_FILE);
    match std::fs::read(&path) {
        Ok(bytes) => Ok(Some(
            serde_json::from_slice(&bytes).map_err(scefis_core::Error::from)?,
        )),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}
