use std::collections::VecDeque;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use scefis_core::keyfeat::ImageAnalysis;
use scefis_core::metrics::io::decode_mask_png;
use scefis_core::metrics::BinaryMask;
use scefis_core::pipeline::{
    Dataset, EvolutionEntry, EvolutionLog, Proposal, StreamItem, TrainedModel,
};
use scefis_core::segmenters::SegmentContext;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::store::{read_events, read_snapshot, Event, Journal};

/// Everything that defines a session at one point of its event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    /// Sequence number of the last applied event.
    pub seq: u64,
    pub session_id: String,
    pub dataset: String,
    pub config: String,
    pub model: TrainedModel,
    pub queue: VecDeque<String>,
    pub history: EvolutionLog,
    pub initial_rules: usize,
}

impl SessionState {
    fn from_created(event: &Event) -> Result<Self> {
        match event {
            Event::Created {
                seq,
                session_id,
                dataset,
                config,
                queue,
                model,
            } => Ok(Self {
                seq: *seq,
                session_id: session_id.clone(),
                dataset: dataset.clone(),
                config: config.clone(),
                initial_rules: model.segmenter.rule_base.rule_count(),
                model: (**model).clone(),
                queue: queue.iter().cloned().collect(),
                history: EvolutionLog::default(),
            }),
            Event::Feedback { .. } => Err(ServiceError::Internal(
                "event log does not start with a creation event".into(),
            )),
        }
    }

    pub fn rule_count(&self) -> usize {
        self.model.segmenter.rule_base.rule_count()
    }

    /// Rule count before the stream and after each processed image.
    pub fn trajectory(&self) -> Vec<usize> {
        let mut v = vec![self.initial_rules];
        v.extend(self.history.rule_counts());
        v
    }
}

/// Head of the queue with its proposal under the current rule base.
#[derive(Debug, Clone)]
pub struct Head {
    pub image_id: String,
    pub analysis: ImageAnalysis,
    pub context: SegmentContext,
    pub proposal: Proposal,
}

fn compute_head(state: &SessionState, ds: &Dataset) -> Result<Option<Head>> {
    let Some(id) = state.queue.front() else {
        return Ok(None);
    };
    let idx = ds
        .index_of(id)
        .ok_or_else(|| ServiceError::Internal(format!("image '{id}' left the dataset")))?;
    let image = &ds.sample(idx).image;
    let analysis = state.model.analyze(id, image)?;
    let context = state.model.context(&analysis);
    let proposal = state.model.segmenter.propose(&StreamItem {
        image_id: id,
        image,
        analysis: &analysis,
        context,
    })?;
    Ok(Some(Head {
        image_id: id.clone(),
        analysis,
        context,
        proposal,
    }))
}

pub fn decode_mask_b64(text: &str) -> Result<BinaryMask> {
    let bytes = B64
        .decode(text.trim())
        .map_err(|e| ServiceError::Validation(format!("mask is not valid base64: {e}")))?;
    decode_mask_png(&bytes)
        .map_err(|e| ServiceError::Validation(format!("mask is not a readable PNG: {e}")))
}

/// Applies one correction to a copy of `state`. The input is left alone so
/// a failure never leaves a half-updated session.
fn apply_feedback(
    state: &SessionState,
    head: &Head,
    ds: &Dataset,
    corrected: &BinaryMask,
) -> Result<(SessionState, EvolutionEntry)> {
    let idx = ds.index_of(&head.image_id).ok_or_else(|| {
        ServiceError::Internal(format!("image '{}' left the dataset", head.image_id))
    })?;
    let image = &ds.sample(idx).image;
    if corrected.dims() != image.dims() {
        return Err(ServiceError::Validation(format!(
            "mask is {:?} but image '{}' is {:?}",
            corrected.dims(),
            head.image_id,
            image.dims()
        )));
    }
    let mut next = state.clone();
    let item = StreamItem {
        image_id: &head.image_id,
        image,
        analysis: &head.analysis,
        context: head.context,
    };
    let entry = next
        .model
        .segmenter
        .learn(&item, &head.proposal, corrected)?;
    next.queue.pop_front();
    next.history.entries.push(entry.clone());
    next.seq += 1;
    Ok((next, entry))
}

/// Rebuilds a state from the event log alone, ignoring any snapshot.
pub fn replay(events: &[Event], ds: &Dataset) -> Result<SessionState> {
    let first = events
        .first()
        .ok_or_else(|| ServiceError::Internal("empty event log".into()))?;
    let state = SessionState::from_created(first)?;
    replay_onto(state, &events[1..], ds)
}

fn replay_onto(mut state: SessionState, events: &[Event], ds: &Dataset) -> Result<SessionState> {
    for e in events {
        if e.seq() <= state.seq {
            continue;
        }
        let Event::Feedback {
            image_id, mask_png, ..
        } = e
        else {
            return Err(ServiceError::Internal("second creation event".into()));
        };
        let head = compute_head(&state, ds)?
            .filter(|h| &h.image_id == image_id)
            .ok_or_else(|| {
                ServiceError::Internal(format!("logged feedback for '{image_id}' is out of order"))
            })?;
        state = apply_feedback(&state, &head, ds, &decode_mask_b64(mask_png)?)?.0;
    }
    Ok(state)
}

/// A state plus its lazily computed proposal. Readers share it without
/// touching the writer lock.
#[derive(Debug)]
pub struct View {
    pub state: SessionState,
    head: OnceLock<Result<Option<Arc<Head>>, String>>,
}

impl View {
    fn new(state: SessionState) -> Self {
        Self {
            state,
            head: OnceLock::new(),
        }
    }

    pub fn head(&self, ds: &Dataset) -> Result<Option<Arc<Head>>> {
        self.head
            .get_or_init(|| {
                compute_head(&self.state, ds)
                    .map(|h| h.map(Arc::new))
                    .map_err(|e| e.to_string())
            })
            .clone()
            .map_err(ServiceError::Internal)
    }
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub dataset: Arc<Dataset>,
    view: RwLock<Arc<View>>,
    journal: Mutex<Journal>,
}

impl Session {
    pub fn create(
        dir: &Path,
        created: Event,
        dataset: Arc<Dataset>,
        snapshot_every: u64,
    ) -> Result<Self> {
        let state = SessionState::from_created(&created)?;
        let mut journal = Journal::create(dir, &created, snapshot_every)?;
        journal.snapshot(&state)?;
        Ok(Self {
            id: state.session_id.clone(),
            dataset,
            view: RwLock::new(Arc::new(View::new(state))),
            journal: Mutex::new(journal),
        })
    }

    /// Latest snapshot plus the events after it.
    pub fn restore(dir: &Path, dataset: Arc<Dataset>, snapshot_every: u64) -> Result<Self> {
        let events = read_events(dir)?;
        let state = match read_snapshot(dir)? {
            Some(s) => replay_onto(s, &events, &dataset)?,
            None => replay(&events, &dataset)?,
        };
        if state.seq + 1 != events.len() as u64 {
            return Err(ServiceError::Internal(format!(
                "{}: snapshot is ahead of the event log",
                dir.display()
            )));
        }
        let journal = Journal::open(dir, snapshot_every)?;
        Ok(Self {
            id: state.session_id.clone(),
            dataset,
            view: RwLock::new(Arc::new(View::new(state))),
            journal: Mutex::new(journal),
        })
    }

    pub fn view(&self) -> Arc<View> {
        self.view.read().expect("view lock poisoned").clone()
    }

    /// Validates, evolves, logs and publishes one correction. Submissions
    /// are serialized; a late duplicate sees the moved head and conflicts.
    pub fn submit(&self, image_id: &str, mask_png: &str) -> Result<(EvolutionEntry, Arc<View>)> {
        let mut journal = self.journal.lock().expect("journal lock poisoned");
        let view = self.view();
        let state = &view.state;
        match state.queue.front() {
            None => {
                return Err(ServiceError::Conflict(
                    "stream complete; no image awaits feedback".into(),
                ))
            }
            Some(h) if h != image_id => {
                let why = if state.history.entries.iter().any(|e| e.image_id == image_id) {
                    "was already processed"
                } else {
                    "is not at the head of the queue"
                };
                return Err(ServiceError::Conflict(format!(
                    "image '{image_id}' {why}; expected '{h}'"
                )));
            }
            Some(_) => {}
        }
        let corrected = decode_mask_b64(mask_png)?;
        let head = view
            .head(&self.dataset)?
            .ok_or_else(|| ServiceError::Internal("queue head vanished".into()))?;
        let (next, entry) = apply_feedback(state, &head, &self.dataset, &corrected)?;
        journal.append(&Event::Feedback {
            seq: next.seq,
            image_id: image_id.to_string(),
            mask_png: mask_png.trim().to_string(),
        })?;
        let published = Arc::new(View::new(next));
        *self.view.write().expect("view lock poisoned") = published.clone();
        // The event is durable; a failed snapshot only costs replay time.
        let _ = journal.maybe_snapshot(&published.state);
        Ok((entry, published))
    }

    pub fn dir(&self) -> std::path::PathBuf {
        self.journal
            .lock()
            .expect("journal lock poisoned")
            .dir()
            .to_path_buf()
    }
}
