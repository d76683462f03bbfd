//! In-process study service: owns every study under a data directory,
//! hands out trials to sessions and records timed Found submissions.
//!
//! Each study has one mutex guarding its log, sessions and record set, so
//! all writes for a study go through a single append path. Reports read an
//! immutable `Arc` snapshot of the records and never wait on that mutex.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::journal::{LogLine, StudyLog};
use super::plan::{Condition, ScheduledTrial, StudyPlan};
use super::summary::{summarize, StudySummary, SummaryOptions};
use super::{Click, StudyError, TrialRecord};

/// Millisecond wall clock used for trial timing.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        ManualClock(AtomicU64::new(start_ms))
    }

    pub fn set(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst);
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

impl<C: Clock + ?Sized> Clock for Arc<C> {
    fn now_ms(&self) -> u64 {
        (**self).now_ms()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub study_id: String,
    pub volunteer_id: String,
    pub group: String,
    pub total_trials: usize,
    pub completed_trials: usize,
}

/// The trial a session should show next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextTrial {
    pub pair_id: String,
    pub image_url: String,
    pub started_token: String,
    pub target_name: String,
    pub index: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSubmission {
    pub pair_id: String,
    pub started_token: String,
    pub click: Click,
    #[serde(default)]
    pub client_duration_ms: Option<u64>,
}

#[derive(Debug, Clone)]
struct Pending {
    pair_id: String,
    token: String,
    shown_at_ms: u64,
    delivered: bool,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub session_id: String,
    pub volunteer_id: String,
    pub group: String,
    pub order: Vec<ScheduledTrial>,
    pending: Option<Pending>,
}

#[derive(Debug)]
struct StudyInner {
    log: StudyLog,
    sessions: HashMap<String, Session>,
    done: HashSet<(String, String)>,
    records: Vec<TrialRecord>,
}

#[derive(Debug)]
struct StudyState {
    id: String,
    plan: StudyPlan,
    inner: Mutex<StudyInner>,
    snapshot: RwLock<Arc<Vec<TrialRecord>>>,
}

impl StudyState {
    fn publish(&self, records: &[TrialRecord]) {
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(records.to_vec());
    }

    fn records(&self) -> Arc<Vec<TrialRecord>> {
        self.snapshot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

pub struct StudyService {
    studies_dir: PathBuf,
    image_root: PathBuf,
    clock: Arc<dyn Clock>,
    studies: RwLock<HashMap<String, Arc<StudyState>>>,
    /// session id → study id
    sessions: RwLock<HashMap<String, String>>,
}

fn random_id(prefix: &str) -> String {
    let v: u128 = rand::rng().random();
    format!("{prefix}{v:032x}")
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl StudyService {
    /// Opens (or initialises) a data directory and replays every study log
    /// found in `<data_dir>/studies`. Trial images are served from
    /// `image_root`.
    pub fn open(
        data_dir: impl AsRef<Path>,
        image_root: impl AsRef<Path>,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, StudyError> {
        let studies_dir = data_dir.as_ref().join("studies");
        fs::create_dir_all(&studies_dir)?;
        let service = StudyService {
            studies_dir,
            image_root: image_root.as_ref().to_path_buf(),
            clock,
            studies: RwLock::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
        };
        let mut paths: Vec<PathBuf> = fs::read_dir(&service.studies_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            service.replay(&path)?;
        }
        Ok(service)
    }

    fn replay(&self, path: &Path) -> Result<(), StudyError> {
        let (log, lines) = StudyLog::open(path)?;
        let mut lines = lines.into_iter();
        let Some(LogLine::Plan { study_id, plan, .. }) = lines.next() else {
            unreachable!("StudyLog::open checks the first line");
        };
        let mut inner = StudyInner {
            log,
            sessions: HashMap::new(),
            done: HashSet::new(),
            records: Vec::new(),
        };
        for line in lines {
            match line {
                LogLine::Plan { .. } => {
                    return Err(StudyError::CorruptLog {
                        path: path.display().to_string(),
                        line: 0,
                        reason: "second plan line".into(),
                    })
                }
                LogLine::Session {
                    session_id,
                    volunteer_id,
                    group,
                    ..
                } => {
                    let order = plan.trial_order(&volunteer_id, &group)?;
                    inner.sessions.insert(
                        session_id.clone(),
                        Session {
                            session_id,
                            volunteer_id,
                            group,
                            order,
                            pending: None,
                        },
                    );
                }
                LogLine::Trial(r) => {
                    inner.done.insert((r.volunteer_id.clone(), r.pair_id.clone()));
                    inner.records.push(r);
                }
            }
        }
        let session_ids: Vec<String> = inner.sessions.keys().cloned().collect();
        let records = inner.records.clone();
        log::info!(
            "study {study_id}: replayed {} session(s), {} trial(s)",
            session_ids.len(),
            records.len()
        );
        let state = Arc::new(StudyState {
            id: study_id.clone(),
            plan,
            inner: Mutex::new(inner),
            snapshot: RwLock::new(Arc::new(records)),
        });
        let mut sessions = self.sessions.write().unwrap_or_else(|e| e.into_inner());
        for sid in session_ids {
            sessions.insert(sid, study_id.clone());
        }
        self.studies
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(study_id, state);
        Ok(())
    }

    fn study(&self, id: &str) -> Result<Arc<StudyState>, StudyError> {
        self.studies
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| StudyError::UnknownStudy(id.to_string()))
    }

    fn study_of_session(&self, session_id: &str) -> Result<Arc<StudyState>, StudyError> {
        let study_id = self
            .sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(session_id)
            .cloned()
            .ok_or_else(|| StudyError::UnknownSession(session_id.to_string()))?;
        self.study(&study_id)
    }

    pub fn study_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .studies
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }

    pub fn plan(&self, study_id: &str) -> Result<StudyPlan, StudyError> {
        Ok(self.study(study_id)?.plan.clone())
    }

    /// Validates and persists a new study.
    pub fn create_study(&self, plan: StudyPlan) -> Result<String, StudyError> {
        plan.validate()?;
        let mut studies = self.studies.write().unwrap_or_else(|e| e.into_inner());
        let id = loop {
            let id = random_id("st-")[..15].to_string();
            if !studies.contains_key(&id) {
                break id;
            }
        };
        let log = StudyLog::create(
            self.studies_dir.join(format!("{id}.jsonl")),
            &LogLine::Plan {
                study_id: id.clone(),
                created_at_ms: self.clock.now_ms(),
                plan: plan.clone(),
            },
        )?;
        let state = StudyState {
            id: id.clone(),
            plan,
            inner: Mutex::new(StudyInner {
                log,
                sessions: HashMap::new(),
                done: HashSet::new(),
                records: Vec::new(),
            }),
            snapshot: RwLock::new(Arc::new(Vec::new())),
        };
        studies.insert(id.clone(), Arc::new(state));
        log::info!("created study {id}");
        Ok(id)
    }

    fn info(study: &StudyState, inner: &StudyInner, s: &Session) -> SessionInfo {
        SessionInfo {
            session_id: s.session_id.clone(),
            study_id: study.id.clone(),
            volunteer_id: s.volunteer_id.clone(),
            group: s.group.clone(),
            total_trials: s.order.len(),
            completed_trials: s
                .order
                .iter()
                .filter(|t| inner.done.contains(&(s.volunteer_id.clone(), t.pair_id.clone())))
                .count(),
        }
    }

    /// Opens a session for a volunteer. Reopening with the same group
    /// resumes the existing session.
    pub fn open_session(&self, study_id: &str, volunteer_id: &str, group: &str) -> Result<SessionInfo, StudyError> {
        let study = self.study(study_id)?;
        if volunteer_id.is_empty() {
            return Err(StudyError::InvalidPlan("volunteer id must not be empty".into()));
        }
        if !study.plan.groups.iter().any(|g| g == group) {
            return Err(StudyError::UnknownGroup(group.to_string()));
        }
        let mut inner = lock(&study.inner);
        if let Some(existing) = inner.sessions.values().find(|s| s.volunteer_id == volunteer_id) {
            if existing.group != group {
                return Err(StudyError::DuplicateVolunteer(volunteer_id.to_string()));
            }
            return Ok(Self::info(&study, &inner, existing));
        }
        let order = study.plan.trial_order(volunteer_id, group)?;
        let session_id = random_id("se-");
        inner.log.append(&LogLine::Session {
            session_id: session_id.clone(),
            volunteer_id: volunteer_id.to_string(),
            group: group.to_string(),
            opened_at_ms: self.clock.now_ms(),
        })?;
        let session = Session {
            session_id: session_id.clone(),
            volunteer_id: volunteer_id.to_string(),
            group: group.to_string(),
            order,
            pending: None,
        };
        let info = Self::info(&study, &inner, &session);
        inner.sessions.insert(session_id.clone(), session);
        drop(inner);
        self.sessions
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(session_id, study.id.clone());
        Ok(info)
    }

    pub fn session_info(&self, session_id: &str) -> Result<SessionInfo, StudyError> {
        let study = self.study_of_session(session_id)?;
        let inner = lock(&study.inner);
        let s = inner
            .sessions
            .get(session_id)
            .ok_or_else(|| StudyError::UnknownSession(session_id.to_string()))?;
        Ok(Self::info(&study, &inner, s))
    }

    /// Issues the next unfinished trial, or `None` when the session is
    /// exhausted. Asking again before submitting returns the same trial and
    /// token, so a page refresh resumes where it was.
    pub fn next_trial(&self, session_id: &str) -> Result<Option<NextTrial>, StudyError> {
        let study = self.study_of_session(session_id)?;
        let mut guard = lock(&study.inner);
        let inner = &mut *guard;
        let session = inner
            .sessions
            .get_mut(session_id)
            .ok_or_else(|| StudyError::UnknownSession(session_id.to_string()))?;
        let vol = session.volunteer_id.clone();
        let Some(index) = session
            .order
            .iter()
            .position(|t| !inner.done.contains(&(vol.clone(), t.pair_id.clone())))
        else {
            session.pending = None;
            return Ok(None);
        };
        let pair_id = session.order[index].pair_id.clone();
        let reuse = session.pending.as_ref().is_some_and(|p| p.pair_id == pair_id);
        if !reuse {
            session.pending = Some(Pending {
                pair_id: pair_id.clone(),
                token: random_id("tk-"),
                shown_at_ms: self.clock.now_ms(),
                delivered: false,
            });
        }
        let pending = session.pending.as_ref().expect("set above");
        let target_name = study
            .plan
            .find_pair(&pair_id)
            .map(|(_, p)| p.target_name.clone())
            .unwrap_or_default();
        Ok(Some(NextTrial {
            image_url: format!("/sessions/{session_id}/image/{}", pending.token),
            pair_id,
            started_token: pending.token.clone(),
            target_name,
            index,
            total: session.order.len(),
        }))
    }

    /// Marks the pending trial's image as delivered and restarts its timer
    /// at the delivery instant; later deliveries keep the first stamp.
    /// Returns the image path on disk.
    pub fn deliver_image(&self, session_id: &str, token: &str) -> Result<PathBuf, StudyError> {
        let study = self.study_of_session(session_id)?;
        let mut inner = lock(&study.inner);
        let session = inner
            .sessions
            .get_mut(session_id)
            .ok_or_else(|| StudyError::UnknownSession(session_id.to_string()))?;
        let pending = session
            .pending
            .as_mut()
            .filter(|p| p.token == token)
            .ok_or_else(|| StudyError::BadToken(String::new()))?;
        if !pending.delivered {
            pending.delivered = true;
            pending.shown_at_ms = self.clock.now_ms();
        }
        let condition = session
            .order
            .iter()
            .find(|t| t.pair_id == pending.pair_id)
            .map(|t| t.condition)
            .unwrap_or(Condition::Original);
        let (_, pair) = study
            .plan
            .find_pair(&pending.pair_id)
            .ok_or_else(|| StudyError::UnassignedPair(pending.pair_id.clone()))?;
        self.resolve_image(pair.image_path(condition))
    }

    /// Resolves a plan-relative image path under the image root, refusing
    /// anything that would escape it.
    pub fn resolve_image(&self, relative: &str) -> Result<PathBuf, StudyError> {
        let rel = Path::new(relative);
        if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
            return Err(StudyError::InvalidPlan(format!("image path `{relative}` leaves the image root")));
        }
        Ok(self.image_root.join(rel))
    }

    /// Records a Found submission. The first valid submission for a
    /// (volunteer, pair) wins; the record is on disk before this returns.
    pub fn record_trial(&self, session_id: &str, sub: TrialSubmission) -> Result<TrialRecord, StudyError> {
        let study = self.study_of_session(session_id)?;
        let mut guard = lock(&study.inner);
        let inner = &mut *guard;
        let session = inner
            .sessions
            .get_mut(session_id)
            .ok_or_else(|| StudyError::UnknownSession(session_id.to_string()))?;
        let scheduled = session
            .order
            .iter()
            .find(|t| t.pair_id == sub.pair_id)
            .cloned()
            .ok_or_else(|| StudyError::UnassignedPair(sub.pair_id.clone()))?;
        let key = (session.volunteer_id.clone(), sub.pair_id.clone());
        if inner.done.contains(&key) {
            return Err(StudyError::DuplicateTrial {
                volunteer_id: key.0,
                pair_id: key.1,
            });
        }
        let pending = session
            .pending
            .as_ref()
            .filter(|p| p.pair_id == sub.pair_id && p.token == sub.started_token)
            .ok_or_else(|| StudyError::BadToken(sub.pair_id.clone()))?;
        let (_, pair) = study
            .plan
            .find_pair(&sub.pair_id)
            .ok_or_else(|| StudyError::UnassignedPair(sub.pair_id.clone()))?;
        let hit = pair.target.contains(sub.click.x, sub.click.y);
        let mut record = TrialRecord::new(
            session.volunteer_id.clone(),
            sub.pair_id.clone(),
            scheduled.dataset,
            scheduled.condition,
            pending.shown_at_ms,
            self.clock.now_ms(),
            sub.click,
            hit,
        )?;
        record.client_duration_ms = sub.client_duration_ms;

        inner.log.append(&LogLine::Trial(record.clone()))?;
        session.pending = None;
        inner.done.insert(key);
        inner.records.push(record.clone());
        study.publish(&inner.records);
        Ok(record)
    }

    /// All acknowledged trials of a study, in acknowledgment order.
    pub fn records(&self, study_id: &str) -> Result<Arc<Vec<TrialRecord>>, StudyError> {
        Ok(self.study(study_id)?.records())
    }

    pub fn report(&self, study_id: &str, options: SummaryOptions) -> Result<StudySummary, StudyError> {
        let study = self.study(study_id)?;
        let records = study.records();
        summarize(&study.plan, &records, options)
    }
}
