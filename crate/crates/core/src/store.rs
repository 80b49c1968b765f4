//! Embedded, file-backed store.
//!
//! All state lives in memory behind one reader/writer lock. Every mutation is a
//! list of [`Event`]s that is appended to a JSON-lines journal (and fsynced)
//! before it is applied, so a transaction either lands completely or not at all.
//! Opening a store replays the journal. Media blobs are kept next to the journal
//! in `media/<sha256>`.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::content::{Catalog, Course, CourseId, MediaRef, Question, QuestionId};
use crate::learner::{Attempt, AttemptId, LearnerState, StudentToken};
use crate::service::roster::{Roster, StudentRecord};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
const JOURNAL_FILE: &str = "journal.jsonl";
const MEDIA_DIR: &str = "media";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    CourseStored(Course),
    CourseDeleted {
        id: CourseId,
    },
    QuestionStored(Question),
    QuestionDeleted {
        id: QuestionId,
    },
    AttemptRecorded(Attempt),
    HintAttached {
        attempt_id: AttemptId,
        hint_text: String,
    },
    ProfileReset {
        student: StudentToken,
        at: DateTime<Utc>,
    },
    StudentEnrolled(StudentRecord),
}

#[derive(Debug, Default, Clone)]
pub struct State {
    pub catalog: Catalog,
    pub learner: LearnerState,
    pub roster: Roster,
}

impl State {
    fn apply(&mut self, event: Event) {
        match event {
            Event::CourseStored(c) => self.catalog.apply_course(c),
            Event::CourseDeleted { id } => self.catalog.apply_course_deleted(id),
            Event::QuestionStored(q) => self.catalog.apply_question(q),
            Event::QuestionDeleted { id } => self.catalog.apply_question_deleted(id),
            Event::AttemptRecorded(a) => self.learner.apply_attempt(a),
            Event::HintAttached {
                attempt_id,
                hint_text,
            } => self.learner.apply_hint(attempt_id, hint_text),
            Event::ProfileReset { student, at } => self.learner.apply_reset(&student, at),
            Event::StudentEnrolled(s) => self.roster.apply_enrolled(s),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct JournalHeader {
    kind: String,
    schema_version: u32,
}

struct Journal {
    file: File,
}

impl Journal {
    fn open(path: &Path, state: &mut State) -> Result<Self> {
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            let mut lines = reader.lines().enumerate().peekable();
            match lines.next() {
                Some((_, line)) => {
                    let header: JournalHeader = serde_json::from_str(&line?)
                        .map_err(|e| Error::Storage(format!("bad journal header: {e}")))?;
                    if header.schema_version != SCHEMA_VERSION {
                        return Err(Error::Storage(format!(
                            "journal schema version {} is not supported (expected {SCHEMA_VERSION})",
                            header.schema_version
                        )));
                    }
                }
                None => return Self::create(path),
            }
            while let Some((n, line)) = lines.next() {
                let line = line?;
                match serde_json::from_str::<Event>(&line) {
                    Ok(event) => state.apply(event),
                    // A torn final line means the process died mid-append; that
                    // transaction never committed.
                    Err(_) if lines.peek().is_none() => {
                        tracing::warn!(line = n + 1, "ignoring incomplete trailing journal entry");
                        let valid: Vec<String> = BufReader::new(File::open(path)?)
                            .lines()
                            .take(n)
                            .collect::<std::io::Result<_>>()?;
                        let mut f = File::create(path)?;
                        for l in valid {
                            writeln!(f, "{l}")?;
                        }
                        f.sync_all()?;
                    }
                    Err(e) => {
                        return Err(Error::Storage(format!(
                            "corrupt journal entry at line {}: {e}",
                            n + 1
                        )))
                    }
                }
            }
            let file = OpenOptions::new().append(true).open(path)?;
            Ok(Self { file })
        } else {
            Self::create(path)
        }
    }

    fn create(path: &Path) -> Result<Self> {
        let mut file = File::create(path)?;
        let header = JournalHeader {
            kind: "pappl-journal".into(),
            schema_version: SCHEMA_VERSION,
        };
        writeln!(file, "{}", serde_json::to_string(&header)?)?;
        file.sync_all()?;
        Ok(Self { file })
    }

    fn append(&mut self, events: &[Event]) -> Result<()> {
        let mut buf = String::new();
        for e in events {
            buf.push_str(&serde_json::to_string(e)?);
            buf.push('\n');
        }
        self.file.write_all(buf.as_bytes())?;
        self.file.sync_data()?;
        Ok(())
    }
}

/// Content-addressed blob storage.
pub struct MediaStore {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<String, Vec<u8>>>,
}

impl MediaStore {
    fn in_memory() -> Self {
        Self {
            dir: None,
            memory: Mutex::new(HashMap::new()),
        }
    }

    fn on_disk(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir: Some(dir),
            memory: Mutex::new(HashMap::new()),
        })
    }

    pub fn digest(bytes: &[u8]) -> String {
        hex::encode(Sha256::digest(bytes))
    }

    pub fn put(&self, bytes: &[u8], media_type: &str) -> Result<MediaRef> {
        let digest = Self::digest(bytes);
        match &self.dir {
            Some(dir) => {
                let path = dir.join(&digest);
                if !path.exists() {
                    let tmp = dir.join(format!("{digest}.tmp"));
                    fs::write(&tmp, bytes)?;
                    fs::rename(&tmp, &path)?;
                }
            }
            None => {
                self.memory
                    .lock()
                    .entry(digest.clone())
                    .or_insert_with(|| bytes.to_vec());
            }
        }
        Ok(MediaRef {
            digest,
            media_type: media_type.to_string(),
            size: bytes.len() as u64,
        })
    }

    pub fn get(&self, digest: &str) -> Option<Vec<u8>> {
        if !is_digest(digest) {
            return None;
        }
        match &self.dir {
            Some(dir) => fs::read(dir.join(digest)).ok(),
            None => self.memory.lock().get(digest).cloned(),
        }
    }

    pub fn size_of(&self, digest: &str) -> Option<u64> {
        if !is_digest(digest) {
            return None;
        }
        match &self.dir {
            Some(dir) => fs::metadata(dir.join(digest)).ok().map(|m| m.len()),
            None => self.memory.lock().get(digest).map(|b| b.len() as u64),
        }
    }
}

fn is_digest(s: &str) -> bool {
    s.len() == 64
        && s.bytes()
            .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Clock that only moves when told to. For tests and scripted replays.
#[derive(Debug)]
pub struct ManualClock(Mutex<DateTime<Utc>>);

impl ManualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self(Mutex::new(start))
    }

    pub fn set(&self, t: DateTime<Utc>) {
        *self.0.lock() = t;
    }

    pub fn advance(&self, d: chrono::Duration) {
        *self.0.lock() += d;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock()
    }
}

struct Inner {
    state: State,
    journal: Option<Journal>,
}

pub struct Store {
    inner: RwLock<Inner>,
    media: MediaStore,
    clock: Arc<dyn Clock>,
}

impl Store {
    pub fn in_memory() -> Self {
        Self {
            inner: RwLock::new(Inner {
                state: State::default(),
                journal: None,
            }),
            media: MediaStore::in_memory(),
            clock: Arc::new(SystemClock),
        }
    }

    /// Opens (or creates) a store rooted at `dir`, replaying its journal.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut state = State::default();
        let journal = Journal::open(&dir.join(JOURNAL_FILE), &mut state)?;
        Ok(Self {
            inner: RwLock::new(Inner {
                state,
                journal: Some(journal),
            }),
            media: MediaStore::on_disk(dir.join(MEDIA_DIR))?,
            clock: Arc::new(SystemClock),
        })
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    pub fn media(&self) -> &MediaStore {
        &self.media
    }

    /// Runs `f` against a consistent snapshot. Many readers may run at once.
    pub fn read<R>(&self, f: impl FnOnce(&State) -> R) -> R {
        f(&self.inner.read().state)
    }

    /// Runs `f` under the write lock. The events it returns are journaled and
    /// then applied; if `f` or the journal write fails nothing changes.
    pub fn transact<R>(&self, f: impl FnOnce(&State) -> Result<(Vec<Event>, R)>) -> Result<R> {
        let mut inner = self.inner.write();
        let (events, out) = f(&inner.state)?;
        if events.is_empty() {
            return Ok(out);
        }
        if let Some(journal) = inner.journal.as_mut() {
            journal.append(&events)?;
        }
        for e in events {
            inner.state.apply(e);
        }
        Ok(out)
    }
}
