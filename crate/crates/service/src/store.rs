//! Directory-backed session store.
//!
//! One `<id>.json` document per session, replaced by write-then-rename. Reads
//! hand out shared snapshots; writers serialize per session id, persist, and
//! then swap the snapshot.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chance_utility::elicitation::{Session, SessionError, SessionPlan};
use parking_lot::{Mutex, RwLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no session with id {0:?}")]
    NotFound(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("storage failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("stored session {path} is unreadable: {source}")]
    Corrupt {
        path: PathBuf,
        #[source]
        source: SessionError,
    },
}

pub struct SessionStore {
    dir: PathBuf,
    snapshots: RwLock<HashMap<String, Arc<Session>>>,
    tokens: Mutex<HashMap<String, String>>,
    writers: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl SessionStore {
    /// Opens (creating if needed) `dir` and loads every stored session.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut snapshots = HashMap::new();
        let mut tokens = HashMap::new();
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = fs::read_to_string(&path)?;
            let session = Session::from_json(&text).map_err(|source| StoreError::Corrupt { path: path.clone(), source })?;
            if let Some(token) = &session.client_token {
                tokens.insert(token.clone(), session.id.clone());
            }
            snapshots.insert(session.id.clone(), Arc::new(session));
        }
        Ok(Self { dir, snapshots: RwLock::new(snapshots), tokens: Mutex::new(tokens), writers: Mutex::new(HashMap::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.snapshots.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn path_of(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.json"))
    }

    fn persist(&self, session: &Session) -> Result<(), StoreError> {
        let text = session.to_json()?;
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(text.as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.path_of(&session.id)).map_err(|e| StoreError::Io(e.error))?;
        Ok(())
    }

    /// Creates a session, or returns the one already made for `client_token`.
    /// The flag is true when a new session was created.
    pub fn create(&self, plan: SessionPlan, client_token: Option<String>) -> Result<(Arc<Session>, bool), StoreError> {
        let mut tokens = self.tokens.lock();
        if let Some(id) = client_token.as_ref().and_then(|t| tokens.get(t)) {
            return Ok((self.get(id)?, false));
        }
        let mut session = Session::create(uuid::Uuid::new_v4().simple().to_string(), plan)?;
        session.client_token = client_token.clone();
        self.persist(&session)?;
        let session = Arc::new(session);
        self.snapshots.write().insert(session.id.clone(), session.clone());
        if let Some(token) = client_token {
            tokens.insert(token, session.id.clone());
        }
        Ok((session, true))
    }

    pub fn get(&self, id: &str) -> Result<Arc<Session>, StoreError> {
        self.snapshots.read().get(id).cloned().ok_or_else(|| StoreError::NotFound(id.to_string()))
    }

    /// Applies `f` to a private copy of the session under its writer lock.
    /// The copy is persisted and published only when `f` succeeds and
    /// changed something.
    pub fn update<T, F>(&self, id: &str, f: F) -> Result<T, StoreError>
    where
        F: FnOnce(&mut Session) -> Result<T, SessionError>,
    {
        let lock = self.writers.lock().entry(id.to_string()).or_default().clone();
        let _guard = lock.lock();
        let current = self.get(id)?;
        let mut draft = (*current).clone();
        let out = f(&mut draft)?;
        if draft != *current {
            self.persist(&draft)?;
            self.snapshots.write().insert(id.to_string(), Arc::new(draft));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chance_utility::elicitation::NextGamble;

    #[test]
    fn reopen_restores_state_and_tokens() {
        let dir = tempfile::tempdir().unwrap();
        let id = {
            let store = SessionStore::open(dir.path()).unwrap();
            let (s, created) = store.create(SessionPlan::case_study_end_point(1), Some("tok".into())).unwrap();
            assert!(created);
            store
                .update(&s.id, |s| {
                    let NextGamble::Gamble(g) = s.next_gamble()? else { unreachable!() };
                    s.record_choice(&g.id, true).map(|_| ())
                })
                .unwrap();
            s.id.clone()
        };
        let store = SessionStore::open(dir.path()).unwrap();
        assert_eq!(store.get(&id).unwrap().answered.len(), 1);
        let (again, created) = store.create(SessionPlan::case_study_end_point(9), Some("tok".into())).unwrap();
        assert!(!created);
        assert_eq!(again.id, id);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn failed_updates_leave_no_trace() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let (s, _) = store.create(SessionPlan::case_study_end_point(1), None).unwrap();
        let before = fs::read_to_string(store.path_of(&s.id)).unwrap();
        assert!(store.update(&s.id, |s| s.record_choice("missing", true).map(|_| ())).is_err());
        assert_eq!(fs::read_to_string(store.path_of(&s.id)).unwrap(), before);
        assert!(matches!(store.get("nope"), Err(StoreError::NotFound(_))));
    }

    #[test]
    fn corrupt_documents_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("bad.json"), "{\"schema_version\": 1").unwrap();
        assert!(matches!(SessionStore::open(dir.path()), Err(StoreError::Corrupt { .. })));
    }
}
