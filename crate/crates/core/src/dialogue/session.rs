//! Multi-turn session state with idle expiry.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::generation::Role;

pub const DEFAULT_IDLE_TIMEOUT_SECS: i64 = 15 * 60;

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

/// Clock that only moves when told to.
#[derive(Debug)]
pub struct ManualClock(Mutex<DateTime<Utc>>);

impl ManualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self(Mutex::new(start))
    }

    pub fn advance(&self, by: Duration) {
        *lock(&self.0) += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *lock(&self.0)
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Open,
    AwaitingClarification,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueSession {
    pub session_id: String,
    pub turns: Vec<Turn>,
    pub created_at: DateTime<Utc>,
    pub last_active_at: DateTime<Utc>,
    pub state: SessionState,
    /// Question held while a clarification is outstanding.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pending_question: Option<String>,
}

impl DialogueSession {
    pub fn new(session_id: &str, now: DateTime<Utc>) -> Self {
        Self {
            session_id: session_id.to_owned(),
            turns: Vec::new(),
            created_at: now,
            last_active_at: now,
            state: SessionState::Open,
            pending_question: None,
        }
    }

    pub fn push(&mut self, role: Role, text: &str, now: DateTime<Utc>) {
        // Timestamps never run backwards even if the clock does.
        let at = self.turns.last().map_or(now, |t| t.timestamp.max(now));
        self.turns.push(Turn {
            role,
            text: text.to_owned(),
            timestamp: at,
        });
        self.last_active_at = at;
    }

    pub fn is_expired(&self, now: DateTime<Utc>, idle: Duration) -> bool {
        now - self.last_active_at >= idle
    }
}

pub type SessionHandle = Arc<Mutex<DialogueSession>>;

/// Shared session map. The map lock is held only to look a session up; each
/// session has its own lock so turns within one session run serially while
/// different sessions proceed in parallel.
pub struct SessionStore {
    sessions: Mutex<HashMap<String, SessionHandle>>,
    idle: Duration,
    clock: Arc<dyn Clock>,
}

impl SessionStore {
    pub fn new(idle: Duration, clock: Arc<dyn Clock>) -> Self {
        Self {
            sessions: Mutex::new(HashMap::new()),
            idle,
            clock,
        }
    }

    pub fn with_defaults() -> Self {
        Self::new(Duration::seconds(DEFAULT_IDLE_TIMEOUT_SECS), Arc::new(SystemClock))
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    pub fn idle_timeout(&self) -> Duration {
        self.idle
    }

    /// The live session for `id`, creating a fresh one when it is unknown,
    /// closed or idle past the timeout.
    pub fn acquire(&self, id: &str) -> SessionHandle {
        let now = self.now();
        let mut map = lock(&self.sessions);
        if let Some(h) = map.get(id) {
            let s = lock(h);
            if s.state != SessionState::Closed && !s.is_expired(now, self.idle) {
                drop(s);
                return h.clone();
            }
        }
        let h = Arc::new(Mutex::new(DialogueSession::new(id, now)));
        map.insert(id.to_owned(), h.clone());
        h
    }

    /// Copy of the session, reporting it closed once idle past the timeout.
    pub fn snapshot(&self, id: &str) -> Option<DialogueSession> {
        let h = lock(&self.sessions).get(id).cloned()?;
        let mut s = lock(&h).clone();
        if s.is_expired(self.now(), self.idle) {
            s.state = SessionState::Closed;
            s.pending_question = None;
        }
        Some(s)
    }

    pub fn delete(&self, id: &str) -> bool {
        let removed = lock(&self.sessions).remove(id);
        if let Some(h) = &removed {
            lock(h).state = SessionState::Closed;
        }
        removed.is_some()
    }

    /// Close and drop every expired session. Returns how many were removed.
    pub fn sweep(&self) -> usize {
        let now = self.now();
        let mut map = lock(&self.sessions);
        let before = map.len();
        map.retain(|_, h| {
            // A session busy with a turn is active by definition.
            let Ok(mut s) = h.try_lock() else {
                return true;
            };
            if s.is_expired(now, self.idle) {
                s.state = SessionState::Closed;
                false
            } else {
                true
            }
        });
        before - map.len()
    }

    pub fn len(&self) -> usize {
        lock(&self.sessions).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> (SessionStore, Arc<ManualClock>) {
        let clock = Arc::new(ManualClock::new(DateTime::from_timestamp(1_700_000_000, 0).unwrap()));
        (SessionStore::new(Duration::minutes(15), clock.clone()), clock)
    }

    #[test]
    fn sessions_expire_after_idle_timeout() {
        let (store, clock) = store();
        let h = store.acquire("s1");
        lock(&h).push(Role::User, "hi", store.now());
        clock.advance(Duration::minutes(14));
        assert_eq!(store.snapshot("s1").unwrap().state, SessionState::Open);
        clock.advance(Duration::minutes(1));
        assert_eq!(store.snapshot("s1").unwrap().state, SessionState::Closed);
        assert_eq!(store.sweep(), 1);
        assert!(store.snapshot("s1").is_none());
    }

    #[test]
    fn expired_session_is_replaced_on_next_turn() {
        let (store, clock) = store();
        lock(&store.acquire("s")).push(Role::User, "old", store.now());
        clock.advance(Duration::minutes(20));
        let h = store.acquire("s");
        assert!(lock(&h).turns.is_empty());
    }

    #[test]
    fn delete_closes() {
        let (store, _) = store();
        let h = store.acquire("s");
        assert!(store.delete("s"));
        assert_eq!(lock(&h).state, SessionState::Closed);
        assert!(!store.delete("s"));
    }

    #[test]
    fn turn_timestamps_are_monotone() {
        let t0 = DateTime::from_timestamp(100, 0).unwrap();
        let mut s = DialogueSession::new("x", t0);
        s.push(Role::User, "a", t0);
        s.push(Role::Assistant, "b", DateTime::from_timestamp(50, 0).unwrap());
        assert!(s.turns[1].timestamp >= s.turns[0].timestamp);
    }
}
