//! In-memory conversation sessions with idle expiry.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime};

use tokio::sync::{Mutex as AsyncMutex, OwnedMutexGuard};

use emagent_core::agent::Session;

#[derive(Debug)]
pub struct SessionState {
    pub session_id: String,
    pub session: Session,
    pub created_at: SystemTime,
}

#[derive(Debug)]
struct Slot {
    last_active: Mutex<Instant>,
    state: Arc<AsyncMutex<SessionState>>,
}

/// Sessions keyed by id. Requests for one session are serialized by holding
/// its lock for the whole turn.
#[derive(Debug)]
pub struct SessionStore {
    ttl: Duration,
    slots: Mutex<HashMap<String, Arc<Slot>>>,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        Self { ttl, slots: Mutex::new(HashMap::new()) }
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    /// Locks the named session, creating it when absent or expired. A fresh
    /// id is generated when none is given.
    pub async fn acquire(&self, session_id: Option<&str>) -> OwnedMutexGuard<SessionState> {
        let now = Instant::now();
        let slot = {
            let mut slots = self.slots.lock().expect("session map poisoned");
            self.evict_locked(&mut slots, now);
            let id = session_id.map(str::to_string).unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
            let slot = slots.entry(id.clone()).or_insert_with(|| {
                Arc::new(Slot {
                    last_active: Mutex::new(now),
                    state: Arc::new(AsyncMutex::new(SessionState {
                        session_id: id,
                        session: Session::new(),
                        created_at: SystemTime::now(),
                    })),
                })
            });
            *slot.last_active.lock().expect("clock poisoned") = now;
            Arc::clone(slot)
        };
        slot.state.clone().lock_owned().await
    }

    /// Drops sessions idle for longer than the TTL as of `now`.
    pub fn evict_expired(&self, now: Instant) -> usize {
        let mut slots = self.slots.lock().expect("session map poisoned");
        self.evict_locked(&mut slots, now)
    }

    fn evict_locked(&self, slots: &mut HashMap<String, Arc<Slot>>, now: Instant) -> usize {
        let before = slots.len();
        slots.retain(|_, slot| {
            let last = *slot.last_active.lock().expect("clock poisoned");
            now.saturating_duration_since(last) <= self.ttl
        });
        before - slots.len()
    }

    pub fn len(&self) -> usize {
        self.slots.lock().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, session_id: &str) -> bool {
        self.slots.lock().expect("session map poisoned").contains_key(session_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[tokio::test]
    async fn creates_and_reuses_sessions() {
        let store = SessionStore::new(Duration::from_secs(60));
        let id = {
            let guard = store.acquire(None).await;
            assert!(!guard.session_id.is_empty());
            guard.session_id.clone()
        };
        let again = store.acquire(Some(&id)).await;
        assert_eq!(again.session_id, id);
        assert_eq!(store.len(), 1);
    }

    #[tokio::test]
    async fn idle_sessions_expire() {
        let store = SessionStore::new(Duration::from_secs(10));
        drop(store.acquire(Some("a")).await);
        assert_eq!(store.evict_expired(Instant::now()), 0);
        assert_eq!(store.evict_expired(Instant::now() + Duration::from_secs(11)), 1);
        assert!(!store.contains("a"));
    }

    #[tokio::test]
    async fn same_session_is_serialized() {
        let store = Arc::new(SessionStore::new(Duration::from_secs(60)));
        let held = store.acquire(Some("s")).await;
        let s2 = Arc::clone(&store);
        let waiter = tokio::spawn(async move { s2.acquire(Some("s")).await.session_id.clone() });
        tokio::task::yield_now().await;
        assert!(!waiter.is_finished());
        drop(held);
        assert_eq!(waiter.await.unwrap(), "s");
        // A different session is not blocked.
        let _other = store.acquire(Some("t")).await;
    }
}
