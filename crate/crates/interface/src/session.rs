//! Upload sessions kept in a least-recently-used map.

use std::sync::{Arc, Mutex};

use indexmap::IndexMap;
use unibias_core::SummaryTable;

const GRID_CACHE_CAPACITY: usize = 16;

#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub digest: String,
    pub summary: SummaryTable,
    grids: Mutex<IndexMap<String, Arc<String>>>,
}

impl Session {
    /// Cached grid response for a request-body hash.
    pub fn cached_grid(&self, key: &str) -> Option<Arc<String>> {
        self.grids.lock().expect("grid cache poisoned").get(key).cloned()
    }

    pub fn cache_grid(&self, key: String, body: Arc<String>) {
        let mut grids = self.grids.lock().expect("grid cache poisoned");
        if grids.len() >= GRID_CACHE_CAPACITY && !grids.contains_key(&key) {
            grids.shift_remove_index(0);
        }
        grids.insert(key, body);
    }
}

#[derive(Debug)]
struct Inner {
    next: u64,
    sessions: IndexMap<String, Arc<Session>>,
}

/// Sessions in recency order; the front is evicted first.
#[derive(Debug)]
pub struct SessionStore {
    capacity: usize,
    inner: Mutex<Inner>,
}

impl SessionStore {
    pub fn new(capacity: usize) -> Self {
        SessionStore {
            capacity: capacity.max(1),
            inner: Mutex::new(Inner { next: 0, sessions: IndexMap::new() }),
        }
    }

    pub fn insert(&self, summary: SummaryTable) -> Arc<Session> {
        let digest = summary.digest();
        let mut inner = self.inner.lock().expect("session store poisoned");
        inner.next += 1;
        let id = format!("{}-{}", &digest[..12], inner.next);
        while inner.sessions.len() >= self.capacity {
            inner.sessions.shift_remove_index(0);
        }
        let session = Arc::new(Session {
            id: id.clone(),
            digest,
            summary,
            grids: Mutex::new(IndexMap::new()),
        });
        inner.sessions.insert(id, Arc::clone(&session));
        session
    }

    /// Looks a session up and marks it most recently used.
    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        let mut inner = self.inner.lock().expect("session store poisoned");
        let idx = inner.sessions.get_index_of(id)?;
        let last = inner.sessions.len() - 1;
        inner.sessions.move_index(idx, last);
        inner.sessions.get_index(last).map(|(_, s)| Arc::clone(s))
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("session store poisoned").sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
