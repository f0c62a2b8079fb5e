use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use ocs_model::ConnInfo;
use ocs_sbi::{EventSink, SbiError, SbiSession};

/// Open southbound sessions, one per registered switch or terminal.
pub struct DeviceRegistry {
    sessions: RwLock<BTreeMap<String, Arc<SbiSession>>>,
    timeout: Duration,
    sink: EventSink,
}

impl DeviceRegistry {
    pub fn new(timeout: Duration, sink: EventSink) -> Self {
        DeviceRegistry {
            sessions: RwLock::new(BTreeMap::new()),
            timeout,
            sink,
        }
    }

    /// Probes the device and subscribes to its notifications. The session
    /// is not registered; see [`DeviceRegistry::insert`].
    pub async fn open(&self, id: &str, conn: &ConnInfo) -> Result<Arc<SbiSession>, SbiError> {
        let s = Arc::new(SbiSession::new(id, conn.addr(), self.timeout));
        s.hello().await?;
        s.subscribe(self.sink.clone()).await?;
        Ok(s)
    }

    /// A session that connects lazily. Used after a restart, when a device
    /// may still be down.
    pub fn lazy(&self, id: &str, conn: &ConnInfo) -> Arc<SbiSession> {
        Arc::new(SbiSession::new(id, conn.addr(), self.timeout))
    }

    pub fn insert(&self, session: Arc<SbiSession>) {
        self.sessions
            .write()
            .unwrap()
            .insert(session.device().to_string(), session);
    }

    pub fn get(&self, id: &str) -> Option<Arc<SbiSession>> {
        self.sessions.read().unwrap().get(id).cloned()
    }

    pub fn all(&self) -> Vec<Arc<SbiSession>> {
        self.sessions.read().unwrap().values().cloned().collect()
    }

    pub fn sink(&self) -> EventSink {
        self.sink.clone()
    }

    pub async fn close_all(&self) {
        let all = self.all();
        for s in all {
            s.close().await;
        }
    }
}
