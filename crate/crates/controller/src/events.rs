//! Event, action and handler records plus the action journal.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Duration;

use ocs_model::NbiError;
use ocs_sbi::{unix_now, AlarmKind};
use serde::{Deserialize, Serialize};
use tokio::sync::watch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    SignalDetection,
    SignalDegradation,
}

impl EventType {
    pub fn as_str(self) -> &'static str {
        match self {
            EventType::SignalDetection => "signal_detection",
            EventType::SignalDegradation => "signal_degradation",
        }
    }

    pub fn matches(self, kind: AlarmKind) -> bool {
        matches!(
            (self, kind),
            (EventType::SignalDetection, AlarmKind::SignalDetected)
                | (EventType::SignalDegradation, AlarmKind::SignalDegraded)
        )
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventType {
    type Err = NbiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "signal_detection" => Ok(EventType::SignalDetection),
            "signal_degradation" => Ok(EventType::SignalDegradation),
            _ => Err(NbiError::invalid_range(format!("unknown event_type {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub event_id: String,
    pub event_type: EventType,
    pub ocs: String,
    pub port: String,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub act_id: String,
    pub svc_id: String,
    pub a: String,
    pub z: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pce_alg: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocs_list: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HandlerBinding {
    Event { event_id: String, act_id: String },
    Alarm { svc_id: String, act_id: String },
}

impl HandlerBinding {
    pub fn act_id(&self) -> &str {
        match self {
            HandlerBinding::Event { act_id, .. } | HandlerBinding::Alarm { act_id, .. } => act_id,
        }
    }
}

/// One dispatched action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub ts: f64,
    pub trigger: String,
    pub act_id: String,
    pub svc_id: String,
    /// `OK` or the error code the action ended with.
    pub outcome: String,
    pub elapsed_s: f64,
}

impl JournalEntry {
    pub fn ok(&self) -> bool {
        self.outcome == "OK"
    }
}

/// Append-only record of dispatched actions, mirrored in memory so callers
/// can wait on it.
pub struct Journal {
    file: Mutex<Option<File>>,
    entries: Mutex<Vec<JournalEntry>>,
    len: watch::Sender<usize>,
}

impl Journal {
    pub fn open(path: Option<&Path>) -> std::io::Result<Journal> {
        let file = match path {
            Some(p) => Some(OpenOptions::new().create(true).append(true).open(p)?),
            None => None,
        };
        Ok(Journal {
            file: Mutex::new(file),
            entries: Mutex::new(Vec::new()),
            len: watch::channel(0).0,
        })
    }

    pub fn record(&self, trigger: &str, act: &ActionSpec, outcome: &str, elapsed: Duration) {
        let e = JournalEntry {
            ts: unix_now(),
            trigger: trigger.to_string(),
            act_id: act.act_id.clone(),
            svc_id: act.svc_id.clone(),
            outcome: outcome.to_string(),
            elapsed_s: elapsed.as_secs_f64(),
        };
        if let Some(f) = self.file.lock().unwrap().as_mut() {
            let line = serde_json::to_string(&e).expect("journal entries serialize");
            if let Err(err) = writeln!(f, "{line}") {
                tracing::warn!("journal write failed: {err}");
            }
        }
        let n = {
            let mut v = self.entries.lock().unwrap();
            v.push(e);
            v.len()
        };
        self.len.send_replace(n);
    }

    pub fn entries(&self) -> Vec<JournalEntry> {
        self.entries.lock().unwrap().clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Waits until the journal holds at least `n` entries.
    pub async fn wait_len(&self, n: usize, timeout: Duration) -> bool {
        let mut rx = self.len.subscribe();
        tokio::time::timeout(timeout, rx.wait_for(|len| *len >= n))
            .await
            .is_ok_and(|r| r.is_ok())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_names() {
        assert_eq!("signal_detection".parse::<EventType>().unwrap(), EventType::SignalDetection);
        assert!("signal".parse::<EventType>().is_err());
        let h = HandlerBinding::Alarm {
            svc_id: "S1".into(),
            act_id: "Act".into(),
        };
        assert_eq!(
            serde_json::to_string(&h).unwrap(),
            r#"{"kind":"ALARM","svc_id":"S1","act_id":"Act"}"#
        );
        assert!(EventType::SignalDegradation.matches(AlarmKind::SignalDegraded));
        assert!(!EventType::SignalDetection.matches(AlarmKind::SignalDegraded));
    }

    #[test]
    fn journal_lines() {
        let dir = std::env::temp_dir().join(format!("journal-{}", std::process::id()));
        let j = Journal::open(Some(&dir)).unwrap();
        let act = ActionSpec {
            act_id: "Act_A".into(),
            svc_id: "Service_A".into(),
            a: "A".into(),
            z: "Z".into(),
            pce_alg: None,
            ocs_list: None,
        };
        j.record("Event_A", &act, "OK", Duration::from_millis(1500));
        let text = std::fs::read_to_string(&dir).unwrap();
        let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 6);
        for k in ["ts", "trigger", "act_id", "svc_id", "outcome", "elapsed_s"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        assert_eq!(v["elapsed_s"], 1.5);
        let _ = std::fs::remove_file(dir);
    }
}
