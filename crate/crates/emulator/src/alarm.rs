use ocs_sbi::Level;
use serde::{Deserialize, Serialize};

/// Power of a port no light reaches.
pub const DARK_DBM: f64 = -99.0;

/// Per-port alarm thresholds. Crossings are edge-triggered: a notification
/// fires only on the transition across a threshold, never while the power
/// merely stays beyond it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub high: Option<f64>,
    pub low: Option<f64>,
}

impl Thresholds {
    pub fn merge(&mut self, high: Option<f64>, low: Option<f64>) {
        if high.is_some() {
            self.high = high;
        }
        if low.is_some() {
            self.low = low;
        }
    }

    pub fn crossing(&self, old: f64, new: f64) -> Option<Level> {
        if self.high.is_some_and(|h| old <= h && new > h) {
            return Some(Level::Hi);
        }
        if self.low.is_some_and(|l| old >= l && new < l) {
            return Some(Level::Lo);
        }
        None
    }
}
