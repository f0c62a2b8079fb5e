use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use ocs_sbi::Vendor;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// How long a device takes to actuate a batch of cross-connect changes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LatencyModel {
    Fixed(Duration),
    /// Mean and standard deviation in seconds. Samples are clamped at zero.
    Normal { mean: f64, std: f64 },
}

impl LatencyModel {
    pub const ZERO: LatencyModel = LatencyModel::Fixed(Duration::ZERO);

    pub fn normal(mean: f64, std: f64) -> Self {
        LatencyModel::Normal { mean, std }
    }

    pub fn fixed_secs(s: f64) -> Self {
        LatencyModel::Fixed(Duration::from_secs_f64(s.max(0.0)))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Duration {
        match *self {
            LatencyModel::Fixed(d) => d,
            LatencyModel::Normal { mean, std } => {
                let x = if std > 0.0 {
                    Normal::new(mean, std).map(|n| n.sample(rng)).unwrap_or(mean)
                } else {
                    mean
                };
                Duration::from_secs_f64(x.max(0.0))
            }
        }
    }
}

impl fmt::Display for LatencyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatencyModel::Fixed(d) => write!(f, "fixed:{}", d.as_secs_f64()),
            LatencyModel::Normal { mean, std } => write!(f, "normal:{mean}:{std}"),
        }
    }
}

/// Accepts `zero`, `fixed:<s>` and `normal:<mean>:<std>`.
impl FromStr for LatencyModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| -> Result<f64, String> {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| format!("bad latency value {t:?}"))
        };
        match parts.as_slice() {
            ["zero"] => Ok(LatencyModel::ZERO),
            ["fixed", d] => Ok(LatencyModel::fixed_secs(num(d)?)),
            ["normal", m, sd] => Ok(LatencyModel::normal(num(m)?, num(sd)?)),
            _ => Err(format!("bad latency model {s:?} (zero | fixed:<s> | normal:<mean>:<std>)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FaultMode {
    #[default]
    None,
    /// The vendor port refuses connections.
    ServerDown,
    /// Requests are read and never answered or applied.
    TimeoutAll,
    /// Edits are acknowledged but never applied.
    LieOnApply,
}

impl FaultMode {
    pub const ALL: [FaultMode; 4] = [
        FaultMode::None,
        FaultMode::ServerDown,
        FaultMode::TimeoutAll,
        FaultMode::LieOnApply,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FaultMode::None => "NONE",
            FaultMode::ServerDown => "SERVER_DOWN",
            FaultMode::TimeoutAll => "TIMEOUT_ALL",
            FaultMode::LieOnApply => "LIE_ON_APPLY",
        }
    }
}

impl fmt::Display for FaultMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FaultMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        FaultMode::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| format!("unknown fault mode {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmulatorProfile {
    pub vendor: Vendor,
    pub latency: LatencyModel,
    pub fault: FaultMode,
    pub rx_ports: Vec<String>,
    pub tx_ports: Vec<String>,
    /// Initial input power of rx ports; unlisted ports start dark.
    pub port_powers: BTreeMap<String, f64>,
    pub seed: u64,
}

impl EmulatorProfile {
    /// A device with ports `R1..R16` and `T1..T16`.
    pub fn new(vendor: Vendor) -> Self {
        EmulatorProfile {
            vendor,
            latency: LatencyModel::ZERO,
            fault: FaultMode::None,
            rx_ports: (1..=16).map(|i| format!("R{i}")).collect(),
            tx_ports: (1..=16).map(|i| format!("T{i}")).collect(),
            port_powers: BTreeMap::new(),
            seed: 0,
        }
    }

    pub fn with_latency(mut self, latency: LatencyModel) -> Self {
        self.latency = latency;
        self
    }

    pub fn with_fault(mut self, fault: FaultMode) -> Self {
        self.fault = fault;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_ports<I, J>(mut self, rx: I, tx: J) -> Self
    where
        I: IntoIterator,
        I::Item: Into<String>,
        J: IntoIterator,
        J::Item: Into<String>,
    {
        self.rx_ports = rx.into_iter().map(Into::into).collect();
        self.tx_ports = tx.into_iter().map(Into::into).collect();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parse_models() {
        assert_eq!("zero".parse::<LatencyModel>().unwrap(), LatencyModel::ZERO);
        assert_eq!(
            "normal:0.7:0.07".parse::<LatencyModel>().unwrap(),
            LatencyModel::normal(0.7, 0.07)
        );
        assert_eq!(
            "fixed:0.05".parse::<LatencyModel>().unwrap(),
            LatencyModel::Fixed(Duration::from_millis(50))
        );
        assert!("normal:0.7".parse::<LatencyModel>().is_err());
        assert!("fixed:-1".parse::<LatencyModel>().is_err());
        assert_eq!("server-down".parse::<FaultMode>().unwrap(), FaultMode::ServerDown);
        assert_eq!("LIE_ON_APPLY".parse::<FaultMode>().unwrap(), FaultMode::LieOnApply);
    }

    #[test]
    fn samples_never_negative() {
        let m = LatencyModel::normal(0.01, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..2000).all(|_| m.sample(&mut rng) >= Duration::ZERO));
    }
}
