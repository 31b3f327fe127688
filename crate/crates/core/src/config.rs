//! Engine configuration and its file format.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{
    default_thresholds, secs_to_millis, Bandwidth, NetworkProfile, ProfileThresholds,
    ResourceVector, Threshold,
};

/// Weights of the three ranking subscores. Non-negative, summing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub capacity: f64,
    pub network: f64,
    pub tier: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            capacity: 0.4,
            network: 0.3,
            tier: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub thresholds: ProfileThresholds,
    pub weights: ScoreWeights,
    /// Reserved for components whose request has no compute requirement.
    pub default_footprint: ResourceVector,
    pub reservation_ttl_ms: u64,
    /// Cache drain speed as a multiple of the flow's own rate.
    pub drain_multiplier: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            thresholds: default_thresholds(),
            weights: ScoreWeights::default(),
            default_footprint: ResourceVector::new(500, 512, 1),
            reservation_ttl_ms: 30_000,
            drain_multiplier: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(String),
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Config file format. Every field is optional; a threshold row, when given,
/// replaces the built-in row for that profile entirely.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    #[serde(default)]
    pub thresholds: BTreeMap<String, ThresholdDoc>,
    #[serde(default)]
    pub weights: Option<WeightsDoc>,
    #[serde(default)]
    pub default_footprint: Option<FootprintDoc>,
    #[serde(default)]
    pub reservation_ttl_s: Option<f64>,
    #[serde(default)]
    pub drain_multiplier: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdDoc {
    pub min_bandwidth_mbps: Option<f64>,
    pub max_latency_ms: Option<f64>,
    pub max_jitter_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsDoc {
    pub capacity: f64,
    pub network: f64,
    pub tier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootprintDoc {
    pub vcpus: f64,
    pub ram_mib: u64,
    pub disk_gib: u64,
}

impl EngineConfig {
    pub fn from_doc(doc: &ConfigDoc) -> Result<EngineConfig, ConfigError> {
        let mut cfg = EngineConfig::default();
        for (name, row) in &doc.thresholds {
            let field = format!("thresholds.{name}");
            let profile: NetworkProfile = name.parse().map_err(|e: String| invalid(&field, e))?;
            let min_bandwidth = match row.min_bandwidth_mbps {
                Some(v) => Some(
                    Bandwidth::from_mbps(v)
                        .ok_or_else(|| invalid(&field, "min_bandwidth_mbps must be >= 0"))?,
                ),
                None => None,
            };
            for (v, what) in [
                (row.max_latency_ms, "max_latency_ms"),
                (row.max_jitter_ms, "max_jitter_ms"),
            ] {
                if let Some(v) = v {
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(invalid(&field, format!("{what} must be >= 0")));
                    }
                }
            }
            cfg.thresholds.set(
                profile,
                Threshold {
                    min_bandwidth,
                    max_latency_ms: row.max_latency_ms,
                    max_jitter_ms: row.max_jitter_ms,
                },
            );
        }
        if cfg.thresholds[NetworkProfile::BestEffort] != Threshold::default() {
            return Err(invalid(
                "thresholds.BestEffort",
                "the best-effort profile cannot impose thresholds",
            ));
        }
        if let Some(w) = &doc.weights {
            let weights = ScoreWeights {
                capacity: w.capacity,
                network: w.network,
                tier: w.tier,
            };
            if [w.capacity, w.network, w.tier]
                .iter()
                .any(|v| !(v.is_finite() && *v >= 0.0))
            {
                return Err(invalid("weights", "weights must be non-negative"));
            }
            if (w.capacity + w.network + w.tier - 1.0).abs() > 1e-9 {
                return Err(invalid("weights", "weights must sum to 1"));
            }
            cfg.weights = weights;
        }
        if let Some(f) = &doc.default_footprint {
            cfg.default_footprint = ResourceVector::from_vcpus(f.vcpus, f.ram_mib, f.disk_gib)
                .ok_or_else(|| invalid("default_footprint.vcpus", "invalid core count"))?;
        }
        if let Some(ttl) = doc.reservation_ttl_s {
            cfg.reservation_ttl_ms = secs_to_millis(ttl)
                .ok_or_else(|| invalid("reservation_ttl_s", "must be >= 0 with ms resolution"))?;
        }
        if let Some(m) = doc.drain_multiplier {
            if !(m.is_finite() && m >= 0.0) {
                return Err(invalid("drain_multiplier", "must be >= 0"));
            }
            cfg.drain_multiplier = m;
        }
        Ok(cfg)
    }

    pub fn from_yaml(text: &str) -> Result<EngineConfig, ConfigError> {
        let doc: ConfigDoc =
            serde_yaml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        EngineConfig::from_doc(&doc)
    }

    pub fn load_file(path: &Path) -> Result<EngineConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        EngineConfig::from_yaml(&text)
    }
}
