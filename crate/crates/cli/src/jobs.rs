//! Per-command configuration schemas. Each job is the complete, serializable
//! record of a run: defaults, then an optional JSON file, then --set
//! overrides. The resolved job is logged into the output directory so any
//! run can be replayed from its artifacts alone.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use rangegait::analytics::SweepConfig;
use rangegait::net::ModelConfig;
use rangegait::pointcloud::WalkerParams;
use rangegait::projection::ProjectionConfig;

pub const DEFAULT_SEED: u64 = 1;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_pattern() -> String {
    "*.xyz".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthJob {
    pub seed: u64,
    pub walker: WalkerParams,
}

impl Default for SynthJob {
    fn default() -> Self {
        SynthJob {
            seed: default_seed(),
            walker: WalkerParams::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectJob {
    pub seed: u64,
    /// Sequence directory holding frame files (plus labels.json if labeled).
    pub input: Option<PathBuf>,
    /// Filename glob selecting frame files inside `input`.
    pub pattern: String,
    pub projection: ProjectionConfig,
}

impl Default for ProjectJob {
    fn default() -> Self {
        ProjectJob {
            seed: default_seed(),
            input: None,
            pattern: default_pattern(),
            projection: ProjectionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepJob {
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub pattern: String,
    pub sweep: SweepConfig,
}

impl Default for SweepJob {
    fn default() -> Self {
        SweepJob {
            seed: default_seed(),
            input: None,
            pattern: default_pattern(),
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeJob {
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub pattern: String,
    pub projection: ProjectionConfig,
}

impl Default for AnalyzeJob {
    fn default() -> Self {
        AnalyzeJob {
            seed: default_seed(),
            input: None,
            pattern: default_pattern(),
            projection: ProjectionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetCheckJob {
    pub seed: u64,
    /// Directory of PNG frames, or of subdirectories each holding one stack.
    pub input: Option<PathBuf>,
    /// Weight fixture; omitted means draw from `seed` and save alongside
    /// the report.
    pub weights: Option<PathBuf>,
    /// Triplet-loss margin.
    pub margin: f64,
    pub model: ModelConfig,
}

impl Default for NetCheckJob {
    fn default() -> Self {
        NetCheckJob {
            seed: default_seed(),
            input: None,
            weights: None,
            margin: 0.2,
            model: ModelConfig::default(),
        }
    }
}
