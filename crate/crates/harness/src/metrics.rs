//! Output rows and CSV emission. Row order and float formatting are
//! deterministic, so equal seeds produce byte-identical files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use splitsim_core::error::{Error, Result};

/// One strategy outcome on one seeded scenario. Column order is the field
/// order here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario: String,
    pub seed: u64,
    pub strategy: String,
    /// Sum of per-user total delays, seconds.
    pub sum_t_s: f64,
    /// Sum of per-user energies, formula units (J).
    pub sum_e_j: f64,
    /// Hard sum of delayed completion times, seconds.
    pub hard_c_s: f64,
    /// Exact count of users past their deadline.
    pub hard_z: u64,
    /// Baseline delay sum over this strategy's delay sum.
    pub latency_speedup: f64,
    /// Baseline energy sum over this strategy's energy sum.
    pub energy_reduction: f64,
    /// Optimizer inner iterations; 0 for the fixed baselines.
    pub iterations: u64,
    /// Hash of the base config, identical across every row of a run or
    /// sweep.
    pub config_hash: String,
}

pub fn write_rows(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())
        .map_err(|e| Error::Parse(format!("csv open: {e}")))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::Parse(format!("csv write: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn rows_to_string(rows: &[MetricsRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::Parse(format!("csv write: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(format!("csv flush: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(format!("csv utf8: {e}")))
}

/// Sidecar metadata describing how a CSV was produced, including the
/// declared interpretation of the QoE-threshold axis.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub scenario: String,
    pub baseline: String,
    pub axis: Option<String>,
    pub values: Option<Vec<f64>>,
    pub config_hash: String,
    pub qoe_threshold_convention: String,
    pub baseline_resource_rule: String,
}

pub const QOE_THRESHOLD_CONVENTION: &str = "qoe_threshold value v sets every user's deadline to \
v times the strategy's own mean per-user delay, measured in a first pass at the configured \
deadlines and re-solved in a second pass";

pub const BASELINE_RESOURCE_RULE: &str = "non-optimizing offload baselines transmit at maximum \
power, take subchannels round-robin by gain rank within each AP, and split the server's unit \
budget equally among an AP's users (clamped to the per-user box); strategies that keep a user \
fully on-device charge that user the minimum compute-unit penalty";

pub fn write_meta(csv_path: impl AsRef<Path>, meta: &RunMeta) -> Result<()> {
    let path = csv_path.as_ref().with_extension("meta.toml");
    let text =
        toml::to_string_pretty(meta).map_err(|e| Error::Parse(format!("meta: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}
