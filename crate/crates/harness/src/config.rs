//! Scenario configuration files: a single TOML document describing the
//! topology, model profile, device/server/QoE parameters, weights and
//! optimizer settings, plus run lists (seeds, strategies, oracle grids).
//! dBm fields are converted to Watts here; everything downstream is SI.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use splitsim_core::channel::Topology;
use splitsim_core::costs::{DeviceSpec, QoESpec, ServerSpec};
use splitsim_core::error::{Error, Result};
use splitsim_core::ligd::{GdParams, StepMode};
use splitsim_core::profiles::{self, ModelProfile, SynthSpec};
use splitsim_core::scenario::Scenario;
use splitsim_core::units::dbm_to_watts;
use splitsim_core::utility::Weights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub name: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_baseline")]
    pub baseline: String,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<String>,
    pub topology: TopologyConfig,
    pub profile: ProfileConfig,
    pub device: DeviceConfig,
    pub server: ServerConfig,
    pub qoe: QoeConfig,
    pub weights: Weights,
    #[serde(default)]
    pub gd: GdConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    /// Profile resolved at load time; not part of the serialized config.
    #[serde(skip)]
    resolved_profile: Option<ModelProfile>,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_baseline() -> String {
    "device_only".into()
}

fn default_strategies() -> Vec<String> {
    vec!["device_only".into(), "edge_only".into(), "exhaustive_split".into(), "li_gd".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub n_aps: usize,
    pub n_users: usize,
    pub n_subchannels: usize,
    pub bandwidth_up_hz: f64,
    pub bandwidth_down_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub pathloss_exp: f64,
    pub cluster_cap: usize,
    /// Absent thresholds disable the SIC decodability check.
    pub sic_threshold_up_dbm: Option<f64>,
    pub sic_threshold_down_dbm: Option<f64>,
    #[serde(default = "default_area")]
    pub area_m: f64,
    #[serde(default = "default_true")]
    pub fading: bool,
}

fn default_area() -> f64 {
    250.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    /// Path to a profile file, relative to the config file.
    pub path: Option<String>,
    /// Synthetic profile, used when no path is given.
    pub synth: Option<SynthSpec>,
    /// Optional override restricting the admissible split points.
    pub split_points: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub flops: f64,
    pub kappa: f64,
    pub cycles_per_bit: f64,
    pub p_min_dbm: f64,
    pub p_max_dbm: f64,
    /// Per-user capability jitter: flops drawn uniformly from
    /// [flops (1 - s), flops (1 + s)].
    #[serde(default)]
    pub flops_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerConfig {
    pub unit_flops: f64,
    pub kappa: f64,
    pub cycles_per_bit: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub theta: f64,
    pub p_min_dbm: f64,
    pub p_max_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoeConfig {
    pub q_seconds: f64,
    /// Per-user deadline jitter, uniform in [q (1 - s), q (1 + s)].
    #[serde(default)]
    pub q_spread: f64,
    pub steepness: f64,
    #[serde(default = "default_z_scale")]
    pub z_scale: f64,
}

fn default_z_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_mode")]
    pub mode: StepMode,
    #[serde(default)]
    pub refine_splits: bool,
}

fn default_eta() -> f64 {
    1e-2
}

fn default_eps() -> f64 {
    1e-4
}

fn default_max_iter() -> usize {
    5000
}

fn default_mode() -> StepMode {
    StepMode::FixedStep
}

impl Default for GdConfig {
    fn default() -> Self {
        GdConfig {
            eta: default_eta(),
            eps: default_eps(),
            max_iter: default_max_iter(),
            mode: default_mode(),
            refine_splits: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    #[serde(default = "default_levels")]
    pub p_levels: usize,
    #[serde(default = "default_levels")]
    pub p_down_levels: usize,
    #[serde(default = "default_levels")]
    pub r_levels: usize,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default = "default_gap_bound")]
    pub gap_bound: f64,
}

fn default_levels() -> usize {
    5
}

fn default_budget() -> u64 {
    splitsim_core::baselines::DEFAULT_ORACLE_BUDGET as u64
}

fn default_gap_bound() -> f64 {
    0.05
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            p_levels: default_levels(),
            p_down_levels: default_levels(),
            r_levels: default_levels(),
            budget: default_budget(),
            gap_bound: default_gap_bound(),
        }
    }
}

/// Per-run tweaks applied on top of a config when materializing a scenario,
/// used by the sweep axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Overrides {
    /// Multiplies every layer workload.
    pub workload_scale: f64,
    /// Replaces every user's deadline with this value, in seconds.
    pub q_seconds: Option<f64>,
}

impl Default for Overrides {
    fn default() -> Self {
        Overrides { workload_scale: 1.0, q_seconds: None }
    }
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Config> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg: Config = toml::from_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(PathBuf::from).unwrap_or_default();
        cfg.resolve_profile(&base)?;
        Ok(cfg)
    }

    pub fn from_str_with_base(text: &str, base: &Path) -> Result<Config> {
        let mut cfg: Config =
            toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.resolve_profile(base)?;
        Ok(cfg)
    }

    fn resolve_profile(&mut self, base: &Path) -> Result<()> {
        let mut profile = match (&self.profile.path, &self.profile.synth) {
            (Some(p), _) => profiles::load_profile(base.join(p))?,
            (None, Some(synth)) => profiles::synth_profile(synth)?,
            (None, None) => {
                return Err(Error::Validation(
                    "profile needs either a path or a synth block".into(),
                ))
            }
        };
        if let Some(points) = &self.profile.split_points {
            profile = ModelProfile::new(
                profile.name.clone(),
                profile.input_bits,
                profile.result_bits,
                profile.layers.clone(),
                points.clone(),
            )?;
        }
        self.resolved_profile = Some(profile);
        Ok(())
    }

    pub fn profile(&self) -> &ModelProfile {
        self.resolved_profile.as_ref().expect("profile resolved at load")
    }

    /// Hash of the serialized config, echoed into every emitted row. Sweep
    /// rows share the base config's hash, which pins every non-axis field.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        hex[..16].into()
    }

    pub fn materialize(&self, seed: u64) -> Result<Scenario> {
        self.materialize_with(seed, &Overrides::default())
    }

    /// Build the scenario for one seed. Per-user draws (device capability,
    /// deadlines) use dedicated RNG streams so they are independent of the
    /// channel realization.
    pub fn materialize_with(&self, seed: u64, ov: &Overrides) -> Result<Scenario> {
        let t = &self.topology;
        let topology = Topology {
            n_aps: t.n_aps,
            n_users: t.n_users,
            n_subchannels: t.n_subchannels,
            bandwidth_up_hz: t.bandwidth_up_hz,
            bandwidth_down_hz: t.bandwidth_down_hz,
            noise_psd_w_hz: dbm_to_watts(t.noise_psd_dbm_hz),
            pathloss_exp: t.pathloss_exp,
            cluster_cap: t.cluster_cap,
            sic_threshold_up_w: t.sic_threshold_up_dbm.map_or(0.0, dbm_to_watts),
            sic_threshold_down_w: t.sic_threshold_down_dbm.map_or(0.0, dbm_to_watts),
            area_m: t.area_m,
            fading: t.fading,
        };

        let mut profile = self.profile().clone();
        if ov.workload_scale != 1.0 {
            let layers = profile
                .layers
                .iter()
                .map(|l| {
                    let mut l = l.clone();
                    l.workload_flops *= ov.workload_scale;
                    l
                })
                .collect();
            profile = ModelProfile::new(
                profile.name.clone(),
                profile.input_bits,
                profile.result_bits,
                layers,
                profile.split_points.clone(),
            )?;
        }

        let mut dev_rng = ChaCha8Rng::seed_from_u64(seed);
        dev_rng.set_stream(10);
        let d = &self.device;
        let devices: Vec<DeviceSpec> = (0..t.n_users)
            .map(|_| {
                let flops = if d.flops_spread > 0.0 {
                    dev_rng.gen_range(
                        d.flops * (1.0 - d.flops_spread)..=d.flops * (1.0 + d.flops_spread),
                    )
                } else {
                    d.flops
                };
                DeviceSpec {
                    flops,
                    kappa: d.kappa,
                    cycles_per_bit: d.cycles_per_bit,
                    p_min_w: dbm_to_watts(d.p_min_dbm),
                    p_max_w: dbm_to_watts(d.p_max_dbm),
                }
            })
            .collect();

        let s = &self.server;
        let server = ServerSpec {
            unit_flops: s.unit_flops,
            kappa: s.kappa,
            cycles_per_bit: s.cycles_per_bit,
            r_min: s.r_min,
            r_max: s.r_max,
            theta: s.theta,
            p_min_w: dbm_to_watts(s.p_min_dbm),
            p_max_w: dbm_to_watts(s.p_max_dbm),
        };

        let mut q_rng = ChaCha8Rng::seed_from_u64(seed);
        q_rng.set_stream(11);
        let q = &self.qoe;
        let qoe: Vec<QoESpec> = (0..t.n_users)
            .map(|_| {
                let base = match ov.q_seconds {
                    Some(fixed) => fixed,
                    None if q.q_spread > 0.0 => q_rng.gen_range(
                        q.q_seconds * (1.0 - q.q_spread)..=q.q_seconds * (1.0 + q.q_spread),
                    ),
                    None => q.q_seconds,
                };
                QoESpec { q_seconds: base, steepness: q.steepness }
            })
            .collect();

        let g = &self.gd;
        let sc = Scenario {
            topology,
            profile,
            devices,
            server,
            qoe,
            z_scale: q.z_scale,
            weights: self.weights,
            per_user_weights: None,
            gd: GdParams {
                eta: g.eta,
                eps: g.eps,
                max_iter: g.max_iter,
                mode: g.mode,
                refine_splits: g.refine_splits,
            },
        };
        sc.validate()?;
        Ok(sc)
    }
}
