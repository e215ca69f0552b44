//! Chain-topology DNN profiles: per-layer compute workloads, layer-type
//! composition counts, intermediate activation sizes, and the admissible
//! split points between the on-device prefix and the offloaded suffix.
//!
//! A split index `k` in `0..=F` means layers `1..=k` run on the device and
//! layers `k+1..=F` run on the edge server. `k = 0` offloads everything
//! (the raw input crosses the link), `k = F` keeps everything on the device
//! (nothing crosses the link).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One layer of a chain model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerProfile {
    /// Compute task of this layer in FLOPs.
    pub workload_flops: f64,
    /// Number of convolutional sublayers folded into this layer.
    pub conv_count: u32,
    /// Number of pooling sublayers.
    pub pool_count: u32,
    /// Number of ReLU sublayers.
    pub relu_count: u32,
    /// Size of this layer's output activation in bits. This is the uplink
    /// payload when the split falls directly after this layer.
    pub out_bits: f64,
}

/// Per-sublayer-type unit costs, used to cross-check stored workloads
/// against the composition counts when they are configured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCosts {
    pub conv_flops: f64,
    pub pool_flops: f64,
    pub relu_flops: f64,
}

/// A validated chain model profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    pub name: String,
    /// Raw input size in bits; the uplink payload for a full offload (k = 0).
    pub input_bits: f64,
    /// Final inference result size in bits; the downlink payload.
    pub result_bits: f64,
    pub layers: Vec<LayerProfile>,
    /// Strictly increasing subset of `0..=F`; must contain 0 and F.
    pub split_points: Vec<usize>,
    /// Prefix sums of workloads; `prefix[k]` is the device-side FLOPs at
    /// split k. Rebuilt on load, never serialized.
    #[serde(skip)]
    prefix: Vec<f64>,
}

impl ModelProfile {
    pub fn new(
        name: impl Into<String>,
        input_bits: f64,
        result_bits: f64,
        layers: Vec<LayerProfile>,
        split_points: Vec<usize>,
    ) -> Result<Self> {
        let mut p = ModelProfile {
            name: name.into(),
            input_bits,
            result_bits,
            layers,
            split_points,
            prefix: Vec::new(),
        };
        p.rebuild_prefix();
        p.validate()?;
        Ok(p)
    }

    fn rebuild_prefix(&mut self) {
        let mut acc = 0.0;
        self.prefix = std::iter::once(0.0)
            .chain(self.layers.iter().map(|l| {
                acc += l.workload_flops;
                acc
            }))
            .collect();
    }

    fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Validation("profile has no layers".into()));
        }
        if !(self.input_bits > 0.0 && self.input_bits.is_finite()) {
            return Err(Error::Validation(format!(
                "input_bits must be positive and finite, got {}",
                self.input_bits
            )));
        }
        if !(self.result_bits > 0.0 && self.result_bits.is_finite()) {
            return Err(Error::Validation(format!(
                "result_bits must be positive and finite, got {}",
                self.result_bits
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if !(l.workload_flops > 0.0 && l.workload_flops.is_finite()) {
                return Err(Error::Validation(format!(
                    "layer {}: workload must be positive and finite, got {}",
                    i + 1,
                    l.workload_flops
                )));
            }
            if !(l.out_bits > 0.0 && l.out_bits.is_finite()) {
                return Err(Error::Validation(format!(
                    "layer {}: out_bits must be positive and finite, got {}",
                    i + 1,
                    l.out_bits
                )));
            }
        }
        let f = self.layers.len();
        if self.split_points.first() != Some(&0) {
            return Err(Error::Validation(
                "split_points must start at 0 (full offload)".into(),
            ));
        }
        if self.split_points.last() != Some(&f) {
            return Err(Error::Validation(format!(
                "split_points must end at the layer count {f} (full on-device)"
            )));
        }
        if !self.split_points.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Validation(
                "split_points must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// Check stored workloads against the composition counts for the given
    /// per-type unit costs, within `rel_tol` relative error.
    pub fn validate_composition(&self, unit: &UnitCosts, rel_tol: f64) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            let composed = l.conv_count as f64 * unit.conv_flops
                + l.pool_count as f64 * unit.pool_flops
                + l.relu_count as f64 * unit.relu_flops;
            let err = (composed - l.workload_flops).abs() / l.workload_flops.max(1.0);
            if err > rel_tol {
                return Err(Error::Validation(format!(
                    "layer {}: stored workload {} differs from composed {} (rel err {:.3e})",
                    i + 1,
                    l.workload_flops,
                    composed,
                    err
                )));
            }
        }
        Ok(())
    }

    /// Number of layers F.
    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Total workload Z over all layers.
    pub fn total_flops(&self) -> f64 {
        *self.prefix.last().expect("profile has layers")
    }

    fn check_split(&self, k: usize) -> Result<()> {
        if self.split_points.binary_search(&k).is_err() {
            return Err(Error::Validation(format!(
                "split index {k} is not an admissible split point of '{}'",
                self.name
            )));
        }
        Ok(())
    }

    /// Device-side and edge-side FLOPs at split `k`. The two parts always
    /// sum to `total_flops()` exactly.
    pub fn cumulative_workload(&self, k: usize) -> Result<(f64, f64)> {
        self.check_split(k)?;
        let device = self.prefix[k];
        Ok((device, self.total_flops() - device))
    }

    /// Uplink payload in bits at split `k`: the raw input for k = 0, the
    /// k-th layer's activation for interior splits, and 0 for k = F since
    /// nothing crosses the link.
    pub fn intermediate_bits(&self, k: usize) -> Result<f64> {
        self.check_split(k)?;
        Ok(if k == 0 {
            self.input_bits
        } else if k == self.layer_count() {
            0.0
        } else {
            self.layers[k - 1].out_bits
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    /// Layer count F, at least 1.
    pub layers: usize,
    /// Uniform range for per-layer workloads in FLOPs.
    pub workload_flops: (f64, f64),
    /// Uniform range for activation sizes in bits.
    pub out_bits: (f64, f64),
    pub input_bits: f64,
    pub result_bits: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            layers: 9,
            workload_flops: (1e8, 5e8),
            out_bits: (2e5, 4e6),
            input_bits: 2.5e4,
            result_bits: 8e3,
        }
    }
}

/// Deterministically synthesize a chain profile. All split points `0..=F`
/// are admissible.
pub fn synth_profile(spec: &SynthSpec) -> Result<ModelProfile> {
    if spec.layers == 0 {
        return Err(Error::Validation("synth profile needs at least 1 layer".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let layers = (0..spec.layers)
        .map(|i| {
            let workload = rng.gen_range(spec.workload_flops.0..=spec.workload_flops.1);
            let out_bits = rng.gen_range(spec.out_bits.0..=spec.out_bits.1);
            LayerProfile {
                workload_flops: workload,
                conv_count: 1,
                pool_count: (i % 2) as u32,
                relu_count: 1,
                out_bits,
            }
        })
        .collect();
    ModelProfile::new(
        format!("synth-{}x{}", spec.layers, spec.seed),
        spec.input_bits,
        spec.result_bits,
        layers,
        (0..=spec.layers).collect(),
    )
}

/// Load a profile from its TOML file and validate it.
pub fn load_profile(path: impl AsRef<Path>) -> Result<ModelProfile> {
    let text = std::fs::read_to_string(path)?;
    parse_profile(&text)
}

/// Parse a profile from TOML text.
pub fn parse_profile(text: &str) -> Result<ModelProfile> {
    let mut p: ModelProfile =
        toml::from_str(text).map_err(|e| Error::Parse(format!("profile: {e}")))?;
    p.rebuild_prefix();
    p.validate()?;
    Ok(p)
}

/// Serialize a profile to TOML. `parse_profile(save_profile(p)) == p`
/// bit-exactly for every field.
pub fn save_profile(p: &ModelProfile) -> String {
    toml::to_string_pretty(p).expect("profile serializes")
}
