//! A scenario bundles everything static about one experiment: topology,
//! model profile, per-user device and QoE parameters, the shared server
//! spec, objective weights, and optimizer parameters. Channel realizations
//! are sampled separately per seed.

use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelState, Topology};
use crate::costs::{DeviceSpec, QoESpec, ServerSpec};
use crate::error::{Error, Result};
use crate::ligd::GdParams;
use crate::profiles::ModelProfile;
use crate::utility::Weights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub topology: Topology,
    pub profile: ModelProfile,
    /// One spec per user.
    pub devices: Vec<DeviceSpec>,
    pub server: ServerSpec,
    /// One deadline/steepness pair per user.
    pub qoe: Vec<QoESpec>,
    /// Scale applied to the soft exceed-count inside the objective.
    pub z_scale: f64,
    pub weights: Weights,
    /// Optional per-user weight overrides; defaults to the global triple.
    pub per_user_weights: Option<Vec<Weights>>,
    pub gd: GdParams,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        let u = self.topology.n_users;
        if self.devices.len() != u {
            return Err(Error::Validation(format!(
                "expected {} device specs, got {}",
                u,
                self.devices.len()
            )));
        }
        if self.qoe.len() != u {
            return Err(Error::Validation(format!(
                "expected {} QoE specs, got {}",
                u,
                self.qoe.len()
            )));
        }
        for d in &self.devices {
            d.validate()?;
        }
        self.server.validate()?;
        for q in &self.qoe {
            q.validate()?;
        }
        self.weights.validate()?;
        if let Some(pw) = &self.per_user_weights {
            if pw.len() != u {
                return Err(Error::Validation("per-user weights length mismatch".into()));
            }
            for w in pw {
                w.validate()?;
            }
        }
        if !(self.z_scale >= 0.0) {
            return Err(Error::Validation("z_scale must be nonnegative".into()));
        }
        self.gd.validate()?;
        Ok(())
    }

    pub fn n_users(&self) -> usize {
        self.topology.n_users
    }

    pub fn user_weights(&self, i: usize) -> Weights {
        match &self.per_user_weights {
            Some(pw) => pw[i],
            None => self.weights,
        }
    }

    /// Users that can offload at all: SIC decodability at maximum power on
    /// their best subchannel. Devices failing this run the whole model
    /// locally and are excluded from the optimization variables.
    pub fn offload_mask(&self, ch: &ChannelState) -> Vec<bool> {
        (0..self.n_users())
            .map(|i| {
                channel::sic_feasible(
                    &self.topology,
                    ch,
                    i,
                    self.devices[i].p_max_w,
                    self.server.p_max_w,
                )
            })
            .collect()
    }

    pub fn sample_channels(&self, seed: u64) -> Result<ChannelState> {
        channel::sample_channels(&self.topology, seed)
    }
}
