//! Optimizer-versus-oracle gap check on small instances.

use splitsim_core::baselines::{brute_force, Grids};
use splitsim_core::error::Result;
use splitsim_core::ligd;

use crate::config::Config;

#[derive(Debug, Clone)]
pub struct OracleSeedReport {
    pub seed: u64,
    pub oracle_gamma: f64,
    pub optimizer_gamma: f64,
    /// (optimizer - oracle) / |oracle|; negative when the optimizer's
    /// continuous powers beat the oracle's grid.
    pub gap: f64,
    pub evaluations: u128,
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub per_seed: Vec<OracleSeedReport>,
    pub worst_gap: f64,
    pub bound: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.worst_gap <= self.bound
    }
}

pub fn oracle_check(cfg: &Config) -> Result<OracleReport> {
    let grids = Grids {
        p_levels: cfg.oracle.p_levels,
        p_down_levels: cfg.oracle.p_down_levels,
        r_levels: cfg.oracle.r_levels,
    };
    let mut per_seed = Vec::new();
    let mut worst = f64::MIN;
    for &seed in &cfg.seeds {
        let sc = cfg.materialize(seed)?;
        let ch = sc.sample_channels(seed)?;
        let oracle = brute_force(&sc, &ch, &grids, cfg.oracle.budget as u128)?;
        let opt = ligd::li_gd(&sc, &ch)?;
        let gap = (opt.hard.gamma - oracle.gamma) / oracle.gamma.abs();
        worst = worst.max(gap);
        per_seed.push(OracleSeedReport {
            seed,
            oracle_gamma: oracle.gamma,
            optimizer_gamma: opt.hard.gamma,
            gap,
            evaluations: oracle.evaluations,
        });
    }
    Ok(OracleReport { per_seed, worst_gap: worst, bound: cfg.oracle.gap_bound })
}
