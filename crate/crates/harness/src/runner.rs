//! Experiment execution: strategies, seeded runs, and axis sweeps.

use std::str::FromStr;

use rayon::prelude::*;

use splitsim_core::baselines::{self, BaselineResult};
use splitsim_core::channel::ChannelState;
use splitsim_core::error::{Error, Result};
use splitsim_core::ligd;
use splitsim_core::scenario::Scenario;

use crate::config::{Config, Overrides};
use crate::metrics::MetricsRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    DeviceOnly,
    EdgeOnly,
    ExhaustiveSplit,
    LiGd,
    ColdGd,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::DeviceOnly => "device_only",
            Strategy::EdgeOnly => "edge_only",
            Strategy::ExhaustiveSplit => "exhaustive_split",
            Strategy::LiGd => "li_gd",
            Strategy::ColdGd => "cold_gd",
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "device_only" => Ok(Strategy::DeviceOnly),
            "edge_only" => Ok(Strategy::EdgeOnly),
            "exhaustive_split" => Ok(Strategy::ExhaustiveSplit),
            "li_gd" => Ok(Strategy::LiGd),
            "cold_gd" => Ok(Strategy::ColdGd),
            other => Err(Error::Validation(format!("unknown strategy '{other}'"))),
        }
    }
}

/// Everything a row needs from one strategy run.
#[derive(Debug, Clone)]
pub struct StrategyOutcome {
    pub strategy: Strategy,
    pub sum_t: f64,
    pub sum_e: f64,
    pub hard_c: f64,
    pub hard_z: usize,
    pub gamma: f64,
    pub iterations: usize,
    pub per_user_delay: Vec<f64>,
}

fn outcome_from_baseline(strategy: Strategy, b: BaselineResult) -> StrategyOutcome {
    StrategyOutcome {
        strategy,
        sum_t: b.sum_t,
        sum_e: b.sum_e,
        hard_c: b.hard_c,
        hard_z: b.hard_z,
        gamma: b.gamma,
        iterations: 0,
        per_user_delay: b.breakdowns.iter().map(|x| x.t_total).collect(),
    }
}

pub fn run_strategy(sc: &Scenario, ch: &ChannelState, strategy: Strategy) -> Result<StrategyOutcome> {
    match strategy {
        Strategy::DeviceOnly => Ok(outcome_from_baseline(strategy, baselines::device_only(sc, ch)?)),
        Strategy::EdgeOnly => Ok(outcome_from_baseline(strategy, baselines::edge_only(sc, ch)?)),
        Strategy::ExhaustiveSplit => {
            Ok(outcome_from_baseline(strategy, baselines::exhaustive_split(sc, ch)?))
        }
        Strategy::LiGd | Strategy::ColdGd => {
            let out = if strategy == Strategy::LiGd {
                ligd::li_gd(sc, ch)?
            } else {
                ligd::cold_gd(sc, ch)?
            };
            let sum_t = out.hard.breakdowns.iter().map(|b| b.t_total).sum();
            let sum_e = out.hard.breakdowns.iter().map(|b| b.e_total).sum();
            let hard_c = out.hard.breakdowns.iter().map(|b| b.dct).sum();
            let hard_z = out
                .hard
                .breakdowns
                .iter()
                .zip(&sc.qoe)
                .filter(|(b, q)| b.t_total > q.q_seconds)
                .count();
            Ok(StrategyOutcome {
                strategy,
                sum_t,
                sum_e,
                hard_c,
                hard_z,
                gamma: out.hard.gamma,
                iterations: out.total_iters,
                per_user_delay: out.hard.breakdowns.iter().map(|b| b.t_total).collect(),
            })
        }
    }
}

/// Run one strategy on one seed. A QoE-threshold multiplier triggers the
/// two-pass protocol: measure the strategy's mean delay at the configured
/// deadlines, reset every deadline to `mult` times that mean, re-solve.
pub fn run_one(
    cfg: &Config,
    seed: u64,
    strategy: Strategy,
    ov: &Overrides,
    qoe_threshold_mult: Option<f64>,
) -> Result<StrategyOutcome> {
    let sc = cfg.materialize_with(seed, ov)?;
    let ch = sc.sample_channels(seed)?;
    let first = run_strategy(&sc, &ch, strategy)?;
    let Some(mult) = qoe_threshold_mult else {
        return Ok(first);
    };
    let mean_delay =
        first.per_user_delay.iter().sum::<f64>() / first.per_user_delay.len().max(1) as f64;
    let second = Overrides { q_seconds: Some(mult * mean_delay), ..ov.clone() };
    let sc2 = cfg.materialize_with(seed, &second)?;
    let ch2 = sc2.sample_channels(seed)?;
    run_strategy(&sc2, &ch2, strategy)
}

pub fn parse_strategies(names: &[String]) -> Result<Vec<Strategy>> {
    names.iter().map(|s| Strategy::from_str(s)).collect()
}

fn rows_for(
    cfg: &Config,
    scenario_id: &str,
    seed: u64,
    strategies: &[Strategy],
    baseline: Strategy,
    ov: &Overrides,
    qoe_threshold_mult: Option<f64>,
    hash: &str,
) -> Result<Vec<MetricsRow>> {
    let base = run_one(cfg, seed, baseline, ov, qoe_threshold_mult)?;
    strategies
        .iter()
        .map(|&strategy| {
            let out = if strategy == baseline {
                base.clone()
            } else {
                run_one(cfg, seed, strategy, ov, qoe_threshold_mult)?
            };
            Ok(MetricsRow {
                scenario: scenario_id.to_string(),
                seed,
                strategy: out.strategy.name().to_string(),
                sum_t_s: out.sum_t,
                sum_e_j: out.sum_e,
                hard_c_s: out.hard_c,
                hard_z: out.hard_z as u64,
                latency_speedup: base.sum_t / out.sum_t,
                energy_reduction: base.sum_e / out.sum_e,
                iterations: out.iterations as u64,
                config_hash: hash.to_string(),
            })
        })
        .collect()
}

/// Run every enabled strategy on every seed.
pub fn run(cfg: &Config) -> Result<Vec<MetricsRow>> {
    let strategies = parse_strategies(&cfg.strategies)?;
    let baseline = Strategy::from_str(&cfg.baseline)?;
    let hash = cfg.hash();
    let per_seed: Vec<Vec<MetricsRow>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            rows_for(cfg, &cfg.name, seed, &strategies, baseline, &Overrides::default(), None, &hash)
        })
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    QoeThreshold,
    Users,
    Subchannels,
    Workload,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::QoeThreshold => "qoe_threshold",
            Axis::Users => "users",
            Axis::Subchannels => "subchannels",
            Axis::Workload => "workload",
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qoe_threshold" => Ok(Axis::QoeThreshold),
            "users" => Ok(Axis::Users),
            "subchannels" => Ok(Axis::Subchannels),
            "workload" => Ok(Axis::Workload),
            other => Err(Error::Validation(format!(
                "unknown axis '{other}', expected qoe_threshold|users|subchannels|workload"
            ))),
        }
    }
}

/// Re-run the whole strategy set with one config field substituted per
/// value. All non-axis fields come from the base config bit-exactly; rows
/// echo the base config hash.
pub fn sweep(cfg: &Config, axis: Axis, values: &[f64]) -> Result<Vec<MetricsRow>> {
    let strategies = parse_strategies(&cfg.strategies)?;
    let baseline = Strategy::from_str(&cfg.baseline)?;
    let hash = cfg.hash();

    let points: Vec<(f64, u64)> = values
        .iter()
        .flat_map(|&v| cfg.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let rows: Vec<Vec<MetricsRow>> = points
        .par_iter()
        .map(|&(value, seed)| {
            let scenario_id = format!("{}/{}={}", cfg.name, axis.name(), value);
            let mut sub = cfg.clone();
            let mut ov = Overrides::default();
            let mut qoe_mult = None;
            match axis {
                Axis::QoeThreshold => qoe_mult = Some(value),
                Axis::Users => {
                    if value < 1.0 || value.fract() != 0.0 {
                        return Err(Error::Validation(format!(
                            "users axis needs positive integers, got {value}"
                        )));
                    }
                    sub.topology.n_users = value as usize;
                }
                Axis::Subchannels => {
                    if value < 1.0 || value.fract() != 0.0 {
                        return Err(Error::Validation(format!(
                            "subchannels axis needs positive integers, got {value}"
                        )));
                    }
                    sub.topology.n_subchannels = value as usize;
                }
                Axis::Workload => {
                    if !(value > 0.0) {
                        return Err(Error::Validation(format!(
                            "workload axis needs positive scales, got {value}"
                        )));
                    }
                    ov.workload_scale = value;
                }
            }
            rows_for(&sub, &scenario_id, seed, &strategies, baseline, &ov, qoe_mult, &hash)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}
