//! Comparison strategies and the exhaustive grid oracle.
//!
//! The fixed-resource rule shared by the edge-only and per-user-best-split
//! baselines: maximum transmit powers, subchannels handed out round-robin
//! by gain rank within each AP, and the server's unit budget split equally
//! among an AP's users (clamped to the per-user box). The oracle scores the
//! hard (rounded) objective so comparisons against the optimizer include
//! rounding loss.

use rayon::prelude::*;

use crate::channel::ChannelState;
use crate::costs::CostBreakdown;
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::utility::{utility_hard, HardEval, RoundedAllocation, Weights};

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub name: &'static str,
    pub breakdowns: Vec<CostBreakdown>,
    pub sum_t: f64,
    pub sum_e: f64,
    /// Hard sum of delayed completion times.
    pub hard_c: f64,
    /// Exact count of users past their deadline.
    pub hard_z: usize,
    /// Weighted objective with hard QoE terms.
    pub gamma: f64,
}

fn result_from_eval(name: &'static str, sc: &Scenario, eval: HardEval) -> BaselineResult {
    let sum_t = eval.breakdowns.iter().map(|b| b.t_total).sum();
    let sum_e = eval.breakdowns.iter().map(|b| b.e_total).sum();
    let hard_c = eval.breakdowns.iter().map(|b| b.dct).sum();
    let hard_z = eval
        .breakdowns
        .iter()
        .zip(&sc.qoe)
        .filter(|(b, q)| b.t_total > q.q_seconds)
        .count();
    BaselineResult { name, breakdowns: eval.breakdowns, sum_t, sum_e, hard_c, hard_z, gamma: eval.gamma }
}

fn no_transmission_assign(sc: &Scenario) -> RoundedAllocation {
    let u = sc.n_users();
    RoundedAllocation {
        up_sub: vec![None; u],
        down_sub: vec![None; u],
        p_up: sc.devices.iter().map(|d| d.p_min_w).collect(),
        p_down: vec![sc.server.p_min_w; u],
        r: vec![sc.server.r_min; u],
    }
}

/// Run the entire model on every device. Channel-independent by
/// construction.
pub fn device_only(sc: &Scenario, ch: &ChannelState) -> Result<BaselineResult> {
    let f = sc.profile.layer_count();
    let assign = no_transmission_assign(sc);
    let eval = utility_hard(sc, ch, &vec![f; sc.n_users()], &assign, &sc.weights)?
        .expect("device-only transmits nothing");
    Ok(result_from_eval("device_only", sc, eval))
}

/// Round-robin subchannels by descending average gain within each AP.
fn round_robin_subchannels(
    sc: &Scenario,
    ch: &ChannelState,
    avg_gain: impl Fn(usize, usize) -> f64,
) -> Vec<Option<usize>> {
    let m = sc.topology.n_subchannels;
    let mut sub = vec![None; sc.n_users()];
    for n in 0..sc.topology.n_aps {
        let mut members: Vec<usize> =
            (0..sc.n_users()).filter(|&i| ch.assoc[i] == n).collect();
        members.sort_by(|&a, &b| {
            avg_gain(n, b).partial_cmp(&avg_gain(n, a)).unwrap().then(a.cmp(&b))
        });
        for (rank, &i) in members.iter().enumerate() {
            sub[i] = Some(rank % m);
        }
    }
    sub
}

/// The fixed-resource allocation rule shared by the non-optimizing
/// offloading baselines.
pub fn fixed_resource_assign(sc: &Scenario, ch: &ChannelState) -> RoundedAllocation {
    let m = sc.topology.n_subchannels;
    let up_sub = round_robin_subchannels(sc, ch, |n, i| {
        (0..m).map(|sub| ch.h_up(n, i, sub)).sum::<f64>() / m as f64
    });
    let down_sub = round_robin_subchannels(sc, ch, |n, i| {
        (0..m).map(|sub| ch.h_down(n, i, sub)).sum::<f64>() / m as f64
    });
    let mut users_per_ap = vec![0usize; sc.topology.n_aps];
    for i in 0..sc.n_users() {
        users_per_ap[ch.assoc[i]] += 1;
    }
    let r: Vec<f64> = (0..sc.n_users())
        .map(|i| {
            let share = sc.server.r_max / users_per_ap[ch.assoc[i]].max(1) as f64;
            share.clamp(sc.server.r_min, sc.server.r_max)
        })
        .collect();
    RoundedAllocation {
        up_sub,
        down_sub,
        p_up: sc.devices.iter().map(|d| d.p_max_w).collect(),
        p_down: vec![sc.server.p_max_w; sc.n_users()],
        r,
    }
}

/// Offload the entire model from every device under the fixed-resource
/// rule.
pub fn edge_only(sc: &Scenario, ch: &ChannelState) -> Result<BaselineResult> {
    let assign = fixed_resource_assign(sc, ch);
    let eval = utility_hard(sc, ch, &vec![0; sc.n_users()], &assign, &sc.weights)?
        .ok_or_else(|| Error::NonFinite("edge-only baseline hit a zero rate".into()))?;
    Ok(result_from_eval("edge_only", sc, eval))
}

/// Per-user latency-best split under the fixed-resource rule: each user
/// independently scans every split against the rates it would see with all
/// users transmitting, with no joint optimization.
pub fn exhaustive_split(sc: &Scenario, ch: &ChannelState) -> Result<BaselineResult> {
    let assign = fixed_resource_assign(sc, ch);
    let f = sc.profile.layer_count();
    let offload = sc.offload_mask(ch);

    // Reference rates with everyone transmitting (the k = 0 arrangement).
    let all_zero = vec![0usize; sc.n_users()];
    let reference = utility_hard(sc, ch, &all_zero, &assign, &sc.weights)?
        .ok_or_else(|| Error::NonFinite("fixed-resource baseline hit a zero rate".into()))?;

    let mut splits = vec![f; sc.n_users()];
    for i in 0..sc.n_users() {
        if !offload[i] {
            continue;
        }
        let b = &reference.breakdowns[i];
        let rate_up = if b.t_up > 0.0 { sc.profile.intermediate_bits(0)? / b.t_up } else { 0.0 };
        let rate_down = if b.t_down > 0.0 { sc.profile.result_bits / b.t_down } else { 0.0 };
        let mut best = (f64::MAX, f);
        for &k in &sc.profile.split_points {
            let t = crate::costs::total_delay(
                &sc.profile,
                k,
                &sc.devices[i],
                &sc.server,
                assign.r[i],
                rate_up,
                rate_down,
            )?;
            if let Some(t) = t.finite() {
                if t < best.0 {
                    best = (t, k);
                }
            }
        }
        splits[i] = best.1;
    }

    let eval = utility_hard(sc, ch, &splits, &assign, &sc.weights)?
        .ok_or_else(|| Error::NonFinite("fixed-resource baseline hit a zero rate".into()))?;
    Ok(result_from_eval("exhaustive_split", sc, eval))
}

/// Grid resolution for the oracle's continuous variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grids {
    pub p_levels: usize,
    pub p_down_levels: usize,
    pub r_levels: usize,
}

impl Default for Grids {
    fn default() -> Self {
        Grids { p_levels: 5, p_down_levels: 5, r_levels: 5 }
    }
}

fn grid_values(lo: f64, hi: f64, levels: usize) -> Vec<f64> {
    if levels <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..levels).map(|i| lo + (hi - lo) * i as f64 / (levels - 1) as f64).collect()
}

pub const DEFAULT_ORACLE_BUDGET: u128 = 10_000_000;

#[derive(Debug, Clone)]
pub struct BruteForceBest {
    pub splits: Vec<usize>,
    pub assign: RoundedAllocation,
    pub gamma: f64,
    pub evaluations: u128,
}

/// Exhaustive enumeration over per-user splits, integer subchannel
/// assignments respecting the cluster cap, and gridded powers and compute
/// units, scoring the hard objective. Refuses with a size estimate when the
/// search would exceed the budget.
pub fn brute_force(
    sc: &Scenario,
    ch: &ChannelState,
    grids: &Grids,
    budget: u128,
) -> Result<BruteForceBest> {
    sc.validate()?;
    let u = sc.n_users();
    let m = sc.topology.n_subchannels as u128;
    let f = sc.profile.layer_count();
    let offload = sc.offload_mask(ch);
    let n_splits = sc.profile.split_points.len();

    // Upper-bound estimate ignoring cap pruning.
    let mut estimate: u128 = 0;
    let mut split_vectors: Vec<Vec<usize>> = Vec::new();
    let mut stack = vec![0usize; u];
    enumerate_splits(sc, &mut stack, 0, &mut split_vectors);
    for splits in &split_vectors {
        let t = (0..u).filter(|&i| offload[i] && splits[i] < f).count() as u32;
        let per = m
            .pow(2 * t)
            .saturating_mul((grids.p_levels as u128).pow(t))
            .saturating_mul((grids.p_down_levels as u128).pow(t))
            .saturating_mul((grids.r_levels as u128).pow(t));
        estimate = estimate.saturating_add(per.max(1));
    }
    if estimate > budget {
        return Err(Error::BudgetExceeded { estimate, budget });
    }
    let _ = n_splits;

    let weights = sc.weights;
    let results: Vec<Option<(f64, Vec<usize>, RoundedAllocation, u128)>> = split_vectors
        .par_iter()
        .map(|splits| search_split_vector(sc, ch, splits, &offload, grids, &weights))
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<(f64, Vec<usize>, RoundedAllocation)> = None;
    let mut evaluations: u128 = 0;
    for r in results.into_iter().flatten() {
        let (gamma, splits, assign, evals) = r;
        evaluations += evals;
        if best.as_ref().map_or(true, |(g, _, _)| gamma < *g) {
            best = Some((gamma, splits, assign));
        }
    }
    let (gamma, splits, assign) =
        best.ok_or_else(|| Error::NonFinite("oracle found no feasible point".into()))?;
    Ok(BruteForceBest { splits, assign, gamma, evaluations })
}

fn enumerate_splits(sc: &Scenario, stack: &mut Vec<usize>, i: usize, out: &mut Vec<Vec<usize>>) {
    if i == stack.len() {
        out.push(stack.clone());
        return;
    }
    for &k in &sc.profile.split_points {
        stack[i] = k;
        enumerate_splits(sc, stack, i + 1, out);
    }
}

fn search_split_vector(
    sc: &Scenario,
    ch: &ChannelState,
    splits: &[usize],
    offload: &[bool],
    grids: &Grids,
    weights: &Weights,
) -> Result<Option<(f64, Vec<usize>, RoundedAllocation, u128)>> {
    let u = sc.n_users();
    let m = sc.topology.n_subchannels;
    let f = sc.profile.layer_count();
    let cap = sc.topology.cluster_cap;
    let transmitting: Vec<usize> =
        (0..u).filter(|&i| offload[i] && splits[i] < f).collect();

    let mut assign = no_transmission_assign(sc);
    let mut best: Option<(f64, RoundedAllocation)> = None;
    let mut evals: u128 = 0;

    // Depth-first over uplink assignments with cap pruning, then downlink,
    // then the power and resource grids.
    fn assign_dim(
        sc: &Scenario,
        ch: &ChannelState,
        splits: &[usize],
        transmitting: &[usize],
        grids: &Grids,
        weights: &Weights,
        assign: &mut RoundedAllocation,
        depth: usize,
        uplink: bool,
        cap: usize,
        m: usize,
        best: &mut Option<(f64, RoundedAllocation)>,
        evals: &mut u128,
    ) -> Result<()> {
        if depth == transmitting.len() {
            if uplink {
                assign_dim(
                    sc, ch, splits, transmitting, grids, weights, assign, 0, false, cap, m,
                    best, evals,
                )?;
            } else {
                grid_dim(sc, ch, splits, transmitting, grids, weights, assign, 0, best, evals)?;
            }
            return Ok(());
        }
        let user = transmitting[depth];
        let n = ch.assoc[user];
        for sub in 0..m {
            let count = transmitting[..depth]
                .iter()
                .filter(|&&t| {
                    ch.assoc[t] == n
                        && (if uplink { assign.up_sub[t] } else { assign.down_sub[t] })
                            == Some(sub)
                })
                .count();
            if count >= cap {
                continue;
            }
            if uplink {
                assign.up_sub[user] = Some(sub);
            } else {
                assign.down_sub[user] = Some(sub);
            }
            assign_dim(
                sc,
                ch,
                splits,
                transmitting,
                grids,
                weights,
                assign,
                depth + 1,
                uplink,
                cap,
                m,
                best,
                evals,
            )?;
        }
        if uplink {
            assign.up_sub[user] = None;
        } else {
            assign.down_sub[user] = None;
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn grid_dim(
        sc: &Scenario,
        ch: &ChannelState,
        splits: &[usize],
        transmitting: &[usize],
        grids: &Grids,
        weights: &Weights,
        assign: &mut RoundedAllocation,
        depth: usize,
        best: &mut Option<(f64, RoundedAllocation)>,
        evals: &mut u128,
    ) -> Result<()> {
        if depth == transmitting.len() {
            *evals += 1;
            if let Some(eval) = utility_hard(sc, ch, splits, assign, weights)? {
                if best.as_ref().map_or(true, |(g, _)| eval.gamma < *g) {
                    *best = Some((eval.gamma, assign.clone()));
                }
            }
            return Ok(());
        }
        let user = transmitting[depth];
        let d = &sc.devices[user];
        for p in grid_values(d.p_min_w, d.p_max_w, grids.p_levels) {
            for pd in grid_values(sc.server.p_min_w, sc.server.p_max_w, grids.p_down_levels) {
                for r in grid_values(sc.server.r_min, sc.server.r_max, grids.r_levels) {
                    assign.p_up[user] = p;
                    assign.p_down[user] = pd;
                    assign.r[user] = r;
                    grid_dim(
                        sc,
                        ch,
                        splits,
                        transmitting,
                        grids,
                        weights,
                        assign,
                        depth + 1,
                        best,
                        evals,
                    )?;
                }
            }
        }
        Ok(())
    }

    assign_dim(
        sc,
        ch,
        splits,
        &transmitting,
        grids,
        weights,
        &mut assign,
        0,
        true,
        cap,
        m,
        &mut best,
        &mut evals,
    )?;
    Ok(best.map(|(gamma, assign)| (gamma, splits.to_vec(), assign, evals)))
}
