//! The weighted objective over relaxed allocation variables, its analytic
//! gradient, and feasibility projection.
//!
//! For a candidate split assignment the objective sums, per user, the
//! weighted total delay, the weighted energy-plus-resource penalty, and the
//! weighted soft QoE terms (relaxed delayed completion time plus the soft
//! exceed indicator). Subchannel shares are relaxed from {0,1} to [0,1],
//! which makes the whole objective differentiable; gradients account for
//! each share twice, once as the owner's bandwidth factor and once inside
//! every other user's interference sum.

use serde::{Deserialize, Serialize};

use crate::channel::{self, ChannelState};
use crate::costs::{self, CostBreakdown};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

const LN2: f64 = std::f64::consts::LN_2;

/// Objective weights for delay, resource (energy + compute penalty), and
/// QoE. They must sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w_t: f64,
    pub w_r: f64,
    pub w_q: f64,
}

impl Weights {
    pub fn new(w_t: f64, w_r: f64, w_q: f64) -> Result<Self> {
        let w = Weights { w_t, w_r, w_q };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w_t < 0.0 || self.w_r < 0.0 || self.w_q < 0.0 {
            return Err(Error::Validation("weights must be nonnegative".into()));
        }
        let sum = self.w_t + self.w_r + self.w_q;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("weights must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

/// Relaxed per-user decision variables: fractional subchannel shares over
/// the associated AP's subchannels (each simplex-constrained), transmit
/// powers, and edge compute units.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedAllocation {
    /// beta_up[i][m] in [0, 1], rows summing to 1.
    pub beta_up: Vec<Vec<f64>>,
    pub beta_down: Vec<Vec<f64>>,
    /// Device transmit power per user, W.
    pub p_up: Vec<f64>,
    /// AP transmit power toward each user, W.
    pub p_down: Vec<f64>,
    /// Edge compute units per user.
    pub r: Vec<f64>,
}

impl RelaxedAllocation {
    pub fn uniform(n_users: usize, m: usize, p_up: f64, p_down: f64, r: f64) -> Self {
        RelaxedAllocation {
            beta_up: vec![vec![1.0 / m as f64; m]; n_users],
            beta_down: vec![vec![1.0 / m as f64; m]; n_users],
            p_up: vec![p_up; n_users],
            p_down: vec![p_down; n_users],
            r: vec![r; n_users],
        }
    }

    /// Information-free feasible start: uniform shares, midpoint powers and
    /// compute units.
    pub fn cold_start(sc: &Scenario) -> Self {
        let u = sc.n_users();
        let m = sc.topology.n_subchannels;
        let mut a = RelaxedAllocation::uniform(u, m, 0.0, 0.0, 0.0);
        for i in 0..u {
            a.p_up[i] = 0.5 * (sc.devices[i].p_min_w + sc.devices[i].p_max_w);
            a.p_down[i] = 0.5 * (sc.server.p_min_w + sc.server.p_max_w);
            a.r[i] = 0.5 * (sc.server.r_min + sc.server.r_max);
        }
        a
    }

    pub fn n_users(&self) -> usize {
        self.p_up.len()
    }

    pub fn n_subchannels(&self) -> usize {
        self.beta_up.first().map_or(0, Vec::len)
    }

    /// Feasibility within a small slack so that finite-difference probes of
    /// the objective remain valid points.
    pub fn validate(&self, sc: &Scenario) -> Result<()> {
        let u = sc.n_users();
        let m = sc.topology.n_subchannels;
        if self.p_up.len() != u
            || self.p_down.len() != u
            || self.r.len() != u
            || self.beta_up.len() != u
            || self.beta_down.len() != u
        {
            return Err(Error::Validation("allocation has wrong user count".into()));
        }
        for i in 0..u {
            if self.beta_up[i].len() != m || self.beta_down[i].len() != m {
                return Err(Error::Validation("allocation has wrong subchannel count".into()));
            }
            for &b in self.beta_up[i].iter().chain(&self.beta_down[i]) {
                if !(-1e-4..=1.0 + 1e-4).contains(&b) || !b.is_finite() {
                    return Err(Error::Validation(format!("share out of [0,1]: {b}")));
                }
            }
            for (sum, dir) in [
                (self.beta_up[i].iter().sum::<f64>(), "uplink"),
                (self.beta_down[i].iter().sum::<f64>(), "downlink"),
            ] {
                if (sum - 1.0).abs() > 1e-3 {
                    return Err(Error::Validation(format!(
                        "user {i} {dir} shares sum to {sum}, expected 1"
                    )));
                }
            }
            let d = &sc.devices[i];
            let span_p = (d.p_max_w - d.p_min_w).max(d.p_max_w) * 1e-4;
            if !(d.p_min_w - span_p..=d.p_max_w + span_p).contains(&self.p_up[i]) {
                return Err(Error::Validation(format!(
                    "user {i} uplink power {} outside [{}, {}]",
                    self.p_up[i], d.p_min_w, d.p_max_w
                )));
            }
            let s = &sc.server;
            let span_pd = (s.p_max_w - s.p_min_w).max(s.p_max_w) * 1e-4;
            if !(s.p_min_w - span_pd..=s.p_max_w + span_pd).contains(&self.p_down[i]) {
                return Err(Error::Validation(format!(
                    "user {i} downlink power {} outside [{}, {}]",
                    self.p_down[i], s.p_min_w, s.p_max_w
                )));
            }
            let span_r = (s.r_max - s.r_min).max(1.0) * 1e-4;
            if !(s.r_min - span_r..=s.r_max + span_r).contains(&self.r[i]) {
                return Err(Error::Validation(format!(
                    "user {i} compute units {} outside [{}, {}]",
                    self.r[i], s.r_min, s.r_max
                )));
            }
        }
        Ok(())
    }

    /// One descent step: x - eta * g, not projected.
    pub fn step(&self, g: &Gradient, eta: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n_users() {
            for m in 0..self.beta_up[i].len() {
                out.beta_up[i][m] -= eta * g.beta_up[i][m];
                out.beta_down[i][m] -= eta * g.beta_down[i][m];
            }
            out.p_up[i] -= eta * g.p_up[i];
            out.p_down[i] -= eta * g.p_down[i];
            out.r[i] -= eta * g.r[i];
        }
        out
    }

    /// Largest absolute per-coordinate difference, used as a stopping
    /// criterion.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.to_flat()
            .iter()
            .zip(other.to_flat())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Flatten in the order: uplink shares, downlink shares, uplink powers,
    /// downlink powers, compute units.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for row in &self.beta_up {
            v.extend_from_slice(row);
        }
        for row in &self.beta_down {
            v.extend_from_slice(row);
        }
        v.extend_from_slice(&self.p_up);
        v.extend_from_slice(&self.p_down);
        v.extend_from_slice(&self.r);
        v
    }

    pub fn from_flat(n_users: usize, m: usize, flat: &[f64]) -> Self {
        assert_eq!(flat.len(), 2 * n_users * m + 3 * n_users);
        let mut it = flat.iter().copied();
        let mut take_rows = |rows: usize, cols: usize| -> Vec<Vec<f64>> {
            (0..rows).map(|_| (0..cols).map(|_| it.next().unwrap()).collect()).collect()
        };
        let beta_up = take_rows(n_users, m);
        let beta_down = take_rows(n_users, m);
        let p_up: Vec<f64> = (0..n_users).map(|_| it.next().unwrap()).collect();
        let p_down: Vec<f64> = (0..n_users).map(|_| it.next().unwrap()).collect();
        let r: Vec<f64> = (0..n_users).map(|_| it.next().unwrap()).collect();
        RelaxedAllocation { beta_up, beta_down, p_up, p_down, r }
    }
}

/// Gradient of the objective, shaped like the allocation it differentiates.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub beta_up: Vec<Vec<f64>>,
    pub beta_down: Vec<Vec<f64>>,
    pub p_up: Vec<f64>,
    pub p_down: Vec<f64>,
    pub r: Vec<f64>,
}

impl Gradient {
    pub fn zeros(n_users: usize, m: usize) -> Self {
        Gradient {
            beta_up: vec![vec![0.0; m]; n_users],
            beta_down: vec![vec![0.0; m]; n_users],
            p_up: vec![0.0; n_users],
            p_down: vec![0.0; n_users],
            r: vec![0.0; n_users],
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for row in &self.beta_up {
            v.extend_from_slice(row);
        }
        for row in &self.beta_down {
            v.extend_from_slice(row);
        }
        v.extend_from_slice(&self.p_up);
        v.extend_from_slice(&self.p_down);
        v.extend_from_slice(&self.r);
        v
    }

    pub fn norm(&self) -> f64 {
        self.to_flat().iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Objective value with per-user terms and full cost breakdowns.
#[derive(Debug, Clone)]
pub struct UtilityValue {
    pub gamma: f64,
    pub per_user: Vec<f64>,
    pub breakdowns: Vec<CostBreakdown>,
}

/// Per-user evaluation context shared by the objective and its gradient.
struct UserEval {
    /// Effective split after pinning non-decodable devices to full device.
    k_eff: usize,
    /// Whether this user transmits (offloads and passes SIC feasibility).
    transmits: bool,
    /// Whether this user's compute units are a live variable.
    owns_r: bool,
    w_bits: f64,
    rate_up: f64,
    rate_down: f64,
    sinr_up: Vec<f64>,
    denom_up: Vec<f64>,
    sinr_down: Vec<f64>,
    denom_down: Vec<f64>,
    breakdown: CostBreakdown,
    utility: f64,
}

fn weights_for(sc: &Scenario, i: usize, global: &Weights) -> Weights {
    match &sc.per_user_weights {
        Some(pw) => pw[i],
        None => *global,
    }
}

fn build_user_evals(
    sc: &Scenario,
    ch: &ChannelState,
    splits: &[usize],
    alloc: &RelaxedAllocation,
    weights: &Weights,
) -> Result<Vec<UserEval>> {
    let u = sc.n_users();
    let m = sc.topology.n_subchannels;
    let f = sc.profile.layer_count();
    let offload = sc.offload_mask(ch);
    let active: Vec<bool> = (0..u).map(|i| offload[i] && splits[i] < f).collect();

    let mut evals = Vec::with_capacity(u);
    for i in 0..u {
        let k_eff = if offload[i] { splits[i] } else { f };
        let transmits = active[i];
        let owns_r = offload[i];
        let r_eff = if owns_r { alloc.r[i] } else { sc.server.r_min };

        let (mut rate_up, mut rate_down) = (0.0, 0.0);
        let mut sinr_up = vec![0.0; m];
        let mut denom_up = vec![0.0; m];
        let mut sinr_down = vec![0.0; m];
        let mut denom_down = vec![0.0; m];
        if transmits {
            let bw_up = sc.topology.subchannel_up_hz();
            let bw_down = sc.topology.subchannel_down_hz();
            for sub in 0..m {
                denom_up[sub] =
                    channel::uplink_denominator(&sc.topology, ch, alloc, &active, i, sub);
                sinr_up[sub] = alloc.p_up[i] * ch.h_up(ch.assoc[i], i, sub) / denom_up[sub];
                rate_up += alloc.beta_up[i][sub] * bw_up * channel::log2_1p(sinr_up[sub]);
                denom_down[sub] =
                    channel::downlink_denominator(&sc.topology, ch, alloc, &active, i, sub);
                sinr_down[sub] =
                    alloc.p_down[i] * ch.h_down(ch.assoc[i], i, sub) / denom_down[sub];
                rate_down += alloc.beta_down[i][sub] * bw_down * channel::log2_1p(sinr_down[sub]);
            }
        }

        let breakdown = costs::cost_breakdown(
            &sc.profile,
            k_eff,
            &sc.devices[i],
            &sc.server,
            &sc.qoe[i],
            r_eff,
            alloc.p_up[i],
            alloc.p_down[i],
            rate_up,
            rate_down,
        )?
        .map_err(|_| {
            Error::NonFinite(format!("user {i}: zero rate under a positive payload"))
        })?;

        let w = weights_for(sc, i, weights);
        let soft_dct = costs::dct_soft(breakdown.t_total, &sc.qoe[i]);
        let utility = w.w_t * breakdown.t_total
            + w.w_r * (breakdown.e_total + breakdown.resource_penalty)
            + w.w_q * (soft_dct + breakdown.soft_indicator * sc.z_scale);

        evals.push(UserEval {
            k_eff,
            transmits,
            owns_r,
            w_bits: sc.profile.intermediate_bits(k_eff)?,
            rate_up,
            rate_down,
            sinr_up,
            denom_up,
            sinr_down,
            denom_down,
            breakdown,
            utility,
        });
    }
    Ok(evals)
}

/// Evaluate the relaxed objective. The allocation must be feasible.
pub fn utility(
    sc: &Scenario,
    ch: &ChannelState,
    splits: &[usize],
    alloc: &RelaxedAllocation,
    weights: &Weights,
) -> Result<UtilityValue> {
    alloc.validate(sc)?;
    utility_unchecked(sc, ch, splits, alloc, weights)
}

/// Evaluate without the feasibility check. Finite-difference probes use
/// this to step individual coordinates off the simplex.
pub fn utility_unchecked(
    sc: &Scenario,
    ch: &ChannelState,
    splits: &[usize],
    alloc: &RelaxedAllocation,
    weights: &Weights,
) -> Result<UtilityValue> {
    let evals = build_user_evals(sc, ch, splits, alloc, weights)?;
    let per_user: Vec<f64> = evals.iter().map(|e| e.utility).collect();
    let gamma: f64 = per_user.iter().sum();
    if !gamma.is_finite() {
        return Err(Error::NonFinite(format!("objective evaluated to {gamma}")));
    }
    Ok(UtilityValue { gamma, per_user, breakdowns: evals.into_iter().map(|e| e.breakdown).collect() })
}

/// Analytic gradient of the relaxed objective over every allocation
/// coordinate. Exact at interior points; boundary handling is left to the
/// projection step of the optimizer.
pub fn gradient(
    sc: &Scenario,
    ch: &ChannelState,
    splits: &[usize],
    alloc: &RelaxedAllocation,
    weights: &Weights,
) -> Result<Gradient> {
    let u = sc.n_users();
    let m = sc.topology.n_subchannels;
    let evals = build_user_evals(sc, ch, splits, alloc, weights)?;
    let active: Vec<bool> = evals.iter().map(|e| e.transmits).collect();
    let mut g = Gradient::zeros(u, m);

    let bw_up = sc.topology.subchannel_up_hz();
    let bw_down = sc.topology.subchannel_down_hz();
    let srv = &sc.server;

    for i in 0..u {
        let e = &evals[i];
        let w = weights_for(sc, i, weights);
        let qoe = &sc.qoe[i];

        if !e.owns_r {
            continue; // pinned to full device: constant contribution
        }

        // Sensitivity of this user's utility to its total delay, including
        // the sigmoid chain through both soft QoE terms.
        let s = e.breakdown.soft_indicator;
        let ds_dt = costs::soft_indicator_dt(e.breakdown.t_total, qoe);
        let du_dt = w.w_t
            + w.w_q * (s + (e.breakdown.t_total - qoe.q_seconds) * ds_dt + sc.z_scale * ds_dt);

        // Compute units: delay and energy through the compensation
        // function, plus the resource penalty itself.
        let lam = costs::lambda(alloc.r[i], srv.theta);
        let lam_p = costs::lambda_prime(alloc.r[i], srv.theta);
        let (_, fe) = sc.profile.cumulative_workload(e.k_eff)?;
        let dt_dr = if fe > 0.0 { -fe * lam_p / (lam * lam * srv.unit_flops) } else { 0.0 };
        let de_dr = if fe > 0.0 {
            2.0 * srv.kappa * srv.unit_flops.powi(2) * srv.cycles_per_bit * fe * lam * lam_p
        } else {
            0.0
        };
        g.r[i] += du_dt * dt_dr + w.w_r * (de_dr + lam_p);

        if !e.transmits {
            continue;
        }

        // Sensitivity to this user's total rates: delay term plus the
        // transmit-energy term riding on the same payload-over-rate factor.
        let du_drate_up = -(e.w_bits / (e.rate_up * e.rate_up)) * (du_dt + w.w_r * alloc.p_up[i]);
        let du_drate_down = -(sc.profile.result_bits / (e.rate_down * e.rate_down))
            * (du_dt + w.w_r * alloc.p_down[i]);

        // Direct transmit-energy terms: energy is power times time on air.
        g.p_up[i] += w.w_r * e.w_bits / e.rate_up;
        g.p_down[i] += w.w_r * sc.profile.result_bits / e.rate_down;

        let n_ap = ch.assoc[i];
        for sub in 0..m {
            // Own share scales the subchannel's contribution linearly.
            let log_up = channel::log2_1p(e.sinr_up[sub]);
            g.beta_up[i][sub] += du_drate_up * bw_up * log_up;
            let log_down = channel::log2_1p(e.sinr_down[sub]);
            g.beta_down[i][sub] += du_drate_down * bw_down * log_down;

            // Own power raises the subchannel SINR.
            let slope_up = alloc.beta_up[i][sub] * bw_up / ((1.0 + e.sinr_up[sub]) * LN2);
            g.p_up[i] += du_drate_up * slope_up * ch.h_up(n_ap, i, sub) / e.denom_up[sub];
            let slope_down =
                alloc.beta_down[i][sub] * bw_down / ((1.0 + e.sinr_down[sub]) * LN2);
            g.p_down[i] +=
                du_drate_down * slope_down * ch.h_down(n_ap, i, sub) / e.denom_down[sub];

            // Every interferer's share and power lower this user's SINR.
            let common_up = -du_drate_up * slope_up * e.sinr_up[sub] / e.denom_up[sub];
            channel::for_each_uplink_interferer(ch, &active, i, sub, |t, gain| {
                g.beta_up[t][sub] += common_up * alloc.p_up[t] * gain;
                g.p_up[t] += common_up * alloc.beta_up[t][sub] * gain;
            });
            let common_down = -du_drate_down * slope_down * e.sinr_down[sub] / e.denom_down[sub];
            channel::for_each_downlink_interferer(ch, &active, i, sub, |y, gain| {
                g.beta_down[y][sub] += common_down * alloc.p_down[y] * gain;
                g.p_down[y] += common_down * alloc.beta_down[y][sub] * gain;
            });
        }
    }
    Ok(g)
}

/// Euclidean projection of a vector onto the probability simplex.
pub fn simplex_project(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite shares"));
    let mut css = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        css += uj;
        let t = (css - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// Project an arbitrary point onto the feasible set: each user's share
/// vectors onto the simplex, powers and compute units onto their boxes.
/// Idempotent.
pub fn project(sc: &Scenario, alloc: &RelaxedAllocation) -> RelaxedAllocation {
    let mut out = alloc.clone();
    for i in 0..alloc.n_users() {
        out.beta_up[i] = simplex_project(&alloc.beta_up[i]);
        out.beta_down[i] = simplex_project(&alloc.beta_down[i]);
        let d = &sc.devices[i];
        out.p_up[i] = alloc.p_up[i].clamp(d.p_min_w, d.p_max_w);
        out.p_down[i] = alloc.p_down[i].clamp(sc.server.p_min_w, sc.server.p_max_w);
        out.r[i] = alloc.r[i].clamp(sc.server.r_min, sc.server.r_max);
    }
    out
}

/// Integer allocation after rounding: at most one subchannel per direction
/// per user. `None` means the user does not transmit (full on-device split
/// or failed SIC feasibility).
#[derive(Debug, Clone, PartialEq)]
pub struct RoundedAllocation {
    pub up_sub: Vec<Option<usize>>,
    pub down_sub: Vec<Option<usize>>,
    pub p_up: Vec<f64>,
    pub p_down: Vec<f64>,
    pub r: Vec<f64>,
}

impl RoundedAllocation {
    /// One-hot relaxed view of this assignment, for reuse of the SINR and
    /// rate definitions.
    pub fn as_relaxed(&self, m: usize) -> RelaxedAllocation {
        let hot = |sub: &[Option<usize>]| -> Vec<Vec<f64>> {
            sub.iter()
                .map(|s| {
                    let mut row = vec![0.0; m];
                    if let Some(k) = s {
                        row[*k] = 1.0;
                    }
                    row
                })
                .collect()
        };
        RelaxedAllocation {
            beta_up: hot(&self.up_sub),
            beta_down: hot(&self.down_sub),
            p_up: self.p_up.clone(),
            p_down: self.p_down.clone(),
            r: self.r.clone(),
        }
    }
}

/// Hard evaluation of an integer assignment.
#[derive(Debug, Clone)]
pub struct HardEval {
    pub breakdowns: Vec<CostBreakdown>,
    /// Weighted objective with hard QoE terms (exact DCT and exact exceed
    /// counting).
    pub gamma: f64,
    /// Per-user weighted terms summing to `gamma`.
    pub per_user: Vec<f64>,
}

/// Evaluate an integer assignment with hard QoE terms. Users whose split is
/// the full layer count, or who are not SIC-decodable, contribute device-only
/// costs. Returns None when some positive payload meets a zero rate.
pub fn utility_hard(
    sc: &Scenario,
    ch: &ChannelState,
    splits: &[usize],
    assign: &RoundedAllocation,
    weights: &Weights,
) -> Result<Option<HardEval>> {
    let u = sc.n_users();
    let m = sc.topology.n_subchannels;
    let f = sc.profile.layer_count();
    let offload = sc.offload_mask(ch);
    let relaxed = assign.as_relaxed(m);

    let mut k_eff = vec![0usize; u];
    let mut active = vec![false; u];
    for i in 0..u {
        k_eff[i] = if offload[i] { splits[i] } else { f };
        active[i] = k_eff[i] < f && assign.up_sub[i].is_some() && assign.down_sub[i].is_some();
        // an offloading user without a subchannel cannot run the edge part
        if k_eff[i] < f && !active[i] {
            k_eff[i] = f;
        }
    }

    let mut breakdowns = Vec::with_capacity(u);
    let mut per_user = Vec::with_capacity(u);
    let mut gamma = 0.0;
    for i in 0..u {
        let (rate_up, rate_down) = if active[i] {
            (
                channel::uplink_rate(&sc.topology, ch, &relaxed, &active, i),
                channel::downlink_rate(&sc.topology, ch, &relaxed, &active, i),
            )
        } else {
            (0.0, 0.0)
        };
        let r_eff = if offload[i] && active[i] {
            assign.r[i]
        } else {
            sc.server.r_min
        };
        let b = match costs::cost_breakdown(
            &sc.profile,
            k_eff[i],
            &sc.devices[i],
            &sc.server,
            &sc.qoe[i],
            r_eff,
            assign.p_up[i],
            assign.p_down[i],
            rate_up,
            rate_down,
        )? {
            Ok(b) => b,
            Err(_) => return Ok(None),
        };
        let w = weights_for(sc, i, weights);
        let exceeded = if b.t_total > sc.qoe[i].q_seconds { 1.0 } else { 0.0 };
        let ui = w.w_t * b.t_total
            + w.w_r * (b.e_total + b.resource_penalty)
            + w.w_q * (b.dct + exceeded * sc.z_scale);
        gamma += ui;
        per_user.push(ui);
        breakdowns.push(b);
    }
    if !gamma.is_finite() {
        return Err(Error::NonFinite(format!("hard objective evaluated to {gamma}")));
    }
    Ok(Some(HardEval { breakdowns, gamma, per_user }))
}
