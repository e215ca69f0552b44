//! NOMA topology and channel state: link gain sampling, nearest-AP
//! association, SIC decode ordering, and SINR / achievable-rate math for
//! uplink and downlink with intra-cell and inter-cell interference.
//!
//! Conventions:
//! - Uplink SIC decodes strongest-first, so a device is interfered by every
//!   same-cluster device decoded after it (weaker gain). Downlink SIC
//!   decodes weakest-first, so a user is interfered by every same-cluster
//!   user decoded after it (stronger gain).
//! - Fractional subchannel shares scale interference contributions linearly,
//!   which keeps the objective differentiable during gradient descent.
//! - Interference gains are the cross-cell entries of the same link-gain
//!   tensors: a foreign device interferes at an AP through its physical
//!   device-to-AP link, a foreign AP interferes at a user through its
//!   physical AP-to-user link.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::utility::RelaxedAllocation;

/// log2(1 + x) without precision loss at small x; rates built from tiny
/// SINRs stay accurate to full f64 precision.
#[inline]
pub(crate) fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Static system parameters. Powers and noise are linear SI units; dBm
/// inputs are converted at the config boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub n_aps: usize,
    pub n_users: usize,
    pub n_subchannels: usize,
    /// Total uplink system bandwidth in Hz, split evenly over subchannels.
    pub bandwidth_up_hz: f64,
    pub bandwidth_down_hz: f64,
    /// Noise power spectral density in W/Hz.
    pub noise_psd_w_hz: f64,
    pub pathloss_exp: f64,
    /// Maximum devices per subchannel per AP.
    pub cluster_cap: usize,
    /// Received-power threshold for successful uplink SIC decoding, in W.
    /// 0 disables the check.
    pub sic_threshold_up_w: f64,
    pub sic_threshold_down_w: f64,
    /// Side of the square deployment area in meters.
    pub area_m: f64,
    /// Draw i.i.d. Rayleigh (exponential power) fading on top of path loss.
    pub fading: bool,
}

impl Topology {
    pub fn validate(&self) -> Result<()> {
        if self.n_aps == 0 || self.n_users == 0 || self.n_subchannels == 0 {
            return Err(Error::Validation(
                "topology needs at least one AP, user and subchannel".into(),
            ));
        }
        if !(self.bandwidth_up_hz > 0.0 && self.bandwidth_down_hz > 0.0) {
            return Err(Error::Validation("bandwidths must be positive".into()));
        }
        if self.cluster_cap == 0 {
            return Err(Error::Validation("cluster_cap must be at least 1".into()));
        }
        if !(self.noise_psd_w_hz > 0.0) {
            return Err(Error::Validation("noise psd must be positive".into()));
        }
        if !(self.area_m > 0.0) {
            return Err(Error::Validation("area must be positive".into()));
        }
        Ok(())
    }

    /// Per-subchannel bandwidth, uplink.
    pub fn subchannel_up_hz(&self) -> f64 {
        self.bandwidth_up_hz / self.n_subchannels as f64
    }

    pub fn subchannel_down_hz(&self) -> f64 {
        self.bandwidth_down_hz / self.n_subchannels as f64
    }

    /// Noise power per uplink subchannel in W: psd times B/M.
    pub fn sigma2_up(&self) -> f64 {
        self.noise_psd_w_hz * self.subchannel_up_hz()
    }

    pub fn sigma2_down(&self) -> f64 {
        self.noise_psd_w_hz * self.subchannel_down_hz()
    }
}

/// Sampled link gains plus derived association and SIC orderings.
/// Immutable after sampling; every operation on it is a pure function.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    n_aps: usize,
    n_users: usize,
    n_subchannels: usize,
    /// Uplink power gains, indexed [ap][device][subchannel].
    up: Vec<f64>,
    /// Downlink power gains, indexed [ap][device][subchannel].
    down: Vec<f64>,
    /// Serving AP per device (max average gain).
    pub assoc: Vec<usize>,
    pub ap_pos: Vec<[f64; 2]>,
    pub dev_pos: Vec<[f64; 2]>,
    /// rank_up[n][m][dev]: decode position of `dev` in the (n, m) uplink
    /// cluster, usize::MAX for devices not associated with n.
    rank_up: Vec<Vec<usize>>,
    rank_down: Vec<Vec<usize>>,
}

impl ChannelState {
    fn idx(&self, ap: usize, dev: usize, sc: usize) -> usize {
        (ap * self.n_users + dev) * self.n_subchannels + sc
    }

    /// Uplink power gain from device `i` to AP `n` on subchannel `m`.
    pub fn h_up(&self, n: usize, i: usize, m: usize) -> f64 {
        self.up[self.idx(n, i, m)]
    }

    /// Uplink interference gain: device `t` (served elsewhere) into AP `n`.
    pub fn g_up(&self, n: usize, t: usize, m: usize) -> f64 {
        self.up[self.idx(n, t, m)]
    }

    /// Downlink power gain from AP `j` to user `i` on subchannel `k`.
    pub fn h_down(&self, j: usize, i: usize, k: usize) -> f64 {
        self.down[self.idx(j, i, k)]
    }

    /// Downlink interference gain: foreign AP `x` into user `i`.
    pub fn g_down(&self, x: usize, i: usize, k: usize) -> f64 {
        self.down[self.idx(x, i, k)]
    }

    fn rank_idx(ap: usize, sc: usize, n_subchannels: usize) -> usize {
        ap * n_subchannels + sc
    }

    /// Uplink decode position of `dev` in its serving cluster on `m`;
    /// position 0 decodes first (strongest gain).
    pub fn up_rank(&self, n: usize, m: usize, dev: usize) -> usize {
        self.rank_up[Self::rank_idx(n, m, self.n_subchannels)][dev]
    }

    pub fn down_rank(&self, j: usize, k: usize, dev: usize) -> usize {
        self.rank_down[Self::rank_idx(j, k, self.n_subchannels)][dev]
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_aps(&self) -> usize {
        self.n_aps
    }

    pub fn n_subchannels(&self) -> usize {
        self.n_subchannels
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Sample a channel realization with APs on an even grid and devices
/// uniform in the area. Deterministic per seed.
pub fn sample_channels(topo: &Topology, seed: u64) -> Result<ChannelState> {
    topo.validate()?;
    let side = (topo.n_aps as f64).sqrt().ceil() as usize;
    let cell = topo.area_m / side as f64;
    let ap_pos: Vec<[f64; 2]> = (0..topo.n_aps)
        .map(|n| {
            let gx = n % side;
            let gy = n / side;
            [(gx as f64 + 0.5) * cell, (gy as f64 + 0.5) * cell]
        })
        .collect();

    let mut pos_rng = ChaCha8Rng::seed_from_u64(seed);
    pos_rng.set_stream(0);
    let dev_pos: Vec<[f64; 2]> = (0..topo.n_users)
        .map(|_| [pos_rng.gen_range(0.0..topo.area_m), pos_rng.gen_range(0.0..topo.area_m)])
        .collect();

    sample_channels_with_positions(topo, &ap_pos, &dev_pos, seed)
}

/// Sample gains for explicit node positions. Gain = d^-alpha times an
/// Exp(1) fading draw (1.0 when fading is disabled); distances are floored
/// at 1 m.
pub fn sample_channels_with_positions(
    topo: &Topology,
    ap_pos: &[[f64; 2]],
    dev_pos: &[[f64; 2]],
    seed: u64,
) -> Result<ChannelState> {
    topo.validate()?;
    if ap_pos.len() != topo.n_aps || dev_pos.len() != topo.n_users {
        return Err(Error::Validation(format!(
            "expected {} AP and {} device positions, got {} and {}",
            topo.n_aps,
            topo.n_users,
            ap_pos.len(),
            dev_pos.len()
        )));
    }

    let mut up_rng = ChaCha8Rng::seed_from_u64(seed);
    up_rng.set_stream(1);
    let mut down_rng = ChaCha8Rng::seed_from_u64(seed);
    down_rng.set_stream(2);

    let total = topo.n_aps * topo.n_users * topo.n_subchannels;
    let mut up = Vec::with_capacity(total);
    let mut down = Vec::with_capacity(total);
    for n in 0..topo.n_aps {
        for i in 0..topo.n_users {
            let d = dist(ap_pos[n], dev_pos[i]).max(1.0);
            let pl = d.powf(-topo.pathloss_exp);
            for _ in 0..topo.n_subchannels {
                let fade_up: f64 = if topo.fading { up_rng.sample(Exp1) } else { 1.0 };
                let fade_down: f64 = if topo.fading { down_rng.sample(Exp1) } else { 1.0 };
                up.push(pl * fade_up);
                down.push(pl * fade_down);
            }
        }
    }

    let mut state = ChannelState {
        n_aps: topo.n_aps,
        n_users: topo.n_users,
        n_subchannels: topo.n_subchannels,
        up,
        down,
        assoc: vec![0; topo.n_users],
        ap_pos: ap_pos.to_vec(),
        dev_pos: dev_pos.to_vec(),
        rank_up: Vec::new(),
        rank_down: Vec::new(),
    };

    // Nearest-AP association: maximum average uplink gain over subchannels.
    for i in 0..topo.n_users {
        let mut best = 0usize;
        let mut best_avg = f64::MIN;
        for n in 0..topo.n_aps {
            let avg: f64 = (0..topo.n_subchannels).map(|m| state.h_up(n, i, m)).sum::<f64>()
                / topo.n_subchannels as f64;
            if avg > best_avg {
                best_avg = avg;
                best = n;
            }
        }
        state.assoc[i] = best;
    }

    // Precompute SIC decode ranks per (AP, subchannel) over the associated set.
    let mut rank_up = vec![vec![usize::MAX; topo.n_users]; topo.n_aps * topo.n_subchannels];
    let mut rank_down = vec![vec![usize::MAX; topo.n_users]; topo.n_aps * topo.n_subchannels];
    for n in 0..topo.n_aps {
        let members: Vec<usize> = (0..topo.n_users).filter(|&i| state.assoc[i] == n).collect();
        for m in 0..topo.n_subchannels {
            let ord_up = sic_order_up(&state, &members, n, m);
            for (pos, &dev) in ord_up.iter().enumerate() {
                rank_up[ChannelState::rank_idx(n, m, topo.n_subchannels)][dev] = pos;
            }
            let ord_down = sic_order_down(&state, &members, n, m);
            for (pos, &dev) in ord_down.iter().enumerate() {
                rank_down[ChannelState::rank_idx(n, m, topo.n_subchannels)][dev] = pos;
            }
        }
    }
    state.rank_up = rank_up;
    state.rank_down = rank_down;
    Ok(state)
}

/// Uplink SIC decode order for a cluster on (n, m): descending gain,
/// ties broken by ascending device id.
pub fn sic_order_up(state: &ChannelState, cluster: &[usize], n: usize, m: usize) -> Vec<usize> {
    let mut order = cluster.to_vec();
    order.sort_by(|&a, &b| {
        state
            .h_up(n, b, m)
            .partial_cmp(&state.h_up(n, a, m))
            .expect("gains are finite")
            .then(a.cmp(&b))
    });
    order
}

/// Downlink SIC decode order: ascending gain (weaker users decode first),
/// ties broken by ascending device id.
pub fn sic_order_down(state: &ChannelState, cluster: &[usize], j: usize, k: usize) -> Vec<usize> {
    let mut order = cluster.to_vec();
    order.sort_by(|&a, &b| {
        state
            .h_down(j, a, k)
            .partial_cmp(&state.h_down(j, b, k))
            .expect("gains are finite")
            .then(a.cmp(&b))
    });
    order
}

/// Uplink SINR of device `i` on subchannel `m` at its serving AP.
/// `active[t]` masks devices out of both transmission and interference.
pub fn uplink_sinr(
    topo: &Topology,
    state: &ChannelState,
    alloc: &RelaxedAllocation,
    active: &[bool],
    i: usize,
    m: usize,
) -> f64 {
    if !active[i] {
        return 0.0;
    }
    let n = state.assoc[i];
    let signal = alloc.p_up[i] * state.h_up(n, i, m);
    if signal <= 0.0 {
        return 0.0;
    }
    signal / uplink_denominator(topo, state, alloc, active, i, m)
}

/// Visit every device that interferes with `i`'s uplink on `m`, yielding
/// the interferer id and its link gain into `i`'s serving AP. This is the
/// single definition of the uplink interference set, shared by the SINR
/// denominator and the analytic gradient.
pub(crate) fn for_each_uplink_interferer(
    state: &ChannelState,
    active: &[bool],
    i: usize,
    m: usize,
    mut f: impl FnMut(usize, f64),
) {
    let n = state.assoc[i];
    let my_rank = state.up_rank(n, m, i);
    for t in 0..state.n_users {
        if t == i || !active[t] {
            continue;
        }
        if state.assoc[t] == n {
            // Intra-cell: only devices decoded after i interfere.
            if state.up_rank(n, m, t) > my_rank {
                f(t, state.h_up(n, t, m));
            }
        } else {
            f(t, state.g_up(n, t, m));
        }
    }
}

/// Interference-plus-noise seen by device `i` at its AP on `m`.
pub fn uplink_denominator(
    topo: &Topology,
    state: &ChannelState,
    alloc: &RelaxedAllocation,
    active: &[bool],
    i: usize,
    m: usize,
) -> f64 {
    let mut denom = topo.sigma2_up();
    for_each_uplink_interferer(state, active, i, m, |t, gain| {
        denom += alloc.beta_up[t][m] * alloc.p_up[t] * gain;
    });
    denom
}

/// Total relaxed uplink rate of device `i` in bits/s: the sum over
/// subchannels of share times (B_up / M) log2(1 + SINR).
pub fn uplink_rate(
    topo: &Topology,
    state: &ChannelState,
    alloc: &RelaxedAllocation,
    active: &[bool],
    i: usize,
) -> f64 {
    let bw = topo.subchannel_up_hz();
    (0..topo.n_subchannels)
        .map(|m| {
            let beta = alloc.beta_up[i][m];
            if beta == 0.0 {
                0.0
            } else {
                beta * bw * log2_1p(uplink_sinr(topo, state, alloc, active, i, m))
            }
        })
        .sum()
}

/// Downlink SINR of user `i` on subchannel `k` from its serving AP.
pub fn downlink_sinr(
    topo: &Topology,
    state: &ChannelState,
    alloc: &RelaxedAllocation,
    active: &[bool],
    i: usize,
    k: usize,
) -> f64 {
    if !active[i] {
        return 0.0;
    }
    let j = state.assoc[i];
    let signal = alloc.p_down[i] * state.h_down(j, i, k);
    if signal <= 0.0 {
        return 0.0;
    }
    signal / downlink_denominator(topo, state, alloc, active, i, k)
}

/// Visit every transmission that interferes with user `i`'s downlink on
/// `k`, yielding the served user id and the gain of the leaking link into
/// `i`. Shared by the SINR denominator and the analytic gradient.
pub(crate) fn for_each_downlink_interferer(
    state: &ChannelState,
    active: &[bool],
    i: usize,
    k: usize,
    mut f: impl FnMut(usize, f64),
) {
    let j = state.assoc[i];
    let my_rank = state.down_rank(j, k, i);
    for y in 0..state.n_users {
        if y == i || !active[y] {
            continue;
        }
        let x = state.assoc[y];
        if x == j {
            // Intra-cell: users decoded after i (stronger gain) interfere.
            if state.down_rank(j, k, y) > my_rank {
                f(y, state.h_down(j, y, k));
            }
        } else {
            // Foreign AP x transmitting to user y leaks through x's link to i.
            f(y, state.g_down(x, i, k));
        }
    }
}

/// Interference-plus-noise seen by user `i` on `k`.
pub fn downlink_denominator(
    topo: &Topology,
    state: &ChannelState,
    alloc: &RelaxedAllocation,
    active: &[bool],
    i: usize,
    k: usize,
) -> f64 {
    let mut denom = topo.sigma2_down();
    for_each_downlink_interferer(state, active, i, k, |y, gain| {
        denom += alloc.beta_down[y][k] * alloc.p_down[y] * gain;
    });
    denom
}

/// Total relaxed downlink rate of user `i` in bits/s.
pub fn downlink_rate(
    topo: &Topology,
    state: &ChannelState,
    alloc: &RelaxedAllocation,
    active: &[bool],
    i: usize,
) -> f64 {
    let bw = topo.subchannel_down_hz();
    (0..topo.n_subchannels)
        .map(|k| {
            let beta = alloc.beta_down[i][k];
            if beta == 0.0 {
                0.0
            } else {
                beta * bw * log2_1p(downlink_sinr(topo, state, alloc, active, i, k))
            }
        })
        .sum()
}

/// SIC decodability on explicit subchannels: the received signal power must
/// exceed the configured thresholds in both directions. A zero threshold
/// always passes.
pub fn sic_feasible_on(
    topo: &Topology,
    state: &ChannelState,
    i: usize,
    m_up: usize,
    p_up: f64,
    k_down: usize,
    p_down: f64,
) -> bool {
    let n = state.assoc[i];
    let up_ok = topo.sic_threshold_up_w <= 0.0
        || p_up * state.h_up(n, i, m_up) > topo.sic_threshold_up_w;
    let down_ok = topo.sic_threshold_down_w <= 0.0
        || p_down * state.h_down(n, i, k_down) > topo.sic_threshold_down_w;
    up_ok && down_ok
}

/// Best-case SIC decodability for device `i`: evaluated at the given powers
/// on the most favorable subchannel in each direction. Devices failing this
/// cannot offload at all and run the whole model locally.
pub fn sic_feasible(
    topo: &Topology,
    state: &ChannelState,
    i: usize,
    p_up: f64,
    p_down: f64,
) -> bool {
    let n = state.assoc[i];
    let best_up = (0..topo.n_subchannels)
        .map(|m| state.h_up(n, i, m))
        .fold(f64::MIN, f64::max);
    let best_down = (0..topo.n_subchannels)
        .map(|k| state.h_down(n, i, k))
        .fold(f64::MIN, f64::max);
    let up_ok = topo.sic_threshold_up_w <= 0.0 || p_up * best_up > topo.sic_threshold_up_w;
    let down_ok =
        topo.sic_threshold_down_w <= 0.0 || p_down * best_down > topo.sic_threshold_down_w;
    up_ok && down_ok
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::utility::RelaxedAllocation;
    use approx::assert_relative_eq;

    pub(crate) fn test_topo(n_aps: usize, n_users: usize, m: usize) -> Topology {
        Topology {
            n_aps,
            n_users,
            n_subchannels: m,
            bandwidth_up_hz: 1e6 * m as f64,
            bandwidth_down_hz: 1e6 * m as f64,
            noise_psd_w_hz: 1e-16,
            pathloss_exp: 3.0,
            cluster_cap: 3,
            sic_threshold_up_w: 0.0,
            sic_threshold_down_w: 0.0,
            area_m: 200.0,
            fading: true,
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let topo = test_topo(2, 4, 3);
        let a = sample_channels(&topo, 99).unwrap();
        let b = sample_channels(&topo, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_channels(&topo, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn equal_distance_no_fading_gives_equal_gains() {
        let mut topo = test_topo(1, 2, 2);
        topo.fading = false;
        let ap = [[100.0, 100.0]];
        let devs = [[70.0, 100.0], [130.0, 100.0]];
        let st = sample_channels_with_positions(&topo, &ap, &devs, 1).unwrap();
        for m in 0..2 {
            assert_eq!(st.h_up(0, 0, m), st.h_up(0, 1, m));
            assert_eq!(st.h_down(0, 0, m), st.h_down(0, 1, m));
        }
    }

    #[test]
    fn pathloss_exponent_five() {
        let mut topo = test_topo(1, 2, 1);
        topo.fading = false;
        topo.pathloss_exp = 5.0;
        let ap = [[0.0, 0.0]];
        let devs = [[50.0, 0.0], [100.0, 0.0]];
        let st = sample_channels_with_positions(&topo, &ap, &devs, 1).unwrap();
        let ratio = st.h_up(0, 1, 0) / st.h_up(0, 0, 0);
        assert_relative_eq!(ratio, 2f64.powi(-5), max_relative = 1e-12);
    }

    #[test]
    fn association_prefers_nearest_ap_without_fading() {
        let mut topo = test_topo(2, 2, 2);
        topo.fading = false;
        let aps = [[0.0, 0.0], [200.0, 0.0]];
        let devs = [[10.0, 0.0], [190.0, 0.0]];
        let st = sample_channels_with_positions(&topo, &aps, &devs, 1).unwrap();
        assert_eq!(st.assoc, vec![0, 1]);
    }

    fn state_with_up_gains(topo: &Topology, gains: &[(usize, usize, usize, f64)]) -> ChannelState {
        // Build a no-fading state and then overwrite selected uplink gains,
        // recomputing the ranks the same way sampling does. Devices are
        // spread near their intended AP so association is by position.
        let mut t = topo.clone();
        t.fading = false;
        let aps: Vec<[f64; 2]> = (0..t.n_aps).map(|n| [n as f64 * 100.0, 0.0]).collect();
        let per_ap = t.n_users.div_ceil(t.n_aps);
        let devs: Vec<[f64; 2]> = (0..t.n_users)
            .map(|i| [(i / per_ap) as f64 * 100.0 + (i % per_ap) as f64 * 5.0 + 1.0, 10.0])
            .collect();
        let mut st = sample_channels_with_positions(&t, &aps, &devs, 1).unwrap();
        for &(n, i, m, g) in gains {
            let idx = st.idx(n, i, m);
            st.up[idx] = g;
        }
        // refresh ranks
        let rebuilt = {
            let mut rank_up =
                vec![vec![usize::MAX; t.n_users]; t.n_aps * t.n_subchannels];
            for n in 0..t.n_aps {
                let members: Vec<usize> =
                    (0..t.n_users).filter(|&i| st.assoc[i] == n).collect();
                for m in 0..t.n_subchannels {
                    let ord = sic_order_up(&st, &members, n, m);
                    for (pos, &dev) in ord.iter().enumerate() {
                        rank_up[ChannelState::rank_idx(n, m, t.n_subchannels)][dev] = pos;
                    }
                }
            }
            rank_up
        };
        st.rank_up = rebuilt;
        st
    }

    #[test]
    fn sic_order_sorts_by_descending_gain_with_id_ties() {
        let topo = test_topo(1, 3, 1);
        let st = state_with_up_gains(&topo, &[(0, 0, 0, 3.0), (0, 1, 0, 5.0), (0, 2, 0, 5.0)]);
        assert_eq!(sic_order_up(&st, &[0, 1], 0, 0), vec![1, 0]);
        assert_eq!(sic_order_up(&st, &[1, 2], 0, 0), vec![1, 2]);
        assert_eq!(sic_order_up(&st, &[2], 0, 0), vec![2]);
    }

    #[test]
    fn single_user_sinr_is_signal_over_noise() {
        // p = 0.1 W, |h|^2 = 1e-8, sigma^2 = 1e-10 -> SINR = 10.
        let mut topo = test_topo(1, 1, 1);
        topo.bandwidth_up_hz = 1.0;
        topo.noise_psd_w_hz = 1e-10;
        let st = state_with_up_gains(&topo, &[(0, 0, 0, 1e-8)]);
        let alloc = RelaxedAllocation::uniform(1, 1, 0.1, 0.1, 1.0);
        let sinr = uplink_sinr(&topo, &st, &alloc, &[true], 0, 0);
        assert_relative_eq!(sinr, 10.0, max_relative = 1e-12);
    }

    #[test]
    fn stronger_user_sees_weaker_interference_term() {
        // Two devices in one cluster: the first-decoded (stronger) user's
        // denominator contains the weaker user's received power; the
        // last-decoded user sees only noise.
        let mut topo = test_topo(1, 2, 1);
        topo.bandwidth_up_hz = 1.0;
        topo.noise_psd_w_hz = 1e-12;
        let st = state_with_up_gains(&topo, &[(0, 0, 0, 4e-9), (0, 1, 0, 1e-9)]);
        let mut alloc = RelaxedAllocation::uniform(2, 1, 0.2, 0.2, 1.0);
        alloc.p_up = vec![0.2, 0.3];
        let active = [true, true];
        let d_strong = uplink_denominator(&topo, &st, &alloc, &active, 0, 0);
        let d_weak = uplink_denominator(&topo, &st, &alloc, &active, 1, 0);
        assert_relative_eq!(d_strong, 1e-12 + 0.3 * 1e-9, max_relative = 1e-12);
        assert_relative_eq!(d_weak, 1e-12, max_relative = 1e-12);
        assert!(d_strong >= topo.sigma2_up() + 0.3 * 1e-9);
    }

    #[test]
    fn two_ap_instance_matches_term_by_term_evaluation() {
        // Fixed gains, contributions recomputed by explicit arithmetic.
        let mut topo = test_topo(2, 4, 1);
        topo.bandwidth_up_hz = 1.0;
        topo.noise_psd_w_hz = 2e-13;
        // AP0 serves devices 0,1; AP1 serves 2,3 (positions arranged so).
        let st = state_with_up_gains(
            &topo,
            &[
                (0, 0, 0, 5e-9),
                (0, 1, 0, 2e-9),
                (0, 2, 0, 3e-10), // interference link of dev 2 into AP0
                (0, 3, 0, 1e-10),
                (1, 2, 0, 4e-9),
                (1, 3, 0, 6e-9),
            ],
        );
        assert_eq!(st.assoc, vec![0, 0, 1, 1]);
        let mut alloc = RelaxedAllocation::uniform(4, 1, 0.1, 0.1, 1.0);
        alloc.p_up = vec![0.10, 0.15, 0.20, 0.25];
        alloc.beta_up = vec![vec![0.9], vec![0.8], vec![0.7], vec![0.6]];
        let active = [true; 4];

        // Device 0 decodes first in AP0 (5e-9 > 2e-9): intra from device 1,
        // inter from devices 2 and 3 through their links into AP0.
        let expect_d0 = 2e-13
            + 0.8 * 0.15 * 2e-9
            + 0.7 * 0.20 * 3e-10
            + 0.6 * 0.25 * 1e-10;
        let expect_sinr0 = 0.10 * 5e-9 / expect_d0;
        assert_relative_eq!(
            uplink_sinr(&topo, &st, &alloc, &active, 0, 0),
            expect_sinr0,
            max_relative = 1e-12
        );

        // Device 1 decodes last in AP0: inter-cell terms only.
        let expect_d1 = 2e-13 + 0.7 * 0.20 * 3e-10 + 0.6 * 0.25 * 1e-10;
        assert_relative_eq!(
            uplink_sinr(&topo, &st, &alloc, &active, 1, 0),
            0.15 * 2e-9 / expect_d1,
            max_relative = 1e-12
        );
    }

    #[test]
    fn rate_follows_share_and_log() {
        let mut topo = test_topo(1, 1, 1);
        topo.bandwidth_up_hz = 1e6;
        topo.noise_psd_w_hz = 1e-16; // sigma^2 = 1e-16 * 1e6 = 1e-10
        let st = state_with_up_gains(&topo, &[(0, 0, 0, 1e-8)]);
        // SINR = 0.01 * 1e-8 / 1e-10 = 1 -> log2(2) = 1 -> rate = beta * 1e6.
        let mut alloc = RelaxedAllocation::uniform(1, 1, 0.01, 0.01, 1.0);
        let r1 = uplink_rate(&topo, &st, &alloc, &[true], 0);
        assert_relative_eq!(r1, 1e6, max_relative = 1e-12);
        alloc.beta_up[0][0] = 0.0;
        assert_eq!(uplink_rate(&topo, &st, &alloc, &[true], 0), 0.0);
        // beta = 0.5, SINR = 3 -> 0.5 * 1e6 * log2(4) = 1e6.
        let st3 = state_with_up_gains(&topo, &[(0, 0, 0, 3e-8)]);
        let mut a3 = RelaxedAllocation::uniform(1, 1, 0.01, 0.01, 1.0);
        a3.beta_up[0][0] = 0.5;
        assert_relative_eq!(uplink_rate(&topo, &st3, &a3, &[true], 0), 1e6, max_relative = 1e-12);
    }

    #[test]
    fn downlink_two_user_matches_hand_evaluation() {
        let mut topo = test_topo(1, 2, 1);
        topo.bandwidth_down_hz = 1.0;
        topo.noise_psd_w_hz = 1e-10;
        let t = {
            let mut t = topo.clone();
            t.fading = false;
            t
        };
        let aps = [[0.0, 0.0]];
        let devs = [[30.0, 0.0], [60.0, 0.0]];
        let mut st = sample_channels_with_positions(&t, &aps, &devs, 1).unwrap();
        // Overwrite downlink gains: user 0 weaker (decodes first).
        let i00 = st.idx(0, 0, 0);
        let i01 = st.idx(0, 1, 0);
        st.down[i00] = 1e-9;
        st.down[i01] = 4e-9;
        // ranks: ascending order -> user 0 rank 0, user 1 rank 1
        st.rank_down = {
            let mut r = vec![vec![usize::MAX; 2]; 1];
            let ord = sic_order_down(&st, &[0, 1], 0, 0);
            for (pos, &dev) in ord.iter().enumerate() {
                r[0][dev] = pos;
            }
            r
        };
        let mut alloc = RelaxedAllocation::uniform(2, 1, 0.1, 0.1, 1.0);
        alloc.p_down = vec![1.0, 0.5];
        alloc.beta_down = vec![vec![1.0], vec![0.8]];
        let active = [true, true];
        // Weakest user (0) is interfered by the stronger user's term.
        let d0 = 1e-10 + 0.8 * 0.5 * 4e-9;
        assert_relative_eq!(
            downlink_sinr(&topo, &st, &alloc, &active, 0, 0),
            1.0 * 1e-9 / d0,
            max_relative = 1e-12
        );
        // Strongest user decodes last: noise only.
        assert_relative_eq!(
            downlink_sinr(&topo, &st, &alloc, &active, 1, 0),
            0.5 * 4e-9 / 1e-10,
            max_relative = 1e-12
        );
    }

    #[test]
    fn single_user_downlink_sinr_ten() {
        let mut topo = test_topo(1, 1, 1);
        topo.bandwidth_down_hz = 1.0;
        topo.noise_psd_w_hz = 1e-10;
        let mut t = topo.clone();
        t.fading = false;
        let st = {
            let mut st =
                sample_channels_with_positions(&t, &[[0.0, 0.0]], &[[10.0, 0.0]], 1).unwrap();
            let idx = st.idx(0, 0, 0);
            st.down[idx] = 1e-9;
            st
        };
        let alloc = RelaxedAllocation::uniform(1, 1, 0.1, 1.0, 1.0);
        assert_relative_eq!(
            downlink_sinr(&topo, &st, &alloc, &[true], 0, 0),
            10.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn interference_monotonicity() {
        let mut topo = test_topo(1, 2, 1);
        topo.noise_psd_w_hz = 1e-12;
        let st = state_with_up_gains(&topo, &[(0, 0, 0, 4e-9), (0, 1, 0, 1e-9)]);
        let mut alloc = RelaxedAllocation::uniform(2, 1, 0.2, 0.2, 1.0);
        alloc.p_up = vec![0.2, 0.3];
        let active = [true, true];
        let base = uplink_sinr(&topo, &st, &alloc, &active, 0, 0);

        // More interferer power lowers SINR.
        let mut worse = alloc.clone();
        worse.p_up[1] = 0.6;
        assert!(uplink_sinr(&topo, &st, &worse, &active, 0, 0) < base);

        // More own power raises SINR.
        let mut better = alloc.clone();
        better.p_up[0] = 0.4;
        assert!(uplink_sinr(&topo, &st, &better, &active, 0, 0) > base);

        // Removing the interferer never decreases SINR.
        assert!(uplink_sinr(&topo, &st, &alloc, &[true, false], 0, 0) >= base);
    }

    #[test]
    fn sic_feasibility_threshold() {
        let mut topo = test_topo(1, 1, 1);
        let st = state_with_up_gains(&topo, &[(0, 0, 0, 1e-8)]);
        // p |h|^2 = 2 I -> feasible
        topo.sic_threshold_up_w = 0.5e-9;
        assert!(sic_feasible(&topo, &st, 0, 0.1, 0.1));
        // p |h|^2 = I / 2 -> device must run the whole model locally
        topo.sic_threshold_up_w = 2e-9;
        assert!(!sic_feasible(&topo, &st, 0, 0.1, 0.1));
        // zero threshold always passes
        topo.sic_threshold_up_w = 0.0;
        topo.sic_threshold_down_w = 0.0;
        assert!(sic_feasible(&topo, &st, 0, 1e-30, 1e-30));
    }
}
