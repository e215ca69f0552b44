//! Scalar cost models: the four delay components, the multicore
//! compensation function, the four energy components, the delayed
//! completion time (DCT) with its sigmoid relaxation, and per-user
//! aggregation. Everything here is a pure function over immutable inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::ModelProfile;

/// Device compute and radio parameters. Powers are in Watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    /// Floating-point capability c_i in FLOP/s.
    pub flops: f64,
    /// Effective switched capacitance of the device CPU.
    pub kappa: f64,
    /// CPU cycles per bit of task data.
    pub cycles_per_bit: f64,
    pub p_min_w: f64,
    pub p_max_w: f64,
}

impl DeviceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.flops > 0.0) {
            return Err(Error::Validation("device flops must be positive".into()));
        }
        if !(self.cycles_per_bit > 0.0) {
            return Err(Error::Validation("device cycles_per_bit must be positive".into()));
        }
        if !(0.0 < self.p_min_w && self.p_min_w <= self.p_max_w) {
            return Err(Error::Validation(format!(
                "device power bounds invalid: [{}, {}]",
                self.p_min_w, self.p_max_w
            )));
        }
        Ok(())
    }
}

/// Edge server parameters. `unit_flops` is the capability of one resource
/// unit; a user holding r units gets an effective `compensation(r) *
/// unit_flops`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServerSpec {
    pub unit_flops: f64,
    pub kappa: f64,
    pub cycles_per_bit: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// Compensation exponent; 1 degenerates to the single-core case.
    pub theta: f64,
    /// Downlink transmit power bounds in Watts.
    pub p_min_w: f64,
    pub p_max_w: f64,
}

impl ServerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.unit_flops > 0.0) {
            return Err(Error::Validation("server unit_flops must be positive".into()));
        }
        if !(1.0 <= self.r_min && self.r_min <= self.r_max) {
            return Err(Error::Validation(format!(
                "resource bounds invalid: [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        if self.theta < 1.0 {
            return Err(Error::Validation("theta must be at least 1".into()));
        }
        if !(0.0 < self.p_min_w && self.p_min_w <= self.p_max_w) {
            return Err(Error::Validation(format!(
                "downlink power bounds invalid: [{}, {}]",
                self.p_min_w, self.p_max_w
            )));
        }
        Ok(())
    }
}

/// Per-user QoE parameters: the acceptable completion deadline and the
/// steepness of the sigmoid relaxation around it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoESpec {
    /// Deadline Q in seconds.
    pub q_seconds: f64,
    /// Sigmoid steepness a.
    pub steepness: f64,
}

impl QoESpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_seconds > 0.0 && self.steepness > 0.0) {
            return Err(Error::Validation("QoE deadline and steepness must be positive".into()));
        }
        Ok(())
    }
}

/// A delay value that may be infeasible (positive payload over a zero
/// rate). Infeasible orders strictly above every finite cost, and never
/// leaks a floating special value into downstream arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cost {
    Finite(f64),
    Infeasible,
}

impl Cost {
    pub fn finite(self) -> Option<f64> {
        match self {
            Cost::Finite(v) => Some(v),
            Cost::Infeasible => None,
        }
    }

    pub fn is_infeasible(self) -> bool {
        matches!(self, Cost::Infeasible)
    }
}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use Cost::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.partial_cmp(b),
            (Finite(_), Infeasible) => Some(std::cmp::Ordering::Less),
            (Infeasible, Finite(_)) => Some(std::cmp::Ordering::Greater),
            (Infeasible, Infeasible) => Some(std::cmp::Ordering::Equal),
        }
    }
}

/// Multicore compensation lambda(r) = r^theta: the effective throughput
/// multiplier of r allocated units. Equals r at theta = 1 and exceeds r
/// for r > 1, theta > 1.
pub fn compensation(r: f64, theta: f64) -> Result<f64> {
    if r < 1.0 {
        return Err(Error::Validation(format!("compensation needs r >= 1, got {r}")));
    }
    Ok(lambda(r, theta))
}

/// Unchecked compensation for hot paths where bounds are enforced upstream.
#[inline]
pub(crate) fn lambda(r: f64, theta: f64) -> f64 {
    r.powf(theta)
}

/// Derivative of the compensation function in r.
#[inline]
pub(crate) fn lambda_prime(r: f64, theta: f64) -> f64 {
    theta * r.powf(theta - 1.0)
}

/// Inference delay of the on-device prefix at split `k`.
pub fn device_delay(profile: &ModelProfile, k: usize, dev: &DeviceSpec) -> Result<f64> {
    let (device_flops, _) = profile.cumulative_workload(k)?;
    Ok(device_flops / dev.flops)
}

/// Inference delay of the offloaded suffix at split `k` with `r` resource
/// units.
pub fn server_delay(profile: &ModelProfile, k: usize, r: f64, srv: &ServerSpec) -> Result<f64> {
    let (_, edge_flops) = profile.cumulative_workload(k)?;
    if edge_flops == 0.0 {
        return Ok(0.0);
    }
    Ok(edge_flops / (lambda(r, srv.theta) * srv.unit_flops))
}

/// Uplink and downlink transmission delays at split `k`. The uplink carries
/// the split activation, the downlink the final result; a full on-device
/// split transmits nothing in either direction. A zero rate under a positive
/// payload is an infeasible marker, not a crash.
pub fn transmission_delays(
    profile: &ModelProfile,
    k: usize,
    rate_up: f64,
    rate_down: f64,
) -> Result<(Cost, Cost)> {
    let w = profile.intermediate_bits(k)?;
    let full_device = k == profile.layer_count();
    let t_up = payload_delay(w, rate_up);
    let t_down = if full_device {
        Cost::Finite(0.0)
    } else {
        payload_delay(profile.result_bits, rate_down)
    };
    Ok((t_up, t_down))
}

fn payload_delay(bits: f64, rate: f64) -> Cost {
    if bits == 0.0 {
        Cost::Finite(0.0)
    } else if rate > 0.0 {
        Cost::Finite(bits / rate)
    } else {
        Cost::Infeasible
    }
}

/// Overall task latency: the sum of the four delay components.
pub fn total_delay(
    profile: &ModelProfile,
    k: usize,
    dev: &DeviceSpec,
    srv: &ServerSpec,
    r: f64,
    rate_up: f64,
    rate_down: f64,
) -> Result<Cost> {
    let t_dev = device_delay(profile, k, dev)?;
    let t_srv = server_delay(profile, k, r, srv)?;
    let (t_up, t_down) = transmission_delays(profile, k, rate_up, rate_down)?;
    Ok(match (t_up, t_down) {
        (Cost::Finite(u), Cost::Finite(d)) => Cost::Finite(t_dev + t_srv + u + d),
        _ => Cost::Infeasible,
    })
}

/// Device-side inference energy at split `k`.
pub fn energy_device(profile: &ModelProfile, k: usize, dev: &DeviceSpec) -> Result<f64> {
    let (device_flops, _) = profile.cumulative_workload(k)?;
    Ok(dev.kappa * dev.flops.powi(2) * dev.cycles_per_bit * device_flops)
}

/// Server-side inference energy at split `k` with `r` units held.
pub fn energy_server(profile: &ModelProfile, k: usize, r: f64, srv: &ServerSpec) -> Result<f64> {
    let (_, edge_flops) = profile.cumulative_workload(k)?;
    if edge_flops == 0.0 {
        return Ok(0.0);
    }
    Ok(srv.kappa * (lambda(r, srv.theta) * srv.unit_flops).powi(2) * srv.cycles_per_bit * edge_flops)
}

/// Transmission energy: transmit power times time on air.
pub fn energy_transmission(power_w: f64, delay_s: f64) -> f64 {
    power_w * delay_s
}

/// Numerically stable logistic function.
#[inline]
pub(crate) fn sigmoid(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

/// Sigmoid relaxation of the "deadline exceeded" indicator:
/// 1 / (1 + exp(-a (t/q - 1))). Monotone increasing in `t`, exactly 0.5 at
/// t = q, and saturating to the 0/1 limits for extreme arguments.
pub fn soft_indicator(t: f64, qoe: &QoESpec) -> f64 {
    sigmoid(qoe.steepness * (t / qoe.q_seconds - 1.0))
}

/// Derivative of `soft_indicator` in `t`: a R (1 - R) / q.
pub(crate) fn soft_indicator_dt(t: f64, qoe: &QoESpec) -> f64 {
    let s = soft_indicator(t, qoe);
    qoe.steepness * s * (1.0 - s) / qoe.q_seconds
}

/// Hard delayed completion time: max(0, t - q).
pub fn dct(t: f64, qoe: &QoESpec) -> f64 {
    (t - qoe.q_seconds).max(0.0)
}

/// Relaxed DCT used inside gradient descent: (t - q) times the soft
/// indicator. Below the deadline this is a small negative value suppressed
/// by the sigmoid; reporting always uses the hard form.
pub fn dct_soft(t: f64, qoe: &QoESpec) -> f64 {
    (t - qoe.q_seconds) * soft_indicator(t, qoe)
}

/// Relaxed system aggregates: (sum of soft DCT, sum of soft indicators).
pub fn aggregate_qoe(delays: &[f64], specs: &[QoESpec]) -> (f64, f64) {
    let c = delays.iter().zip(specs).map(|(&t, q)| dct_soft(t, q)).sum();
    let z = delays.iter().zip(specs).map(|(&t, q)| soft_indicator(t, q)).sum();
    (c, z)
}

/// Hard system aggregates for reporting: (sum of max(0, t - q), count of
/// users strictly past their deadline).
pub fn aggregate_qoe_hard(delays: &[f64], specs: &[QoESpec]) -> (f64, usize) {
    let c = delays.iter().zip(specs).map(|(&t, q)| dct(t, q)).sum();
    let z = delays.iter().zip(specs).filter(|(&t, q)| t > q.q_seconds).count();
    (c, z)
}

/// All per-user cost components under one allocation. Delay and energy
/// totals are stored sums of their components; `dct` is the hard form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    pub t_device: f64,
    pub t_server: f64,
    pub t_up: f64,
    pub t_down: f64,
    pub t_total: f64,
    pub e_device: f64,
    pub e_up: f64,
    pub e_down: f64,
    pub e_server: f64,
    pub e_total: f64,
    pub dct: f64,
    pub soft_indicator: f64,
    pub resource_penalty: f64,
}

/// Assemble the full per-user breakdown at split `k` given the achieved
/// link rates. Returns the infeasible marker when a positive payload meets
/// a zero rate.
#[allow(clippy::too_many_arguments)]
pub fn cost_breakdown(
    profile: &ModelProfile,
    k: usize,
    dev: &DeviceSpec,
    srv: &ServerSpec,
    qoe: &QoESpec,
    r: f64,
    p_up_w: f64,
    p_down_w: f64,
    rate_up: f64,
    rate_down: f64,
) -> Result<std::result::Result<CostBreakdown, Cost>> {
    let t_device = device_delay(profile, k, dev)?;
    let t_server = server_delay(profile, k, r, srv)?;
    let (t_up, t_down) = transmission_delays(profile, k, rate_up, rate_down)?;
    let (t_up, t_down) = match (t_up, t_down) {
        (Cost::Finite(u), Cost::Finite(d)) => (u, d),
        _ => return Ok(Err(Cost::Infeasible)),
    };
    let t_total = t_device + t_server + t_up + t_down;

    let e_device = energy_device(profile, k, dev)?;
    let e_server = energy_server(profile, k, r, srv)?;
    let e_up = energy_transmission(p_up_w, t_up);
    let e_down = energy_transmission(p_down_w, t_down);
    let e_total = e_device + e_up + e_down + e_server;

    Ok(Ok(CostBreakdown {
        t_device,
        t_server,
        t_up,
        t_down,
        t_total,
        e_device,
        e_up,
        e_down,
        e_server,
        e_total,
        dct: dct(t_total, qoe),
        soft_indicator: soft_indicator(t_total, qoe),
        resource_penalty: lambda(r, srv.theta),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{LayerProfile, ModelProfile};
    use approx::assert_relative_eq;

    fn dev() -> DeviceSpec {
        DeviceSpec { flops: 1e10, kappa: 1e-31, cycles_per_bit: 1e4, p_min_w: 0.01, p_max_w: 0.3 }
    }

    fn srv(theta: f64) -> ServerSpec {
        ServerSpec {
            unit_flops: 5e9,
            kappa: 1e-33,
            cycles_per_bit: 1e4,
            r_min: 1.0,
            r_max: 8.0,
            theta,
            p_min_w: 0.1,
            p_max_w: 2.0,
        }
    }

    fn two_layer() -> ModelProfile {
        ModelProfile::new(
            "two",
            1e6,
            1e4,
            vec![
                LayerProfile {
                    workload_flops: 2e9,
                    conv_count: 1,
                    pool_count: 0,
                    relu_count: 1,
                    out_bits: 5e5,
                },
                LayerProfile {
                    workload_flops: 3e9,
                    conv_count: 1,
                    pool_count: 1,
                    relu_count: 1,
                    out_bits: 1e5,
                },
            ],
            vec![0, 1, 2],
        )
        .unwrap()
    }

    #[test]
    fn compensation_fixtures() {
        assert_eq!(compensation(2.0, 1.0).unwrap(), 2.0);
        assert_eq!(compensation(1.0, 3.7).unwrap(), 1.0);
        let v = compensation(2.0, 1.1).unwrap();
        assert_relative_eq!(v, 2f64.powf(1.1), max_relative = 1e-15);
        assert_relative_eq!(v, 2.1435, max_relative = 1e-4);
        assert!(v > 2.0);
        assert!(compensation(0.5, 1.1).is_err());
    }

    #[test]
    fn device_delay_prefix() {
        let p = two_layer();
        assert_eq!(device_delay(&p, 0, &dev()).unwrap(), 0.0);
        assert_relative_eq!(device_delay(&p, 2, &dev()).unwrap(), 0.5, max_relative = 1e-12);
        assert_relative_eq!(device_delay(&p, 1, &dev()).unwrap(), 0.2, max_relative = 1e-12);
    }

    #[test]
    fn server_delay_suffix() {
        let p = two_layer();
        assert_eq!(server_delay(&p, 2, 2.0, &srv(1.0)).unwrap(), 0.0);
        // edge 3e9 at r=2, theta=1: 3e9 / (2 * 5e9) = 0.3 s
        assert_relative_eq!(server_delay(&p, 1, 2.0, &srv(1.0)).unwrap(), 0.3, max_relative = 1e-12);
        // theta = 1.1: 3e9 / (2^1.1 * 5e9)
        let expect = 3e9 / (2f64.powf(1.1) * 5e9);
        let got = server_delay(&p, 1, 2.0, &srv(1.1)).unwrap();
        assert_relative_eq!(got, expect, max_relative = 1e-15);
        assert_relative_eq!(got, 0.2799, max_relative = 1e-3);
    }

    #[test]
    fn transmission_payloads_and_infeasibility() {
        let p = two_layer();
        // 1e6-ish payload over 1e6 b/s: k=0 ships the raw input.
        let (up, down) = transmission_delays(&p, 0, 1e6, 1e6).unwrap();
        assert_eq!(up, Cost::Finite(1.0));
        assert_eq!(down, Cost::Finite(0.01));
        // full device: no payload either way, any rate
        let (up, down) = transmission_delays(&p, 2, 0.0, 0.0).unwrap();
        assert_eq!(up, Cost::Finite(0.0));
        assert_eq!(down, Cost::Finite(0.0));
        // zero rate under positive payload is a marker
        let (up, _) = transmission_delays(&p, 1, 0.0, 1e6).unwrap();
        assert!(up.is_infeasible());
    }

    #[test]
    fn infeasible_orders_above_all_finite() {
        assert!(Cost::Infeasible > Cost::Finite(1e300));
        assert!(Cost::Finite(2.0) > Cost::Finite(1.0));
        assert!(Cost::Finite(f64::MAX) < Cost::Infeasible);
    }

    #[test]
    fn total_delay_is_additive() {
        let p = two_layer();
        // components: dev 0.2, server 0.3 (r=2 theta=1), up 5e5/1e6 = 0.5,
        // down 1e4/1e6 = 0.01
        let t = total_delay(&p, 1, &dev(), &srv(1.0), 2.0, 1e6, 1e6).unwrap();
        assert_relative_eq!(t.finite().unwrap(), 0.2 + 0.3 + 0.5 + 0.01, max_relative = 1e-12);
    }

    #[test]
    fn energy_components_match_hand_arithmetic() {
        let p = two_layer();
        let d = dev();
        let s = srv(1.0);
        // device at k=2: kappa c^2 phi Z = 1e-31 * 1e20 * 1e4 * 5e9
        assert_relative_eq!(
            energy_device(&p, 2, &d).unwrap(),
            1e-31 * 1e20 * 1e4 * 5e9,
            max_relative = 1e-12
        );
        assert_eq!(energy_device(&p, 0, &d).unwrap(), 0.0);
        // server at k=1, r=2: kappa_e (2*5e9)^2 phi_e * 3e9
        assert_relative_eq!(
            energy_server(&p, 1, 2.0, &s).unwrap(),
            1e-33 * 1e20 * 1e4 * 3e9,
            max_relative = 1e-12
        );
        assert_eq!(energy_transmission(0.1, 1.0), 0.1);
    }

    #[test]
    fn breakdown_totals_are_stored_sums() {
        let p = two_layer();
        let q = QoESpec { q_seconds: 1.0, steepness: 10.0 };
        let b = cost_breakdown(&p, 1, &dev(), &srv(1.1), &q, 2.0, 0.1, 1.0, 1e6, 1e6)
            .unwrap()
            .unwrap();
        assert_eq!(b.t_total, b.t_device + b.t_server + b.t_up + b.t_down);
        assert_eq!(b.e_total, b.e_device + b.e_up + b.e_down + b.e_server);
        assert!(b.soft_indicator > 0.0 && b.soft_indicator < 1.0);
        assert_relative_eq!(b.resource_penalty, 2f64.powf(1.1), max_relative = 1e-12);
        // random-ish instance cross-check of the energy sum, term by term
        let expect_e = energy_device(&p, 1, &dev()).unwrap()
            + 0.1 * b.t_up
            + 1.0 * b.t_down
            + energy_server(&p, 1, 2.0, &srv(1.1)).unwrap();
        assert_relative_eq!(b.e_total, expect_e, max_relative = 1e-12);
    }

    #[test]
    fn sigmoid_midpoint_and_exact_value() {
        let q = QoESpec { q_seconds: 0.010, steepness: 2000.0 };
        assert_eq!(soft_indicator(0.010, &q), 0.5);
        // t/q = 1.002 -> argument 4 -> 1 / (1 + e^-4)
        let s = soft_indicator(0.01002, &q);
        assert_relative_eq!(s, 1.0 / (1.0 + (-4.0f64).exp()), max_relative = 1e-14);
        assert_relative_eq!(s, 0.9820138, max_relative = 1e-6);
        // far below the deadline the indicator saturates toward 0
        assert!(soft_indicator(0.005, &q) < 1e-12);
        // far above toward 1 without overflowing
        assert_eq!(soft_indicator(1e6, &q), 1.0);
        assert_eq!(soft_indicator(0.0, &QoESpec { q_seconds: 1.0, steepness: 1e6 }), 0.0);
    }

    #[test]
    fn soft_indicator_is_monotone_in_t() {
        // strict inside the non-saturated band
        let q = QoESpec { q_seconds: 0.5, steepness: 50.0 };
        let mut prev = soft_indicator(0.2, &q);
        for i in 1..=200 {
            let t = 0.2 + i as f64 * 0.003;
            let s = soft_indicator(t, &q);
            assert!(s > prev, "t = {t}");
            prev = s;
        }
    }

    #[test]
    fn hard_dct_branches() {
        let q = QoESpec { q_seconds: 10.0, steepness: 100.0 };
        assert_eq!(dct(9.0, &q), 0.0);
        assert_eq!(dct(12.0, &q), 2.0);
        assert_eq!(dct(10.0, &q), 0.0);
    }

    #[test]
    fn soft_dct_approaches_hard_as_steepness_grows() {
        for &t in &[8.0f64, 9.5, 10.5, 13.0] {
            let err = |a: f64| {
                let q = QoESpec { q_seconds: 10.0, steepness: a };
                (dct_soft(t, &q) - dct(t, &q)).abs()
            };
            assert!(err(2000.0) < err(10.0), "t = {t}");
        }
    }

    #[test]
    fn per_user_strategy_comparison_arithmetic() {
        // Four users, deadlines chosen per user. One strategy keeps every
        // user inside its deadline at a larger delay sum; the other has a
        // smaller sum but blows three deadlines by 9 seconds in total.
        let qoes: Vec<QoESpec> = [10.0, 18.0, 4.0, 15.0]
            .iter()
            .map(|&q| QoESpec { q_seconds: q, steepness: 2000.0 })
            .collect();
        let within: Vec<f64> = vec![9.0, 18.0, 4.0, 15.0];
        let over: Vec<f64> = vec![11.0, 5.0, 7.0, 20.0];
        assert_eq!(within.iter().sum::<f64>(), 46.0);
        assert_eq!(over.iter().sum::<f64>(), 43.0);
        let (c_within, z_within) = aggregate_qoe_hard(&within, &qoes);
        assert_eq!(c_within, 0.0);
        assert_eq!(z_within, 0);
        let (c_over, z_over) = aggregate_qoe_hard(&over, &qoes);
        assert_eq!(c_over, 9.0);
        assert_eq!(z_over, 3);
        // users exactly at their deadline sit on the sigmoid midpoint, so
        // the soft DCT sum still vanishes
        let (c_soft, _) = aggregate_qoe(&within, &qoes);
        assert!(c_soft.abs() < 1e-6);
    }

    #[test]
    fn soft_aggregates_vanish_strictly_inside_deadlines() {
        let qoes = vec![QoESpec { q_seconds: 10.0, steepness: 2000.0 }; 3];
        let delays = vec![8.0, 9.0, 7.5];
        let (c, z) = aggregate_qoe(&delays, &qoes);
        assert!(c.abs() < 1e-9);
        assert!(z < 1e-9);
    }

    #[test]
    fn monotonicity_properties() {
        let p = two_layer();
        let s = srv(1.2);
        // server delay strictly decreasing in r
        let d2 = server_delay(&p, 1, 2.0, &s).unwrap();
        let d3 = server_delay(&p, 1, 3.0, &s).unwrap();
        assert!(d3 < d2);
        // server energy strictly increasing in r
        let e2 = energy_server(&p, 1, 2.0, &s).unwrap();
        let e3 = energy_server(&p, 1, 3.0, &s).unwrap();
        assert!(e3 > e2);
        // uplink delay strictly decreasing in rate
        let (u1, _) = transmission_delays(&p, 1, 1e6, 1e6).unwrap();
        let (u2, _) = transmission_delays(&p, 1, 2e6, 1e6).unwrap();
        assert!(u2 < u1);
    }
}
