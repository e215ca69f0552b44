//! Analytic-versus-numeric gradient verification over random interior
//! points of seeded scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splitsim_core::channel::{self, ChannelState};
use splitsim_core::error::Result;
use splitsim_core::scenario::Scenario;
use splitsim_core::utility::{gradient, utility_unchecked, RelaxedAllocation};

use crate::config::Config;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Total interior points, spread over the config's seeds.
    pub points: usize,
    /// Relative tolerance per coordinate.
    pub tol: f64,
    /// Absolute disagreement floor below which a coordinate always passes.
    pub abs_floor: f64,
    /// Test hook: additive corruption applied to the first analytic
    /// coordinate, to prove the check can fail.
    pub corrupt: Option<f64>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { points: 100, tol: 1e-5, abs_floor: 1e-8, corrupt: None }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub points: usize,
    pub coords: usize,
    pub failures: usize,
    pub worst_rel: f64,
    pub tol: f64,
    /// Seeds whose channel realization left some user's rates collapsed on
    /// every draw; excluded from the comparison.
    pub skipped_channels: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Strictly interior random allocation whose link rates are bounded away
/// from collapse. Shares stay off the simplex faces and powers and compute
/// units inside their boxes. Draws where some user's rate collapses (deep
/// fade under strong cross-cell interference) are rejected: the objective
/// is smooth there, but the payload-over-rate terms get so stiff that
/// central differences cannot resolve them at any step size, putting such
/// points outside the numeric comparison domain.
pub fn sample_interior(
    sc: &Scenario,
    ch: &ChannelState,
    rng: &mut ChaCha8Rng,
) -> Option<RelaxedAllocation> {
    let floor = 0.05 * sc.topology.subchannel_up_hz().min(sc.topology.subchannel_down_hz());
    let active = vec![true; sc.n_users()];
    for _ in 0..200 {
        let a = sample_unconditioned(sc, rng);
        let min_rate = (0..sc.n_users())
            .map(|i| {
                channel::uplink_rate(&sc.topology, ch, &a, &active, i)
                    .min(channel::downlink_rate(&sc.topology, ch, &a, &active, i))
            })
            .fold(f64::MAX, f64::min);
        if min_rate >= floor {
            return Some(a);
        }
    }
    // A channel with a user in a deep fade on every subchannel never
    // passes the floor.
    None
}

fn sample_unconditioned(sc: &Scenario, rng: &mut ChaCha8Rng) -> RelaxedAllocation {
    let u = sc.n_users();
    let m = sc.topology.n_subchannels;
    let mut a = RelaxedAllocation::cold_start(sc);
    for i in 0..u {
        for betas in [&mut a.beta_up[i], &mut a.beta_down[i]] {
            let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            betas.iter_mut().zip(&raw).for_each(|(b, &x)| *b = x / sum);
        }
        let d = &sc.devices[i];
        let span = d.p_max_w - d.p_min_w;
        a.p_up[i] = rng.gen_range(d.p_min_w + 0.1 * span..d.p_max_w - 0.1 * span);
        let span = sc.server.p_max_w - sc.server.p_min_w;
        a.p_down[i] =
            rng.gen_range(sc.server.p_min_w + 0.1 * span..sc.server.p_max_w - 0.1 * span);
        let span = sc.server.r_max - sc.server.r_min;
        a.r[i] = rng.gen_range(sc.server.r_min + 0.1 * span..sc.server.r_max - 0.1 * span);
    }
    a
}

pub fn gradcheck(cfg: &Config, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let mut report = GradCheckReport {
        points: 0,
        coords: 0,
        failures: 0,
        worst_rel: 0.0,
        tol: opts.tol,
        skipped_channels: 0,
    };
    struct SeedCtx {
        sc: Scenario,
        ch: ChannelState,
        rng: ChaCha8Rng,
        usable: bool,
    }
    let mut ctxs: Vec<SeedCtx> = cfg
        .seeds
        .iter()
        .map(|&seed| -> Result<SeedCtx> {
            let sc = cfg.materialize(seed)?;
            let ch = sc.sample_channels(seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(20);
            Ok(SeedCtx { sc, ch, rng, usable: true })
        })
        .collect::<Result<_>>()?;

    // Round-robin over the seeds so a channel whose draws never condition
    // does not shrink the total point count.
    'outer: while report.points < opts.points {
        if !ctxs.iter().any(|c| c.usable) {
            break;
        }
        for ctx in ctxs.iter_mut().filter(|c| c.usable) {
            if report.points >= opts.points {
                break 'outer;
            }
            let SeedCtx { sc, ch, rng, usable } = ctx;
            let sc: &Scenario = sc;
            let u = sc.n_users();
            let m = sc.topology.n_subchannels;
            let Some(alloc) = sample_interior(sc, ch, rng) else {
                *usable = false;
                report.skipped_channels += 1;
                continue;
            };
            report.points += 1;
            let k = sc.profile.split_points[rng.gen_range(0..sc.profile.split_points.len())];
            let splits = vec![k; u];
            let mut analytic =
                gradient(&sc, &ch, &splits, &alloc, &sc.weights)?.to_flat();
            if let Some(bump) = opts.corrupt {
                analytic[0] += bump;
            }

            let flat = alloc.to_flat();
            let eval_at = |flat: &[f64]| -> Result<f64> {
                Ok(utility_unchecked(
                    &sc,
                    &ch,
                    &splits,
                    &RelaxedAllocation::from_flat(u, m, flat),
                    &sc.weights,
                )?
                .gamma)
            };
            for (idx, &x) in flat.iter().enumerate() {
                let central = |h: f64| -> Result<f64> {
                    let mut plus = flat.clone();
                    plus[idx] = x + h;
                    let mut minus = flat.clone();
                    minus[idx] = x - h;
                    Ok((eval_at(&plus)? - eval_at(&minus)?) / (2.0 * h))
                };
                // Step relative to the coordinate's unit scale: evaluation
                // noise stays below the absolute floor while the quadratic
                // truncation term is cancelled below.
                let h = 1e-6 * x.abs().max(1.0);
                let mut fd = central(h)?;
                let a = analytic[idx];
                report.coords += 1;
                let agree = |fd: f64| {
                    let scale: f64 = a.abs().max(fd.abs());
                    (a - fd).abs() <= (opts.tol * scale).max(opts.abs_floor)
                };
                if !agree(fd) {
                    // Cancel the quadratic truncation term before declaring
                    // a mismatch; stiff spots (payload over a weak link in
                    // the sigmoid band) otherwise drown the comparison.
                    fd = (4.0 * central(h / 2.0)? - fd) / 3.0;
                    if !agree(fd) {
                        report.failures += 1;
                    }
                }
                let scale = a.abs().max(fd.abs());
                let rel = if scale > 0.0 { (a - fd).abs() / scale } else { 0.0 };
                report.worst_rel = report.worst_rel.max(rel);
            }
        }
    }
    Ok(report)
}
