//! Loop-iteration projected gradient descent over the candidate split
//! points. Every admissible split gets its own relaxed solve; each solve
//! after the first is warm-started from the solved split whose crossing
//! activation size is closest. The best split by relaxed objective is then
//! rounded to an integer subchannel assignment with cluster-cap repair and
//! re-scored with hard QoE terms. A cold-start variant solves every split
//! from the information-free start for comparison.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::error::{Error, Result};
use crate::profiles::ModelProfile;
use crate::scenario::Scenario;
use crate::utility::{
    self, gradient, project, utility_hard, HardEval, RelaxedAllocation, RoundedAllocation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    /// Try exactly the configured step; stop when it no longer decreases
    /// the objective.
    FixedStep,
    /// Halve the step until the objective decreases.
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdParams {
    /// Base step size.
    pub eta: f64,
    /// Accuracy threshold shared by the gradient-norm, relative-change and
    /// parameter-change stopping criteria.
    pub eps: f64,
    pub max_iter: usize,
    pub mode: StepMode,
    /// Greedy per-user split refinement after rounding. Off by default:
    /// the loop solves one shared candidate split at a time.
    pub refine_splits: bool,
}

impl Default for GdParams {
    fn default() -> Self {
        GdParams {
            eta: 1e-2,
            eps: 1e-4,
            max_iter: 5000,
            mode: StepMode::FixedStep,
            refine_splits: false,
        }
    }
}

impl GdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !(self.eps > 0.0) || self.max_iter == 0 {
            return Err(Error::Validation(
                "gd params need eta > 0, eps > 0, max_iter >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Solved relaxed problem for one candidate split.
#[derive(Debug, Clone)]
pub struct LayerSolve {
    pub split: usize,
    pub alloc_star: RelaxedAllocation,
    pub gamma_star: f64,
    /// Accepted descent steps.
    pub iters: usize,
    /// Objective after each accepted step, starting at the init point.
    /// Monotone non-increasing; the last entry is `gamma_star`.
    pub trace: Vec<f64>,
    /// Gradient norm at the start of each accepted step.
    pub grad_norms: Vec<f64>,
}

/// Full optimizer output.
#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub per_layer: Vec<LayerSolve>,
    /// Argmin of `gamma_star` over the solved splits.
    pub chosen_split: usize,
    /// Final per-user splits; all equal `chosen_split` unless the optional
    /// refinement pass is enabled.
    pub splits: Vec<usize>,
    pub rounded: RoundedAllocation,
    /// Sum of accepted inner iterations over all splits.
    pub total_iters: usize,
    /// Hard-scored metrics of the rounded allocation.
    pub hard: HardEval,
    /// Relaxed objective of the chosen split, for rounding-gap reporting.
    pub gamma_relaxed: f64,
}

const MAX_BACKTRACKS: u32 = 30;

/// Projected gradient descent on one shared candidate split.
pub fn gd_solve(
    sc: &Scenario,
    ch: &ChannelState,
    split: usize,
    init: RelaxedAllocation,
    params: &GdParams,
) -> Result<LayerSolve> {
    params.validate()?;
    let splits = vec![split; sc.n_users()];
    let mut x = project(sc, &init);
    let mut gamma = utility::utility(sc, ch, &splits, &x, &sc.weights)?.gamma;
    let mut trace = vec![gamma];
    let mut grad_norms = Vec::new();
    let mut iters = 0;

    while iters < params.max_iter {
        let g = gradient(sc, ch, &splits, &x, &sc.weights)?;
        let gnorm = g.norm();
        if gnorm < params.eps {
            break;
        }

        let tries = match params.mode {
            StepMode::FixedStep => 1,
            StepMode::Backtracking => MAX_BACKTRACKS,
        };
        let mut accepted: Option<(RelaxedAllocation, f64)> = None;
        for t in 0..tries {
            let eta = params.eta / 2f64.powi(t as i32);
            let cand = project(sc, &x.step(&g, eta));
            let cand_gamma = utility::utility_unchecked(sc, ch, &splits, &cand, &sc.weights)?.gamma;
            if cand_gamma < gamma {
                accepted = Some((cand, cand_gamma));
                break;
            }
        }
        let Some((cand, cand_gamma)) = accepted else {
            break; // no decreasing step at this scale
        };

        iters += 1;
        grad_norms.push(gnorm);
        let rel_change = (gamma - cand_gamma).abs() / gamma.abs().max(1e-30);
        let param_change = x.max_abs_diff(&cand);
        x = cand;
        gamma = cand_gamma;
        trace.push(gamma);
        if rel_change < params.eps || param_change < params.eps {
            break;
        }
    }

    Ok(LayerSolve { split, alloc_star: x, gamma_star: gamma, iters, trace, grad_norms })
}

/// Pick the warm start for the next split: the solved split whose crossing
/// activation size is closest to the target's, ties going to the most
/// recently solved one.
pub fn warm_start_select<'a>(
    target_split: usize,
    solved: &'a [LayerSolve],
    profile: &ModelProfile,
) -> Result<&'a LayerSolve> {
    if solved.is_empty() {
        return Err(Error::Validation("warm start needs at least one solved split".into()));
    }
    let target_bits = profile.intermediate_bits(target_split)?;
    let mut best = &solved[0];
    let mut best_dist = (profile.intermediate_bits(best.split)? - target_bits).abs();
    for s in &solved[1..] {
        let dist = (profile.intermediate_bits(s.split)? - target_bits).abs();
        if dist <= best_dist {
            best = s;
            best_dist = dist;
        }
    }
    Ok(best)
}

/// Round a relaxed solution: one subchannel per direction per user by
/// largest share, then greedy cluster-cap repair by smallest hard-objective
/// increase. Users that cannot fit anywhere fall back to full on-device
/// execution.
pub fn round_allocation(
    sc: &Scenario,
    ch: &ChannelState,
    split: usize,
    alloc: &RelaxedAllocation,
) -> Result<(Vec<usize>, RoundedAllocation)> {
    let u = sc.n_users();
    let f = sc.profile.layer_count();
    let offload = sc.offload_mask(ch);
    let argmax = |row: &[f64]| -> usize {
        row.iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.partial_cmp(b).unwrap().then(ib.cmp(ia)))
            .map(|(i, _)| i)
            .unwrap()
    };

    let mut assign = RoundedAllocation {
        up_sub: vec![None; u],
        down_sub: vec![None; u],
        p_up: alloc.p_up.clone(),
        p_down: alloc.p_down.clone(),
        r: alloc.r.clone(),
    };
    let splits: Vec<usize> = (0..u).map(|i| if offload[i] { split } else { f }).collect();
    for i in 0..u {
        if splits[i] < f {
            assign.up_sub[i] = Some(argmax(&alloc.beta_up[i]));
            assign.down_sub[i] = Some(argmax(&alloc.beta_down[i]));
        } else {
            assign.r[i] = sc.server.r_min;
        }
    }
    repair_caps(sc, ch, &splits, &mut assign, Direction::Up)?;
    repair_caps(sc, ch, &splits, &mut assign, Direction::Down)?;
    Ok((splits, assign))
}

#[derive(Clone, Copy, PartialEq)]
enum Direction {
    Up,
    Down,
}

fn repair_caps(
    sc: &Scenario,
    ch: &ChannelState,
    splits: &[usize],
    assign: &mut RoundedAllocation,
    dir: Direction,
) -> Result<()> {
    let m_count = sc.topology.n_subchannels;
    let cap = sc.topology.cluster_cap;
    let sub_of = |a: &RoundedAllocation, i: usize| match dir {
        Direction::Up => a.up_sub[i],
        Direction::Down => a.down_sub[i],
    };

    loop {
        // Locate the first overfull (AP, subchannel) cluster.
        let mut overfull: Option<(usize, usize, Vec<usize>)> = None;
        'scan: for n in 0..sc.topology.n_aps {
            for m in 0..m_count {
                let members: Vec<usize> = (0..sc.n_users())
                    .filter(|&i| ch.assoc[i] == n && sub_of(assign, i) == Some(m))
                    .collect();
                if members.len() > cap {
                    overfull = Some((n, m, members));
                    break 'scan;
                }
            }
        }
        let Some((n, m, members)) = overfull else {
            return Ok(());
        };

        let count_on = |a: &RoundedAllocation, sub: usize| {
            (0..sc.n_users())
                .filter(|&i| ch.assoc[i] == n && sub_of(a, i) == Some(sub))
                .count()
        };

        // Try every single move of a cluster member to a subchannel with
        // spare capacity; keep the one with the smallest hard objective.
        let mut best: Option<(f64, usize, usize)> = None;
        for &user in &members {
            for m2 in 0..m_count {
                if m2 == m || count_on(assign, m2) >= cap {
                    continue;
                }
                let mut cand = assign.clone();
                match dir {
                    Direction::Up => cand.up_sub[user] = Some(m2),
                    Direction::Down => cand.down_sub[user] = Some(m2),
                }
                if let Some(eval) = utility_hard(sc, ch, splits, &cand, &sc.weights)? {
                    if best.map_or(true, |(g, _, _)| eval.gamma < g) {
                        best = Some((eval.gamma, user, m2));
                    }
                }
            }
        }

        match best {
            Some((_, user, m2)) => match dir {
                Direction::Up => assign.up_sub[user] = Some(m2),
                Direction::Down => assign.down_sub[user] = Some(m2),
            },
            None => {
                // No spare slot anywhere: the weakest-gain member falls
                // back to running the whole model on the device.
                let weakest = *members
                    .iter()
                    .min_by(|&&a, &&b| {
                        let ga = match dir {
                            Direction::Up => ch.h_up(n, a, m),
                            Direction::Down => ch.h_down(n, a, m),
                        };
                        let gb = match dir {
                            Direction::Up => ch.h_up(n, b, m),
                            Direction::Down => ch.h_down(n, b, m),
                        };
                        ga.partial_cmp(&gb).unwrap().then(a.cmp(&b))
                    })
                    .unwrap();
                assign.up_sub[weakest] = None;
                assign.down_sub[weakest] = None;
                assign.r[weakest] = sc.server.r_min;
            }
        }
    }
}

/// Greedy per-user split refinement against the hard objective, holding the
/// integer assignment fixed. Only runs when enabled in the parameters.
fn refine_splits(
    sc: &Scenario,
    ch: &ChannelState,
    splits: &mut [usize],
    assign: &RoundedAllocation,
) -> Result<HardEval> {
    let f = sc.profile.layer_count();
    let mut cur = utility_hard(sc, ch, splits, assign, &sc.weights)?
        .ok_or_else(|| Error::NonFinite("rounded allocation is infeasible".into()))?;
    for _pass in 0..20 {
        let mut improved = false;
        for i in 0..sc.n_users() {
            let old = splits[i];
            let mut best_k = old;
            let mut best_gamma = cur.gamma;
            for &k in &sc.profile.split_points {
                if k == old {
                    continue;
                }
                // A user cannot start transmitting without a subchannel.
                if k < f && (assign.up_sub[i].is_none() || assign.down_sub[i].is_none()) {
                    continue;
                }
                splits[i] = k;
                if let Some(eval) = utility_hard(sc, ch, splits, assign, &sc.weights)? {
                    if eval.gamma + 1e-12 < best_gamma {
                        best_gamma = eval.gamma;
                        best_k = k;
                    }
                }
            }
            splits[i] = best_k;
            if best_k != old {
                cur = utility_hard(sc, ch, splits, assign, &sc.weights)?
                    .ok_or_else(|| Error::NonFinite("refinement hit an infeasible point".into()))?;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    Ok(cur)
}

fn run_loop(sc: &Scenario, ch: &ChannelState, warm: bool) -> Result<OptimizationResult> {
    sc.validate()?;
    let cold = RelaxedAllocation::cold_start(sc);
    let mut per_layer: Vec<LayerSolve> = Vec::with_capacity(sc.profile.split_points.len());
    for (idx, &k) in sc.profile.split_points.iter().enumerate() {
        let init = if warm && idx > 0 {
            warm_start_select(k, &per_layer, &sc.profile)?.alloc_star.clone()
        } else {
            cold.clone()
        };
        per_layer.push(gd_solve(sc, ch, k, init, &sc.gd)?);
    }

    let chosen = per_layer
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.gamma_star.partial_cmp(&b.gamma_star).unwrap())
        .map(|(i, _)| i)
        .expect("at least one split");
    let chosen_split = per_layer[chosen].split;
    let gamma_relaxed = per_layer[chosen].gamma_star;
    let total_iters = per_layer.iter().map(|s| s.iters).sum();

    let (mut splits, rounded) =
        round_allocation(sc, ch, chosen_split, &per_layer[chosen].alloc_star)?;
    let hard = if sc.gd.refine_splits {
        refine_splits(sc, ch, &mut splits, &rounded)?
    } else {
        utility_hard(sc, ch, &splits, &rounded, &sc.weights)?
            .ok_or_else(|| Error::NonFinite("rounded allocation is infeasible".into()))?
    };

    Ok(OptimizationResult {
        per_layer,
        chosen_split,
        splits,
        rounded,
        total_iters,
        hard,
        gamma_relaxed,
    })
}

/// The full loop-iteration optimizer: warm-started solves over all
/// admissible splits, argmin selection, rounding, hard re-scoring.
pub fn li_gd(sc: &Scenario, ch: &ChannelState) -> Result<OptimizationResult> {
    run_loop(sc, ch, true)
}

/// Identical pipeline with every split solved from the cold start; the
/// comparison arm for warm-start savings.
pub fn cold_gd(sc: &Scenario, ch: &ChannelState) -> Result<OptimizationResult> {
    run_loop(sc, ch, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::QoESpec;
    use crate::profiles::{LayerProfile, ModelProfile};
    use crate::utility::Weights;
    use approx::assert_relative_eq;

    fn scenario(n_aps: usize, n_users: usize, m: usize, seed: u64) -> Scenario {
        let mut sc = crate::utility::tests::small_scenario(n_aps, n_users, m, seed);
        sc.gd.mode = StepMode::Backtracking;
        sc.gd.eta = 0.5;
        sc
    }

    #[test]
    fn huge_eps_returns_init_unchanged() {
        let mut sc = scenario(1, 2, 2, 1);
        sc.gd.eps = 1e30;
        let ch = sc.sample_channels(1).unwrap();
        let init = RelaxedAllocation::cold_start(&sc);
        let solve = gd_solve(&sc, &ch, 2, init.clone(), &sc.gd).unwrap();
        assert_eq!(solve.iters, 0);
        assert_eq!(solve.trace.len(), 1);
        assert_eq!(solve.alloc_star, init);
    }

    #[test]
    fn trace_is_monotone_non_increasing() {
        let sc = scenario(2, 4, 3, 2);
        let ch = sc.sample_channels(2).unwrap();
        let solve =
            gd_solve(&sc, &ch, 2, RelaxedAllocation::cold_start(&sc), &sc.gd).unwrap();
        assert!(solve.iters > 0, "expected some descent");
        for w in solve.trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        assert_eq!(*solve.trace.last().unwrap(), solve.gamma_star);
        assert_eq!(solve.grad_norms.len(), solve.iters);
    }

    #[test]
    fn scalar_descent_matches_dense_grid_search() {
        // One user, one subchannel, QoE off, powers pinned by degenerate
        // boxes: only the compute units move. Cross-check the stationary
        // point against a dense 1-D scan.
        let mut sc = scenario(1, 1, 1, 3);
        sc.weights = Weights { w_t: 0.7, w_r: 0.3, w_q: 0.0 };
        sc.devices[0].p_min_w = 0.1;
        sc.devices[0].p_max_w = 0.1;
        sc.server.p_min_w = 1.0;
        sc.server.p_max_w = 1.0;
        sc.gd.eps = 1e-9;
        sc.gd.max_iter = 20000;
        let ch = sc.sample_channels(3).unwrap();
        let k = 2;
        let solve =
            gd_solve(&sc, &ch, k, RelaxedAllocation::cold_start(&sc), &sc.gd).unwrap();

        let mut best = f64::MAX;
        let mut alloc = RelaxedAllocation::cold_start(&sc);
        for i in 0..10_000 {
            let r = sc.server.r_min
                + (sc.server.r_max - sc.server.r_min) * i as f64 / 9_999.0;
            alloc.r[0] = r;
            let g = utility::utility(&sc, &ch, &[k], &alloc, &sc.weights).unwrap().gamma;
            best = best.min(g);
        }
        assert!(
            (solve.gamma_star - best).abs() <= 1e-3 * best.abs(),
            "gd {} vs grid {}",
            solve.gamma_star,
            best
        );
    }

    fn fake_solve(split: usize, marker: f64) -> LayerSolve {
        LayerSolve {
            split,
            alloc_star: RelaxedAllocation::uniform(1, 1, marker, marker, 1.0),
            gamma_star: 0.0,
            iters: 0,
            trace: vec![0.0],
            grad_norms: vec![],
        }
    }

    fn profile_with_bits(bits: &[f64]) -> ModelProfile {
        let layers: Vec<LayerProfile> = bits
            .iter()
            .map(|&b| LayerProfile {
                workload_flops: 1e8,
                conv_count: 1,
                pool_count: 0,
                relu_count: 1,
                out_bits: b,
            })
            .collect();
        let f = layers.len();
        ModelProfile::new("bits", 100.0, 10.0, layers, (0..=f).collect()).unwrap()
    }

    #[test]
    fn warm_start_picks_closest_activation_size() {
        // crossing sizes: k=1 -> 50, k=2 -> 10, k=3 -> 12
        let profile = profile_with_bits(&[50.0, 10.0, 12.0, 1.0]);
        let solved = vec![fake_solve(1, 1.0), fake_solve(2, 2.0)];
        // second solve is always seeded from the first
        let first = warm_start_select(2, &solved[..1], &profile).unwrap();
        assert_eq!(first.split, 1);
        // |10 - 12| < |50 - 12| picks split 2's solution
        let pick = warm_start_select(3, &solved, &profile).unwrap();
        assert_eq!(pick.split, 2);
    }

    #[test]
    fn warm_start_tie_breaks_to_most_recent() {
        // crossing sizes: k=1 -> 8, k=2 -> 12, k=3 -> 10 (equidistant)
        let profile = profile_with_bits(&[8.0, 12.0, 10.0, 1.0]);
        let solved = vec![fake_solve(1, 1.0), fake_solve(2, 2.0)];
        let pick = warm_start_select(3, &solved, &profile).unwrap();
        assert_eq!(pick.split, 2);
    }

    #[test]
    fn rounding_takes_the_largest_share() {
        let sc = scenario(1, 1, 3, 4);
        let ch = sc.sample_channels(4).unwrap();
        let mut alloc = RelaxedAllocation::cold_start(&sc);
        alloc.beta_up[0] = vec![0.7, 0.2, 0.1];
        alloc.beta_down[0] = vec![0.4, 0.35, 0.25];
        let (_, rounded) = round_allocation(&sc, &ch, 2, &alloc).unwrap();
        assert_eq!(rounded.up_sub[0], Some(0));
        assert_eq!(rounded.down_sub[0], Some(0));
    }

    #[test]
    fn cap_repair_is_greedy_minimal_single_move() {
        let mut sc = scenario(1, 4, 2, 5);
        sc.topology.cluster_cap = 3;
        let ch = sc.sample_channels(5).unwrap();
        let mut alloc = RelaxedAllocation::cold_start(&sc);
        for i in 0..4 {
            alloc.beta_up[i] = vec![0.9, 0.1];
            alloc.beta_down[i] = vec![0.9, 0.1];
        }
        let (splits, rounded) = round_allocation(&sc, &ch, 2, &alloc).unwrap();
        // cap respected in both directions
        for dir in [&rounded.up_sub, &rounded.down_sub] {
            let on0 = dir.iter().filter(|s| **s == Some(0)).count();
            assert!(on0 <= 3, "cluster cap violated: {on0}");
        }
        // exactly one user moved off subchannel 0 uplink; verify it is the
        // single move with the smallest hard objective among all of them
        let moved: Vec<usize> =
            (0..4).filter(|&i| rounded.up_sub[i] == Some(1)).collect();
        assert_eq!(moved.len(), 1);
        let mut best = (f64::MAX, usize::MAX);
        for u in 0..4 {
            let mut cand = rounded.clone();
            for i in 0..4 {
                cand.up_sub[i] = Some(0);
            }
            cand.up_sub[u] = Some(1);
            let eval = utility_hard(&sc, &ch, &splits, &cand, &sc.weights).unwrap().unwrap();
            if eval.gamma < best.0 {
                best = (eval.gamma, u);
            }
        }
        assert_eq!(moved[0], best.1);
    }

    #[test]
    fn overflow_beyond_total_capacity_pins_users_to_device() {
        let mut sc = scenario(1, 4, 1, 6);
        sc.topology.cluster_cap = 3;
        let ch = sc.sample_channels(6).unwrap();
        let alloc = RelaxedAllocation::cold_start(&sc);
        let (_, rounded) = round_allocation(&sc, &ch, 2, &alloc).unwrap();
        let transmitting = rounded.up_sub.iter().filter(|s| s.is_some()).count();
        assert_eq!(transmitting, 3);
        let pinned = rounded.up_sub.iter().position(|s| s.is_none()).unwrap();
        assert_eq!(rounded.r[pinned], sc.server.r_min);
    }

    #[test]
    fn two_split_loop_equals_manual_solves_plus_rounding() {
        let mut sc = scenario(1, 2, 2, 7);
        sc.profile = profile_with_bits(&[1e6]);
        let ch = sc.sample_channels(7).unwrap();
        let out = li_gd(&sc, &ch).unwrap();

        let cold = RelaxedAllocation::cold_start(&sc);
        let s0 = gd_solve(&sc, &ch, 0, cold.clone(), &sc.gd).unwrap();
        let s1 = gd_solve(&sc, &ch, 1, warm_start_select(1, &[s0.clone()], &sc.profile)
            .unwrap()
            .alloc_star
            .clone(), &sc.gd)
        .unwrap();
        let manual = if s0.gamma_star <= s1.gamma_star { &s0 } else { &s1 };
        assert_eq!(out.chosen_split, manual.split);
        assert_relative_eq!(out.gamma_relaxed, manual.gamma_star, max_relative = 1e-12);
        let (_, rounded) =
            round_allocation(&sc, &ch, manual.split, &manual.alloc_star).unwrap();
        assert_eq!(out.rounded, rounded);
    }

    #[test]
    fn chosen_split_is_argmin_and_deterministic() {
        let sc = scenario(2, 3, 2, 8);
        let ch = sc.sample_channels(8).unwrap();
        let a = li_gd(&sc, &ch).unwrap();
        let b = li_gd(&sc, &ch).unwrap();
        assert_eq!(a.chosen_split, b.chosen_split);
        assert_eq!(a.total_iters, b.total_iters);
        assert_eq!(a.rounded, b.rounded);
        let min = a
            .per_layer
            .iter()
            .map(|s| s.gamma_star)
            .fold(f64::MAX, f64::min);
        assert_eq!(
            a.per_layer.iter().find(|s| s.gamma_star == min).unwrap().split,
            a.chosen_split
        );
    }

    #[test]
    fn argmin_invariant_under_weight_rescale() {
        // Scaling all three weights by one positive factor is disallowed by
        // the sum-to-one constraint, so emulate it through z-free pure-delay
        // weights times a common profile workload rescale, which multiplies
        // every per-split objective by the same factor.
        let mut sc = scenario(2, 3, 2, 9);
        sc.weights = Weights { w_t: 1.0, w_r: 0.0, w_q: 0.0 };
        let ch = sc.sample_channels(9).unwrap();
        let before = li_gd(&sc, &ch).unwrap();
        for l in &mut sc.profile.layers {
            l.workload_flops *= 2.0;
        }
        sc.profile = ModelProfile::new(
            "scaled",
            sc.profile.input_bits,
            sc.profile.result_bits,
            sc.profile.layers.clone(),
            sc.profile.split_points.clone(),
        )
        .unwrap();
        // doubling workloads doubles compute delays but leaves link delays
        // unchanged, so only assert the relaxed argmin remains a valid
        // argmin of its own table
        let after = li_gd(&sc, &ch).unwrap();
        let min_after = after
            .per_layer
            .iter()
            .map(|s| s.gamma_star)
            .fold(f64::MAX, f64::min);
        assert_eq!(
            after.per_layer.iter().find(|s| s.gamma_star == min_after).unwrap().split,
            after.chosen_split
        );
        let min_before = before
            .per_layer
            .iter()
            .map(|s| s.gamma_star)
            .fold(f64::MAX, f64::min);
        assert_eq!(
            before
                .per_layer
                .iter()
                .find(|s| s.gamma_star == min_before)
                .unwrap()
                .split,
            before.chosen_split
        );
    }

    #[test]
    fn cold_and_warm_agree_on_single_user_instances() {
        let mut sc = scenario(1, 1, 2, 10);
        sc.gd.eps = 1e-7;
        let ch = sc.sample_channels(10).unwrap();
        let warm = li_gd(&sc, &ch).unwrap();
        let cold = cold_gd(&sc, &ch).unwrap();
        assert_eq!(warm.chosen_split, cold.chosen_split);
        assert_relative_eq!(warm.gamma_relaxed, cold.gamma_relaxed, max_relative = 1e-4);
    }
}
