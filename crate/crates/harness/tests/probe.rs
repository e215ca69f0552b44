use splitsim_core::ligd::{gd_solve, GdParams, StepMode};
use splitsim_core::utility::RelaxedAllocation;
use splitsim_harness::config::Config;

#[test]
fn probe_seed4_escape() {
    let cfg = Config::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/tiny.toml"))
        .unwrap();
    let seed = 4u64;
    let sc = cfg.materialize(seed).unwrap();
    let ch = sc.sample_channels(seed).unwrap();
    for (eta, eps, max_iter) in [
        (0.5, 1e-6, 4000usize),
        (0.5, 1e-9, 40000),
        (2.0, 1e-9, 40000),
        (0.1, 1e-10, 100000),
    ] {
        let params = GdParams {
            eta,
            eps,
            max_iter,
            mode: StepMode::Backtracking,
            refine_splits: true,
        };
        let solve = gd_solve(&sc, &ch, 0, RelaxedAllocation::cold_start(&sc), &params).unwrap();
        println!(
            "eta {eta} eps {eps:.0e} cap {max_iter}: gamma {:.6} iters {} beta_up0 {:?}",
            solve.gamma_star, solve.iters, solve.alloc_star.beta_up[0]
        );
    }
    // corner starts: each user concentrated on its own subchannel
    let mut corner = RelaxedAllocation::cold_start(&sc);
    corner.beta_up[0] = vec![0.99, 0.01];
    corner.beta_up[1] = vec![0.01, 0.99];
    corner.beta_down[0] = vec![0.99, 0.01];
    corner.beta_down[1] = vec![0.01, 0.99];
    let params = GdParams {
        eta: 0.5,
        eps: 1e-9,
        max_iter: 40000,
        mode: StepMode::Backtracking,
        refine_splits: true,
    };
    let solve = gd_solve(&sc, &ch, 0, corner, &params).unwrap();
    println!(
        "corner start: gamma {:.6} iters {} beta_up {:?} p_up {:?} r {:?}",
        solve.gamma_star, solve.iters, solve.alloc_star.beta_up, solve.alloc_star.p_up, solve.alloc_star.r
    );
}
