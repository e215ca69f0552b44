use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use splitsim_core::ligd;
use splitsim_harness::config::Config;
use splitsim_harness::gradcheck::{gradcheck, GradCheckOptions};
use splitsim_harness::metrics::{
    self, RunMeta, BASELINE_RESOURCE_RULE, QOE_THRESHOLD_CONVENTION,
};
use splitsim_harness::oracle::oracle_check;
use splitsim_harness::runner::{self, Axis};

#[derive(Parser)]
#[command(
    name = "splitsim",
    about = "Simulate and optimize QoE-aware DNN split inference over NOMA edge networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every enabled strategy over the configured seeds.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed list with a single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run the strategy set along one axis.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// qoe_threshold | users | subchannels | workload
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run only the non-optimizing baselines.
    Baselines {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic gradients against central finite differences.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Compare the optimizer against the exhaustive grid oracle.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's relative gap bound.
        #[arg(long)]
        bound: Option<f64>,
    },
    /// Emit the optimizer's per-iteration trace for one seed.
    Trace {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(config: &PathBuf, seed: Option<u64>) -> anyhow::Result<Config> {
    let mut cfg = Config::load(config)
        .with_context(|| format!("loading config {}", config.display()))?;
    if let Some(seed) = seed {
        cfg.seeds = vec![seed];
    }
    Ok(cfg)
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run { config, seed, out } => {
            let cfg = load(&config, seed)?;
            let rows = runner::run(&cfg)?;
            metrics::write_rows(&out, &rows)?;
            metrics::write_meta(
                &out,
                &RunMeta {
                    scenario: cfg.name.clone(),
                    baseline: cfg.baseline.clone(),
                    axis: None,
                    values: None,
                    config_hash: cfg.hash(),
                    qoe_threshold_convention: QOE_THRESHOLD_CONVENTION.into(),
                    baseline_resource_rule: BASELINE_RESOURCE_RULE.into(),
                },
            )?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Sweep { config, seed, axis, values, out } => {
            if values.is_empty() {
                bail!("sweep needs at least one --values entry");
            }
            let cfg = load(&config, seed)?;
            let axis = Axis::from_str(&axis)?;
            let rows = runner::sweep(&cfg, axis, &values)?;
            metrics::write_rows(&out, &rows)?;
            metrics::write_meta(
                &out,
                &RunMeta {
                    scenario: cfg.name.clone(),
                    baseline: cfg.baseline.clone(),
                    axis: Some(axis.name().into()),
                    values: Some(values.clone()),
                    config_hash: cfg.hash(),
                    qoe_threshold_convention: QOE_THRESHOLD_CONVENTION.into(),
                    baseline_resource_rule: BASELINE_RESOURCE_RULE.into(),
                },
            )?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Baselines { config, seed, out } => {
            let mut cfg = load(&config, seed)?;
            cfg.strategies =
                vec!["device_only".into(), "edge_only".into(), "exhaustive_split".into()];
            let rows = runner::run(&cfg)?;
            metrics::write_rows(&out, &rows)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::Gradcheck { config, points, tol } => {
            let cfg = load(&config, None)?;
            let report =
                gradcheck(&cfg, &GradCheckOptions { points, tol, ..Default::default() })?;
            println!(
                "gradcheck: {} points, {} coordinates, worst relative error {:.3e} (tol {:.1e})",
                report.points, report.coords, report.worst_rel, report.tol
            );
            if !report.passed() {
                bail!("{} coordinates exceeded tolerance", report.failures);
            }
        }
        Command::Oracle { config, bound } => {
            let mut cfg = load(&config, None)?;
            if let Some(b) = bound {
                cfg.oracle.gap_bound = b;
            }
            let report = oracle_check(&cfg)?;
            for s in &report.per_seed {
                println!(
                    "seed {}: oracle {:.6} vs optimizer {:.6} gap {:+.4}% ({} oracle evaluations)",
                    s.seed,
                    s.oracle_gamma,
                    s.optimizer_gamma,
                    100.0 * s.gap,
                    s.evaluations
                );
            }
            println!("worst gap {:+.4}% bound {:.2}%", 100.0 * report.worst_gap, 100.0 * report.bound);
            if !report.passed() {
                bail!("oracle gap exceeded the bound");
            }
        }
        Command::Trace { config, seed, out } => {
            let cfg = load(&config, seed)?;
            let seed = cfg.seeds[0];
            let sc = cfg.materialize(seed)?;
            let ch = sc.sample_channels(seed)?;
            let result = ligd::li_gd(&sc, &ch)?;
            let mut w = csv::Writer::from_path(&out)?;
            w.write_record(["layer", "iter", "gamma", "grad_norm"])?;
            for solve in &result.per_layer {
                w.write_record([
                    solve.split.to_string(),
                    "0".into(),
                    format!("{}", solve.trace[0]),
                    String::new(),
                ])?;
                for i in 0..solve.iters {
                    w.write_record([
                        solve.split.to_string(),
                        (i + 1).to_string(),
                        format!("{}", solve.trace[i + 1]),
                        format!("{}", solve.grad_norms[i]),
                    ])?;
                }
            }
            w.flush()?;
            println!(
                "chose split {} with relaxed objective {:.6}, rounded {:.6}; trace in {}",
                result.chosen_split,
                result.gamma_relaxed,
                result.hard.gamma,
                out.display()
            );
        }
    }
    Ok(())
}
