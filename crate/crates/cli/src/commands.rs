use std::fs;
use std::path::Path;

use mlas_core::experiment::{
    batch_vs_sequential, cost_ratio_sweep, run_experiment, single_vs_multi_comparison, ExperimentConfig, ExperimentResult,
    Summary, SweepRow,
};
use mlas_core::metrics::median;
use mlas_core::output::{self, write_experiment};
use mlas_core::problems::find_problem;
use mlas_core::{BatchMode, Stopping};
use serde::Serialize;

use crate::config::{self, Resolved};
use crate::CliError;

pub const REPLICATION_PROBLEM: &str = "sine-quadratic-2d";
pub const REPLICATION_RATIOS: [f64; 6] = [1.0, 2.0, 8.0, 32.0, 100.0, 500.0];

fn load(path: &Path, out: Option<std::path::PathBuf>) -> Result<Resolved, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    config::parse(&text)?.resolve(out)
}

fn create(path: &Path) -> Result<fs::File, CliError> {
    Ok(fs::File::create(path).map_err(mlas_core::Error::from)?)
}

pub fn run(path: &Path, out: Option<std::path::PathBuf>, parallel: bool) -> Result<(), CliError> {
    let mut cfg = load(path, out)?;
    if parallel {
        cfg.set_parallel();
    }
    let result = run_experiment(&cfg.test_problem, &cfg.experiment)?;
    write_experiment(&cfg.out, &result, cfg.test_problem.dim, &cfg)?;
    eprintln!("wrote {} run logs to {}", result.seeds.len(), cfg.out.display());
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary<'a, C: Serialize> {
    config: &'a C,
    rows: &'a [SweepRow],
}

pub fn sweep(path: &Path) -> Result<(), CliError> {
    let cfg = load(path, None)?;
    let Some(s) = &cfg.sweep else {
        return Err(CliError::Config("sweep: missing [sweep] section with ratios".into()));
    };
    if cfg.test_problem.num_levels() != 2 {
        return Err(CliError::Config("problem: cost-ratio sweeps need a two-level problem".into()));
    }
    let rows = cost_ratio_sweep(&cfg.test_problem, &cfg.experiment, &s.ratios, s.iterations)?;
    fs::create_dir_all(&cfg.out).map_err(mlas_core::Error::from)?;
    output::write_sweep_csv(create(&cfg.out.join("sweep.csv"))?, &rows)?;
    let summary = SweepSummary { config: &cfg, rows: &rows };
    fs::write(cfg.out.join("summary.json"), output::to_json_string(&summary)?).map_err(mlas_core::Error::from)?;
    eprintln!("wrote sweep.csv ({} rows) to {}", rows.len(), cfg.out.display());
    Ok(())
}

/// Settings shared by every part of the replication bundle.
pub fn replication_config(n_seeds: usize) -> ExperimentConfig {
    let problem = find_problem(REPLICATION_PROBLEM).expect("registered");
    let mut cfg =
        ExperimentConfig::new(&problem, vec![8, 4], Stopping::Iterations { iterations: 30 }, (0..n_seeds as u64).collect());
    cfg.emulator.costs = vec![1.0, 8.0];
    cfg.sampler.exploration_interval = 0;
    cfg
}

pub fn with_budget(cfg: &ExperimentConfig, budget: f64) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.sampler.stopping = Stopping::Budget { budget };
    c
}

#[derive(Serialize)]
struct ReplicationEcho<'a> {
    problem: &'a str,
    sequential: &'a ExperimentConfig,
    batch_budget: f64,
    batch_size: usize,
    batch_mode: BatchMode,
    sweep_ratios: &'a [f64],
    sweep_iterations: usize,
}

#[derive(Serialize)]
struct ReplicationSummary<'a> {
    config: ReplicationEcho<'a>,
    initial_nrmse_median: f64,
    final_nrmse_median: f64,
    relative_reduction_median: f64,
    top_level_picks_median: f64,
    level_counts: &'a [Vec<usize>],
    batch_final_nrmse_median: f64,
    sequential_final_nrmse_median: f64,
    single_minus_multi_at_25_percent: f64,
    single_minus_multi_at_100_percent: f64,
    sweep: &'a [SweepRow],
}

fn final_median(r: &ExperimentResult) -> f64 {
    median(&r.final_nrmse())
}

pub fn replicate_paper(out: &Path, n_seeds: usize) -> Result<(), CliError> {
    if n_seeds == 0 {
        return Err(CliError::Config("seeds: need at least one seed".into()));
    }
    let problem = find_problem(REPLICATION_PROBLEM).expect("registered");
    let cfg = replication_config(n_seeds);
    let budget = 100.0;
    let q = 5;
    let mode = BatchMode::Mixed;
    let sweep_iterations = 50;

    eprintln!("replication: 30 iterations x {n_seeds} seeds");
    let seq = run_experiment(&problem, &cfg)?;
    write_experiment(&out.join("replication"), &seq, problem.dim, &cfg)?;

    eprintln!("batch vs sequential: budget {budget}, q = {q}");
    let batch = batch_vs_sequential(&problem, &with_budget(&cfg, budget), q, mode)?;
    write_experiment(&out.join("batch").join("sequential"), &batch.sequential, problem.dim, &cfg)?;
    write_experiment(&out.join("batch").join("batch"), &batch.batch, problem.dim, &cfg)?;
    output::write_batch_curves_csv(create(&out.join("batch_vs_sequential.csv"))?, &batch.curves(cfg.emulator.costs[0]))?;

    eprintln!("single vs multi: budget {budget}");
    let svm = single_vs_multi_comparison(&problem, &with_budget(&cfg, budget))?;
    output::write_comparison_csv(create(&out.join("single_vs_multi.csv"))?, &svm.points)?;

    eprintln!("cost-ratio sweep: {} ratios x {sweep_iterations} iterations", REPLICATION_RATIOS.len());
    let rows = cost_ratio_sweep(&problem, &cfg, &REPLICATION_RATIOS, sweep_iterations)?;
    output::write_sweep_csv(create(&out.join("sweep.csv"))?, &rows)?;

    let summary = ReplicationSummary {
        config: ReplicationEcho {
            problem: REPLICATION_PROBLEM,
            sequential: &cfg,
            batch_budget: budget,
            batch_size: q,
            batch_mode: mode,
            sweep_ratios: &REPLICATION_RATIOS,
            sweep_iterations,
        },
        initial_nrmse_median: median(&seq.initial_nrmse()),
        final_nrmse_median: final_median(&seq),
        relative_reduction_median: median(&seq.relative_reduction()),
        top_level_picks_median: Summary::of(&seq.counts_at(2)).median,
        level_counts: &seq.level_counts,
        batch_final_nrmse_median: final_median(&batch.batch),
        sequential_final_nrmse_median: final_median(&batch.sequential),
        single_minus_multi_at_25_percent: svm.difference_at(0.25),
        single_minus_multi_at_100_percent: svm.difference_at(1.0),
        sweep: &rows,
    };
    fs::write(out.join("summary.json"), output::to_json_string(&summary)?).map_err(mlas_core::Error::from)?;
    eprintln!("wrote results to {}", out.display());
    Ok(())
}
