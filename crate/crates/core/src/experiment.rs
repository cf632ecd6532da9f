//! Seeded experiments: repeated initial design + sampler runs, aggregated
//! NRMSE-vs-cost curves, cost-ratio sweeps, batch and single-level
//! comparisons.

use serde::{Deserialize, Serialize};

use crate::design::{self, DesignOptions};
use crate::emulator::{EmulatorConfig, MultiLevelEmulator};
use crate::error::{Error, Result};
use crate::esloo;
use crate::gp::{self, MeanMode};
use crate::metrics;
use crate::par::Execution;
use crate::problems::{Simulator, TestProblem};
use crate::sampler::{self, BatchMode, RunLog, SamplerConfig, Stopping, TestSet};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub initial_sizes: Vec<usize>,
    pub emulator: EmulatorConfig,
    pub sampler: SamplerConfig,
    pub design: DesignOptions,
    pub seeds: Vec<u64>,
    /// Test-grid points per axis (`N = per_axis^p`).
    pub grid_per_axis: usize,
    /// How independent seeds are scheduled.
    pub seed_execution: Execution,
}

impl ExperimentConfig {
    pub fn new(problem: &TestProblem, initial_sizes: Vec<usize>, stopping: Stopping, seeds: Vec<u64>) -> Self {
        Self {
            initial_sizes,
            emulator: EmulatorConfig::new(problem.default_costs.clone()),
            sampler: SamplerConfig::new(stopping),
            design: DesignOptions::default(),
            seeds,
            grid_per_axis: metrics::default_grid_per_axis(problem.dim),
            seed_execution: Execution::Sequential,
        }
    }

    pub fn validate(&self, problem: &TestProblem) -> Result<()> {
        self.emulator.validate()?;
        self.sampler.validate()?;
        if self.emulator.levels() != problem.num_levels() {
            return Err(Error::InvalidConfig(format!(
                "costs: problem has {} levels, got {} costs",
                problem.num_levels(),
                self.emulator.levels()
            )));
        }
        if self.initial_sizes.len() != problem.num_levels() {
            return Err(Error::InvalidConfig(format!(
                "initial: expected {} sizes, got {}",
                problem.num_levels(),
                self.initial_sizes.len()
            )));
        }
        if self.initial_sizes.iter().any(|&n| n < 2) {
            return Err(Error::InvalidConfig("initial: every level needs at least 2 points".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds: need at least one seed".into()));
        }
        if self.grid_per_axis < 2 {
            return Err(Error::InvalidConfig("grid_per_axis: must be at least 2".into()));
        }
        Ok(())
    }

    pub fn test_set(&self, problem: &TestProblem) -> TestSet {
        TestSet::new(metrics::test_grid(problem.dim, self.grid_per_axis), |x| problem.truth(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub setup_cost: f64,
    pub log: RunLog,
}

impl SeedResult {
    pub fn initial_nrmse(&self) -> f64 {
        self.log.initial_nrmse.unwrap_or(f64::NAN)
    }

    pub fn final_nrmse(&self) -> f64 {
        self.log.final_nrmse().unwrap_or(f64::NAN)
    }
}

/// Median and 5%/95% quantiles across seeds at one cost checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub cost: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub seeds: Vec<SeedResult>,
    pub curve: Vec<BandPoint>,
    /// Per-seed picks per level.
    pub level_counts: Vec<Vec<usize>>,
}

impl ExperimentResult {
    pub fn final_nrmse(&self) -> Vec<f64> {
        self.seeds.iter().map(SeedResult::final_nrmse).collect()
    }

    pub fn initial_nrmse(&self) -> Vec<f64> {
        self.seeds.iter().map(SeedResult::initial_nrmse).collect()
    }

    /// Per-seed `1 - final/initial`.
    pub fn relative_reduction(&self) -> Vec<f64> {
        self.seeds.iter().map(|s| 1.0 - s.final_nrmse() / s.initial_nrmse()).collect()
    }

    pub fn counts_at(&self, level: usize) -> Vec<f64> {
        self.level_counts.iter().map(|c| c[level - 1] as f64).collect()
    }
}

/// Value of a right-continuous step curve at `cost`: the last point at or
/// before it.
pub fn step_value(curve: &[(f64, f64)], cost: f64) -> f64 {
    let mut v = curve.first().map_or(f64::NAN, |p| p.1);
    for &(c, y) in curve {
        if c <= cost + 1e-9 {
            v = y;
        } else {
            break;
        }
    }
    v
}

/// Checkpoints `0, step, 2 step, ...` up to and including `max_cost`.
pub fn checkpoints(step: f64, max_cost: f64) -> Vec<f64> {
    let n = (max_cost / step + 1e-9).floor() as usize;
    let mut out: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
    if max_cost - out[n] > 1e-9 {
        out.push(max_cost);
    }
    out
}

/// Median and 5%/95% bands of several step curves at common checkpoints.
pub fn aggregate(curves: &[Vec<(f64, f64)>], points: &[f64]) -> Vec<BandPoint> {
    points
        .iter()
        .map(|&cost| {
            let mut v: Vec<f64> = curves.iter().map(|c| step_value(c, cost)).collect();
            v.sort_by(f64::total_cmp);
            BandPoint {
                cost,
                q05: metrics::quantile_sorted(&v, 0.05),
                median: metrics::quantile_sorted(&v, 0.5),
                q95: metrics::quantile_sorted(&v, 0.95),
            }
        })
        .collect()
}

fn run_seed(problem: &TestProblem, cfg: &ExperimentConfig, test_set: &TestSet, seed_: u64) -> Result<SeedResult> {
    let init = design::initial_designs(
        problem,
        &cfg.initial_sizes,
        &cfg.emulator.costs,
        seed::derive(seed_, &[0]),
        &cfg.design,
    )?;
    let mut em_cfg = cfg.emulator.clone();
    em_cfg.seed = seed::derive(seed_, &[1]);
    let mut em = MultiLevelEmulator::new(em_cfg, init.levels)?;
    let mut s_cfg = cfg.sampler.clone();
    s_cfg.seed = seed::derive(seed_, &[2]);
    let log = sampler::run(&mut em, &s_cfg, problem, Some(test_set))?;
    Ok(SeedResult { seed: seed_, setup_cost: init.setup_cost, log })
}

/// Fresh initial design and a full sampler run per seed, then aggregated
/// curves over cost spent after the initial design.
pub fn run_experiment(problem: &TestProblem, cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate(problem)?;
    let test_set = cfg.test_set(problem);
    let seeds = cfg
        .seed_execution
        .map(&cfg.seeds, |&s| {
            run_seed(problem, cfg, &test_set, s).map_err(|e| Error::AtSeed { seed: s, source: Box::new(e) })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let curves: Vec<Vec<(f64, f64)>> = seeds.iter().map(|s| s.log.nrmse_curve()).collect();
    let max_cost = seeds.iter().map(|s| s.log.total_cost()).fold(0.0, f64::max);
    let curve = aggregate(&curves, &checkpoints(cfg.emulator.costs[0], max_cost));
    let level_counts = seeds.iter().map(|s| s.log.level_counts()).collect();
    Ok(ExperimentResult { seeds, curve, level_counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
}

impl Summary {
    pub fn of(data: &[f64]) -> Self {
        Self {
            mean: metrics::mean(data),
            q05: metrics::quantile(data, 0.05),
            median: metrics::median(data),
            q95: metrics::quantile(data, 0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: f64,
    pub top_level_count: Summary,
    pub final_nrmse: Summary,
}

/// For each ratio `r`, costs `(1, r)` and a fixed number of sampler runs.
pub fn cost_ratio_sweep(
    problem: &TestProblem,
    base: &ExperimentConfig,
    ratios: &[f64],
    iterations: usize,
) -> Result<Vec<SweepRow>> {
    if problem.num_levels() != 2 {
        return Err(Error::InvalidConfig("ratios: cost-ratio sweeps need a two-level problem".into()));
    }
    if ratios.is_empty() {
        return Err(Error::InvalidConfig("ratios: need at least one ratio".into()));
    }
    if let Some(r) = ratios.iter().find(|r| !(**r >= 1.0) || !r.is_finite()) {
        return Err(Error::InvalidConfig(format!("ratios: {r} is below 1")));
    }
    ratios
        .iter()
        .map(|&ratio| {
            let mut cfg = base.clone();
            cfg.emulator.costs = vec![1.0, ratio];
            cfg.sampler.stopping = Stopping::Iterations { iterations };
            let res = run_experiment(problem, &cfg)?;
            Ok(SweepRow {
                ratio,
                top_level_count: Summary::of(&res.counts_at(2)),
                final_nrmse: Summary::of(&res.final_nrmse()),
            })
        })
        .collect()
}

/// Sequential design at the top level only: single-level GP, single-level
/// ES-LOO surface, each run costing `C_L`. Returns the `(cost, nrmse)`
/// curve starting at cost 0.
#[allow(clippy::too_many_arguments)]
pub fn single_level_run(
    sim: &dyn Simulator,
    x0: Vec<Vec<f64>>,
    cost: f64,
    budget: f64,
    test_set: &TestSet,
    cfg: &ExperimentConfig,
    seed_: u64,
) -> Result<Vec<(f64, f64)>> {
    let level = sim.levels();
    let p = sim.dim();
    let mut x = x0;
    let mut y = x.iter().map(|xi| sim.evaluate(level, xi)).collect::<Result<Vec<_>>>()?;
    let lower = vec![0.0; p];
    let fit = |x: &[Vec<f64>], y: &[f64], k: usize| {
        gp::fit_gp(x, y, MeanMode::Constant, &lower, cfg.emulator.nugget, seed::derive(seed_, &[0, k as u64]), &cfg.emulator.fit)
    };
    let nrmse = |g: &gp::GaussianProcess| -> Result<f64> {
        let preds = cfg.sampler.execution.map(&test_set.points, |q| g.posterior(q).map(|s| s.mean));
        metrics::nrmse(&preds.into_iter().collect::<Result<Vec<_>>>()?, &test_set.values)
    };
    let mut g = fit(&x, &y, 0)?;
    let mut curve = vec![(0.0, nrmse(&g)?)];
    let mut spent = 0.0;
    let mut k = 0;
    while spent + cost <= budget + 1e-9 {
        k += 1;
        let surface = esloo::build_single_level_surface(&g, &x, &cfg.sampler.surface, seed::derive(seed_, &[1, k as u64]))?;
        let (xn, _) = surface.maximize_pei(&cfg.sampler.search, seed::derive(seed_, &[2, k as u64]));
        let yn = sim.evaluate(level, &xn).map_err(|e| Error::AtIteration { iteration: k, source: Box::new(e) })?;
        x.push(xn);
        y.push(yn);
        g = fit(&x, &y, k)?;
        spent += cost;
        curve.push((spent, nrmse(&g)?));
    }
    Ok(curve)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonPoint {
    pub cost: f64,
    pub multi_median: f64,
    pub single_median: f64,
    /// Median over seeds of `single - multi` (positive favours the
    /// multi-level emulator).
    pub difference_median: f64,
    pub difference_q05: f64,
    pub difference_q95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleVsMulti {
    pub budget: f64,
    pub multi: ExperimentResult,
    pub points: Vec<ComparisonPoint>,
}

impl SingleVsMulti {
    /// Median NRMSE difference at the checkpoint nearest `fraction * budget`.
    pub fn difference_at(&self, fraction: f64) -> f64 {
        let target = fraction * self.budget;
        self.points
            .iter()
            .min_by(|a, b| (a.cost - target).abs().total_cmp(&(b.cost - target).abs()))
            .map_or(f64::NAN, |p| p.difference_median)
    }
}

/// Multi-level sampling against top-level-only sampling under the same
/// post-setup budget. The single-level arm starts from a maximin LHC of
/// `max(2, floor(setup_cost / C_L))` top-level points so both arms pay
/// about the same setup cost.
pub fn single_vs_multi_comparison(problem: &TestProblem, cfg: &ExperimentConfig) -> Result<SingleVsMulti> {
    if problem.num_levels() < 2 {
        return Err(Error::InvalidConfig("problem: single-vs-multi needs at least 2 levels".into()));
    }
    let Stopping::Budget { budget } = cfg.sampler.stopping else {
        return Err(Error::InvalidConfig("budget: single-vs-multi needs a budget stopping rule".into()));
    };
    let multi = run_experiment(problem, cfg)?;
    let test_set = cfg.test_set(problem);
    let top_cost = *cfg.emulator.costs.last().expect("validated");
    let single = cfg
        .seed_execution
        .map(&multi.seeds, |s| {
            let n0 = ((s.setup_cost / top_cost).floor() as usize).max(2);
            let sd = seed::derive(s.seed, &[3]);
            let x0 = design::maximin_lhc(n0, problem.dim, seed::derive(sd, &[0]), cfg.design.lhc_restarts)?;
            single_level_run(problem, x0, top_cost, budget, &test_set, cfg, seed::derive(sd, &[1]))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let points = checkpoints(cfg.emulator.costs[0], budget)
        .into_iter()
        .map(|cost| {
            let m: Vec<f64> = multi.seeds.iter().map(|s| step_value(&s.log.nrmse_curve(), cost)).collect();
            let sl: Vec<f64> = single.iter().map(|c| step_value(c, cost)).collect();
            let d: Vec<f64> = sl.iter().zip(&m).map(|(a, b)| a - b).collect();
            ComparisonPoint {
                cost,
                multi_median: metrics::median(&m),
                single_median: metrics::median(&sl),
                difference_median: metrics::median(&d),
                difference_q05: metrics::quantile(&d, 0.05),
                difference_q95: metrics::quantile(&d, 0.95),
            }
        })
        .collect();
    Ok(SingleVsMulti { budget, multi, points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchComparison {
    pub batch_size: usize,
    pub batch_mode: BatchMode,
    pub sequential: ExperimentResult,
    pub batch: ExperimentResult,
}

impl BatchComparison {
    /// Both arms' bands at shared checkpoints `0, C_1, 2 C_1, ...`.
    pub fn curves(&self, step: f64) -> Vec<(BandPoint, BandPoint)> {
        let curves = |r: &ExperimentResult| r.seeds.iter().map(|s| s.log.nrmse_curve()).collect::<Vec<_>>();
        let max_cost = self
            .sequential
            .seeds
            .iter()
            .chain(&self.batch.seeds)
            .map(|s| s.log.total_cost())
            .fold(0.0, f64::max);
        let points = checkpoints(step, max_cost);
        aggregate(&curves(&self.sequential), &points).into_iter().zip(aggregate(&curves(&self.batch), &points)).collect()
    }

    pub fn final_median_gap(&self) -> f64 {
        (metrics::median(&self.batch.final_nrmse()) - metrics::median(&self.sequential.final_nrmse())).abs()
    }
}

/// The same experiment run sequentially (q = 1) and with batches of `q`.
pub fn batch_vs_sequential(
    problem: &TestProblem,
    cfg: &ExperimentConfig,
    q: usize,
    mode: BatchMode,
) -> Result<BatchComparison> {
    let mut seq = cfg.clone();
    seq.sampler.batch_size = 1;
    seq.sampler.batch_mode = BatchMode::Sequential;
    let mut bat = cfg.clone();
    bat.sampler.batch_size = q;
    bat.sampler.batch_mode = mode;
    Ok(BatchComparison {
        batch_size: q,
        batch_mode: mode,
        sequential: run_experiment(problem, &seq)?,
        batch: run_experiment(problem, &bat)?,
    })
}
