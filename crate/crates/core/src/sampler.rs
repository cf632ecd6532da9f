//! Cost-aware sequential design over all levels.
//!
//! Each round builds one ES-LOO surface per level, maximizes each level's
//! PEI, divides by the level's cost weight (`C_1` for level 1, `C_{l-1} +
//! C_l` above, since an upper-level run also needs the level below) and
//! runs the winner. Batch modes extend a round to `q` points by growing the
//! repulsion sets while keeping the surfaces frozen.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::emulator::MultiLevelEmulator;
use crate::error::{Error, Result};
use crate::esloo::{self, EsLooSurface, SearchOptions, SurfaceOptions};
use crate::metrics;
use crate::par::Execution;
use crate::problems::Simulator;
use crate::seed;

/// Budgets are compared with this slack to absorb float round-off.
const BUDGET_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BatchMode {
    /// One point per round; `batch_size` must be 1.
    #[default]
    Sequential,
    /// Every point of the batch runs at the first pick's level.
    SameLevel,
    /// Each point gets its own level by a full weighted selection.
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Stopping {
    /// Stop once the remaining budget cannot pay for any step.
    Budget { budget: f64 },
    /// Stop after this many new runs (design points).
    Iterations { iterations: usize },
    /// Stop once NRMSE drops to `target`, or after `max_iterations` runs.
    NrmseThreshold { target: f64, max_iterations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub stopping: Stopping,
    pub batch_size: usize,
    pub batch_mode: BatchMode,
    /// Every this many rounds, run a random point at an upper level instead
    /// (0 disables).
    pub exploration_interval: usize,
    pub seed: u64,
    pub surface: SurfaceOptions,
    pub search: SearchOptions,
    /// Used for per-level surface builds and NRMSE evaluation.
    pub execution: Execution,
}

impl SamplerConfig {
    pub fn new(stopping: Stopping) -> Self {
        Self {
            stopping,
            batch_size: 1,
            batch_mode: BatchMode::Sequential,
            exploration_interval: 10,
            seed: 0,
            surface: SurfaceOptions::default(),
            search: SearchOptions::default(),
            execution: Execution::Sequential,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch.size: must be at least 1".into()));
        }
        if self.batch_mode == BatchMode::Sequential && self.batch_size != 1 {
            return Err(Error::InvalidConfig("batch.mode: sequential mode needs batch size 1".into()));
        }
        match self.stopping {
            Stopping::Budget { budget } if !(budget > 0.0) || !budget.is_finite() => {
                Err(Error::InvalidConfig("budget: must be positive".into()))
            }
            Stopping::NrmseThreshold { target, .. } if !(target > 0.0) => {
                Err(Error::InvalidConfig("nrmse_target: must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Cost charged for one run at `level`: `C_1`, or `C_{l-1} + C_l`.
pub fn cost_weight(costs: &[f64], level: usize) -> f64 {
    if level == 1 {
        costs[0]
    } else {
        costs[level - 2] + costs[level - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub x: Vec<f64>,
    pub level: usize,
    pub weighted_pei: f64,
    pub raw_pei: f64,
    pub cost_charged: f64,
}

impl Proposal {
    fn new(x: Vec<f64>, level: usize, raw_pei: f64, costs: &[f64]) -> Self {
        let cost_charged = cost_weight(costs, level);
        Self { x, level, weighted_pei: raw_pei / cost_charged, raw_pei, cost_charged }
    }
}

/// Pick the best weighted proposal; ties go to the cheaper (lower) level.
fn select(candidates: &[Option<Proposal>]) -> Option<Proposal> {
    let mut best: Option<&Proposal> = None;
    for c in candidates.iter().flatten() {
        if best.is_none_or(|b| c.weighted_pei > b.weighted_pei) {
            best = Some(c);
        }
    }
    best.cloned()
}

fn surface_seed(seed_: u64, level: usize) -> u64 {
    seed::derive(seed_, &[level as u64, 0])
}

fn search_seed(seed_: u64, level: usize, round: usize) -> u64 {
    seed::derive(seed_, &[level as u64, 1, round as u64])
}

/// Build the ES-LOO surface of every level.
pub fn build_surfaces(em: &MultiLevelEmulator, cfg: &SamplerConfig, seed_: u64) -> Result<Vec<EsLooSurface>> {
    for (i, l) in em.levels().iter().enumerate() {
        if l.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "level {} has {} point(s); every level needs at least 2 before sampling",
                i + 1,
                l.len()
            )));
        }
    }
    cfg.execution
        .map_range(em.num_levels(), |i| esloo::build_surface(em, i + 1, &cfg.surface, surface_seed(seed_, i + 1)))
        .into_iter()
        .collect()
}

fn level_proposal(surface: &EsLooSurface, search: &SearchOptions, seed_: u64, round: usize, costs: &[f64]) -> Proposal {
    let level = surface.level();
    let (x, raw) = surface.maximize_pei(search, search_seed(seed_, level, round));
    Proposal::new(x, level, raw, costs)
}

/// Full selection over the given surfaces, restricted to `allowed` levels.
fn propose_on(
    surfaces: &[EsLooSurface],
    cfg: &SamplerConfig,
    costs: &[f64],
    seed_: u64,
    allowed: &[bool],
) -> Vec<Option<Proposal>> {
    cfg.execution.map(surfaces, |s| {
        allowed[s.level() - 1].then(|| level_proposal(s, &cfg.search, seed_, 0, costs))
    })
}

/// Choose the next `(x, level)` by maximizing cost-weighted PEI over all
/// levels.
pub fn propose(em: &MultiLevelEmulator, cfg: &SamplerConfig, seed_: u64) -> Result<Proposal> {
    let allowed = vec![true; em.num_levels()];
    let surfaces = build_surfaces(em, cfg, seed_)?;
    let per_level = propose_on(&surfaces, cfg, em.costs(), seed_, &allowed);
    Ok(select(&per_level).expect("all levels allowed"))
}

/// The per-level maxima that [`propose`] compares.
pub fn level_proposals(em: &MultiLevelEmulator, cfg: &SamplerConfig, seed_: u64) -> Result<Vec<Proposal>> {
    let allowed = vec![true; em.num_levels()];
    let surfaces = build_surfaces(em, cfg, seed_)?;
    Ok(propose_on(&surfaces, cfg, em.costs(), seed_, &allowed).into_iter().flatten().collect())
}

/// A round's picks plus the per-level maxima behind the first pick.
#[derive(Debug, Clone)]
struct Round {
    picks: Vec<Proposal>,
    first_round_maxima: Vec<Proposal>,
}

fn allowed_levels(costs: &[f64], remaining: f64) -> Vec<bool> {
    (1..=costs.len()).map(|l| cost_weight(costs, l) <= remaining + BUDGET_EPS).collect()
}

fn sequential_round(em: &MultiLevelEmulator, cfg: &SamplerConfig, seed_: u64, budget: f64) -> Result<Round> {
    let surfaces = build_surfaces(em, cfg, seed_)?;
    let per_level = propose_on(&surfaces, cfg, em.costs(), seed_, &allowed_levels(em.costs(), budget));
    Ok(Round {
        picks: select(&per_level).into_iter().collect(),
        first_round_maxima: per_level.into_iter().flatten().collect(),
    })
}

fn same_level_round(
    em: &MultiLevelEmulator,
    cfg: &SamplerConfig,
    q: usize,
    seed_: u64,
    budget: f64,
) -> Result<Round> {
    let costs = em.costs();
    let mut surfaces = build_surfaces(em, cfg, seed_)?;
    let per_level = propose_on(&surfaces, cfg, costs, seed_, &allowed_levels(costs, budget));
    let Some(first) = select(&per_level) else {
        return Ok(Round { picks: vec![], first_round_maxima: vec![] });
    };
    let level = first.level;
    let affordable = ((budget + BUDGET_EPS) / first.cost_charged).floor() as usize;
    let q = q.min(affordable.max(1));
    let surface = &mut surfaces[level - 1];
    let mut picks = vec![first];
    for k in 1..q {
        surface.add_repulsion_point(picks[k - 1].x.clone());
        picks.push(level_proposal(surface, &cfg.search, seed_, k, costs));
    }
    Ok(Round { picks, first_round_maxima: per_level.into_iter().flatten().collect() })
}

fn mixed_round(em: &MultiLevelEmulator, cfg: &SamplerConfig, q: usize, seed_: u64, budget: f64) -> Result<Round> {
    let costs = em.costs();
    let mut surfaces = build_surfaces(em, cfg, seed_)?;
    let mut remaining = budget;
    let mut per_level = propose_on(&surfaces, cfg, costs, seed_, &vec![true; costs.len()]);
    let first_round_maxima: Vec<Proposal> = per_level.iter().flatten().cloned().collect();
    let mut picks: Vec<Proposal> = Vec::with_capacity(q);
    for k in 0..q {
        let allowed = allowed_levels(costs, remaining);
        let eligible: Vec<Option<Proposal>> = per_level
            .iter()
            .zip(&allowed)
            .map(|(p, &ok)| if ok { p.clone() } else { None })
            .collect();
        let Some(pick) = select(&eligible) else { break };
        remaining -= pick.cost_charged;
        let level = pick.level;
        picks.push(pick);
        if k + 1 < q {
            let s = &mut surfaces[level - 1];
            s.add_repulsion_point(picks[k].x.clone());
            per_level[level - 1] = Some(level_proposal(s, &cfg.search, seed_, k + 1, costs));
        }
    }
    Ok(Round { picks, first_round_maxima })
}

/// `q` points at the level chosen by the first full selection; later
/// points maximize that level's PEI with the pending points repelled.
pub fn batch_same_level(em: &MultiLevelEmulator, cfg: &SamplerConfig, q: usize, seed_: u64) -> Result<Vec<Proposal>> {
    Ok(same_level_round(em, cfg, q.max(1), seed_, f64::INFINITY)?.picks)
}

/// `q` full weighted selections; each pick joins the repulsion set of its
/// own level only. Surfaces are not refit within the batch.
pub fn batch_mixed(em: &MultiLevelEmulator, cfg: &SamplerConfig, q: usize, seed_: u64) -> Result<Vec<Proposal>> {
    Ok(mixed_round(em, cfg, q.max(1), seed_, f64::INFINITY)?.picks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub lengthscales: Vec<f64>,
    pub variance: f64,
    pub mean_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// 1-based index of the run (design point) within the log.
    pub iteration: usize,
    /// 1-based selection round; batch members share a round.
    pub round: usize,
    pub level: usize,
    pub x: Vec<f64>,
    pub raw_pei: f64,
    pub weighted_pei: f64,
    pub cost_step: f64,
    pub cost_cum: f64,
    pub nrmse: Option<f64>,
    pub exploration: bool,
    /// Per-level maxima considered for the round's first pick.
    pub proposals: Vec<Proposal>,
    /// Hyperparameters of the level GP refit after this run.
    pub refit: Hyperparameters,
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunLog {
    pub levels: usize,
    pub initial_nrmse: Option<f64>,
    pub records: Vec<RunRecord>,
}

impl RunLog {
    pub fn new(levels: usize) -> Self {
        Self { levels, initial_nrmse: None, records: Vec::new() }
    }

    pub fn total_cost(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cost_cum)
    }

    pub fn level_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.levels];
        for r in &self.records {
            counts[r.level - 1] += 1;
        }
        counts
    }

    pub fn final_nrmse(&self) -> Option<f64> {
        self.records.last().map_or(self.initial_nrmse, |r| r.nrmse)
    }

    /// `(cumulative cost, nrmse)` points, starting at cost 0.
    pub fn nrmse_curve(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.records.len() + 1);
        if let Some(v) = self.initial_nrmse {
            out.push((0.0, v));
        }
        out.extend(self.records.iter().filter_map(|r| r.nrmse.map(|v| (r.cost_cum, v))));
        out
    }

    fn last_round(&self) -> usize {
        self.records.last().map_or(0, |r| r.round)
    }
}

/// Ground-truth values on a fixed test set, used for NRMSE tracking.
#[derive(Debug, Clone)]
pub struct TestSet {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl TestSet {
    pub fn new(points: Vec<Vec<f64>>, truth: impl Fn(&[f64]) -> f64) -> Self {
        let values = points.iter().map(|p| truth(p)).collect();
        Self { points, values }
    }

    pub fn nrmse(&self, em: &MultiLevelEmulator, execution: Execution) -> Result<f64> {
        let preds = execution
            .map(&self.points, |x| em.predict_mean(x))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        metrics::nrmse(&preds, &self.values)
    }
}

fn hyper_of(em: &MultiLevelEmulator, level: usize) -> Hyperparameters {
    let gp = em.gp(level).expect("valid level");
    Hyperparameters {
        lengthscales: gp.kernel().lengthscales.clone(),
        variance: gp.kernel().variance,
        mean_constant: gp.mean_constant(),
    }
}

/// Evaluate the simulator for one proposal: `f^(l)` and, above level 1,
/// `f^(l-1)`.
fn evaluate(sim: &dyn Simulator, p: &Proposal) -> Result<(f64, Option<f64>)> {
    let hi = sim.evaluate(p.level, &p.x)?;
    let lo = if p.level > 1 { Some(sim.evaluate(p.level - 1, &p.x)?) } else { None };
    Ok((hi, lo))
}

/// Remaining budget and run allowance before the next round.
fn remaining(cfg: &SamplerConfig, log: &RunLog) -> (f64, usize) {
    let spent = log.total_cost();
    let runs = log.records.len();
    match cfg.stopping {
        Stopping::Budget { budget } => (budget - spent, usize::MAX),
        Stopping::Iterations { iterations } => (f64::INFINITY, iterations.saturating_sub(runs)),
        Stopping::NrmseThreshold { max_iterations, .. } => (f64::INFINITY, max_iterations.saturating_sub(runs)),
    }
}

fn should_stop(cfg: &SamplerConfig, log: &RunLog, costs: &[f64]) -> bool {
    let (budget, runs) = remaining(cfg, log);
    if runs == 0 || budget + BUDGET_EPS < costs[0] {
        return true;
    }
    if let Stopping::NrmseThreshold { target, .. } = cfg.stopping {
        if log.final_nrmse().is_some_and(|v| v <= target) {
            return true;
        }
    }
    false
}

/// Run one selection round (a single point, a batch, or an exploration
/// point), evaluate the simulators, update the emulator and append to the
/// log. Nothing is mutated if any simulator call or refit fails.
pub fn step(
    em: &mut MultiLevelEmulator,
    cfg: &SamplerConfig,
    log: &mut RunLog,
    sim: &dyn Simulator,
    test_set: Option<&TestSet>,
) -> Result<()> {
    let round_no = log.last_round() + 1;
    let round_seed = seed::derive(cfg.seed, &[round_no as u64]);
    let costs = em.costs().to_vec();
    let (budget, runs_left) = remaining(cfg, log);
    let q = cfg.batch_size.min(runs_left).max(1);

    let explore_level = (em.num_levels() > 1
        && cfg.exploration_interval > 0
        && round_no.is_multiple_of(cfg.exploration_interval))
        .then(|| {
            let k = round_no / cfg.exploration_interval - 1;
            2 + k % (em.num_levels() - 1)
        })
        .filter(|&l| cost_weight(&costs, l) <= budget + BUDGET_EPS);

    let (round, exploration) = match explore_level {
        Some(level) => {
            let mut rng = seed::rng(seed::derive(round_seed, &[u64::MAX]));
            let x: Vec<f64> = (0..em.dim()).map(|_| rng.gen::<f64>()).collect();
            let p = Proposal { x, level, weighted_pei: 0.0, raw_pei: 0.0, cost_charged: cost_weight(&costs, level) };
            (Round { picks: vec![p], first_round_maxima: vec![] }, true)
        }
        None => {
            let r = match cfg.batch_mode {
                BatchMode::Sequential => sequential_round(em, cfg, round_seed, budget)?,
                BatchMode::SameLevel => same_level_round(em, cfg, q, round_seed, budget)?,
                BatchMode::Mixed => mixed_round(em, cfg, q, round_seed, budget)?,
            };
            (r, false)
        }
    };
    if round.picks.is_empty() {
        return Err(Error::BudgetTooSmall { budget, cheapest: costs[0] });
    }

    let outputs = round.picks.iter().map(|p| evaluate(sim, p)).collect::<Result<Vec<_>>>()?;

    let mut next = em.clone();
    let mut records = Vec::with_capacity(round.picks.len());
    let mut cum = log.total_cost();
    for (k, (p, (hi, lo))) in round.picks.iter().zip(outputs).enumerate() {
        next.add_run(&p.x, p.level, hi, lo)?;
        cum += p.cost_charged;
        let nrmse = test_set.map(|t| t.nrmse(&next, cfg.execution)).transpose()?;
        records.push(RunRecord {
            iteration: log.records.len() + k + 1,
            round: round_no,
            level: p.level,
            x: p.x.clone(),
            raw_pei: p.raw_pei,
            weighted_pei: p.weighted_pei,
            cost_step: p.cost_charged,
            cost_cum: cum,
            nrmse,
            exploration,
            proposals: if k == 0 { round.first_round_maxima.clone() } else { vec![] },
            refit: hyper_of(&next, p.level),
            rho: next.rho().to_vec(),
        });
    }
    *em = next;
    log.records.extend(records);
    Ok(())
}

/// Repeat [`step`] until the stopping rule fires.
pub fn run(
    em: &mut MultiLevelEmulator,
    cfg: &SamplerConfig,
    sim: &dyn Simulator,
    test_set: Option<&TestSet>,
) -> Result<RunLog> {
    cfg.validate()?;
    if sim.levels() != em.num_levels() || sim.dim() != em.dim() {
        return Err(Error::InvalidConfig("simulator does not match the emulator's levels or dimension".into()));
    }
    if matches!(cfg.stopping, Stopping::NrmseThreshold { .. }) && test_set.is_none() {
        return Err(Error::InvalidConfig("nrmse_target: stopping on NRMSE needs a test set".into()));
    }
    if let Stopping::Budget { budget } = cfg.stopping {
        if budget + BUDGET_EPS < em.costs()[0] {
            return Err(Error::BudgetTooSmall { budget, cheapest: em.costs()[0] });
        }
    }
    let mut log = RunLog::new(em.num_levels());
    log.initial_nrmse = test_set.map(|t| t.nrmse(em, cfg.execution)).transpose()?;
    while !should_stop(cfg, &log, em.costs()) {
        let iteration = log.records.len() + 1;
        step(em, cfg, &mut log, sim, test_set).map_err(|e| Error::AtIteration { iteration, source: Box::new(e) })?;
    }
    Ok(log)
}
