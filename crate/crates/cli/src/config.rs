//! TOML experiment configuration and its resolution into core settings.

use std::path::PathBuf;

use mlas_core::design::DesignOptions;
use mlas_core::experiment::ExperimentConfig;
use mlas_core::problems::{find_problem, Term, TestProblem};
use mlas_core::{BatchMode, EmulatorConfig, Execution, FitOptions, MeanMode, RhoMode, SamplerConfig, Stopping};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSpec {
    Named(String),
    Inline { name: String, dim: usize, levels: Vec<Vec<Term>> },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingSection {
    pub budget: Option<f64>,
    pub iterations: Option<usize>,
    pub nrmse_target: Option<f64>,
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhoSection {
    #[serde(default)]
    pub mode: RhoMode,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSection {
    #[serde(default = "one")]
    pub size: usize,
    /// Defaults to same-level for `size > 1`, sequential otherwise.
    pub mode: Option<BatchMode>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub ratios: Vec<f64>,
    #[serde(default = "sweep_iterations")]
    pub iterations: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub n_starts: Option<usize>,
    pub max_evals: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub candidates_per_dim: Option<usize>,
    pub n_refine: Option<usize>,
    pub refine_evals: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSection {
    pub mean_mode: Option<MeanMode>,
    pub log_transform: Option<bool>,
    #[serde(default)]
    pub extra_pseudo_points: Vec<Vec<f64>>,
}

fn one() -> usize {
    1
}

fn sweep_iterations() -> usize {
    50
}

/// The file as written by the user.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub problem: ProblemSpec,
    pub costs: Vec<f64>,
    pub initial: Vec<usize>,
    pub seeds: Option<Vec<u64>>,
    pub n_seeds: Option<usize>,
    pub grid_per_axis: Option<usize>,
    pub exploration_interval: Option<usize>,
    pub mean_modes: Option<Vec<MeanMode>>,
    pub lhc_restarts: Option<usize>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub stopping: StoppingSection,
    pub rho: Option<RhoSection>,
    pub batch: Option<BatchSection>,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub surface: SurfaceSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub ratios: Vec<f64>,
    pub iterations: usize,
}

/// Fully resolved settings; this is what gets echoed into `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub problem: ProblemSpec,
    pub out: PathBuf,
    pub experiment: ExperimentConfig,
    pub sweep: Option<SweepSettings>,
    #[serde(skip)]
    pub test_problem: TestProblem,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn parse(text: &str) -> Result<FileConfig, CliError> {
    toml::from_str(text).map_err(|e| invalid(e.to_string()))
}

fn build_problem(spec: &ProblemSpec, costs: &[f64]) -> Result<TestProblem, CliError> {
    match spec {
        ProblemSpec::Named(name) => find_problem(name).ok_or_else(|| invalid(format!("problem: unknown problem `{name}`"))),
        ProblemSpec::Inline { name, dim, levels } => {
            TestProblem::from_terms(name, *dim, levels.clone(), costs.to_vec()).map_err(|e| invalid(e.to_string()))
        }
    }
}

fn stopping(s: &StoppingSection) -> Result<Stopping, CliError> {
    let rules = [s.budget.is_some(), s.iterations.is_some(), s.nrmse_target.is_some()];
    if rules.iter().filter(|r| **r).count() != 1 {
        return Err(invalid("stopping: set exactly one of budget, iterations, nrmse_target"));
    }
    if s.max_iterations.is_some() && s.nrmse_target.is_none() {
        return Err(invalid("stopping.max_iterations: only valid with nrmse_target"));
    }
    Ok(if let Some(budget) = s.budget {
        Stopping::Budget { budget }
    } else if let Some(iterations) = s.iterations {
        if iterations == 0 {
            return Err(invalid("stopping.iterations: must be positive"));
        }
        Stopping::Iterations { iterations }
    } else {
        Stopping::NrmseThreshold {
            target: s.nrmse_target.expect("counted above"),
            max_iterations: s.max_iterations.unwrap_or(200),
        }
    })
}

impl FileConfig {
    /// Check every field and build the core configuration. No simulator is
    /// called here.
    pub fn resolve(&self, out_override: Option<PathBuf>) -> Result<Resolved, CliError> {
        let problem = build_problem(&self.problem, &self.costs)?;
        if self.costs.len() != problem.num_levels() {
            return Err(invalid(format!(
                "costs: problem `{}` has {} levels, got {} costs",
                problem.name,
                problem.num_levels(),
                self.costs.len()
            )));
        }
        let seeds = match (&self.seeds, self.n_seeds) {
            (Some(_), Some(_)) => return Err(invalid("seeds: give either seeds or n_seeds, not both")),
            (Some(s), None) => s.clone(),
            (None, Some(n)) => (0..n as u64).collect(),
            (None, None) => vec![0],
        };

        let mut emulator = EmulatorConfig::new(self.costs.clone());
        if let Some(rho) = &self.rho {
            emulator.rho_mode = rho.mode;
            if let Some(v) = &rho.values {
                emulator.rho = v.clone();
            }
        }
        if let Some(m) = &self.mean_modes {
            emulator.mean_modes = m.clone();
        }
        let mut fit = FitOptions::default();
        if let Some(n) = self.fit.n_starts {
            if n == 0 {
                return Err(invalid("fit.n_starts: must be positive"));
            }
            fit.n_starts = n;
        }
        if let Some(n) = self.fit.max_evals {
            fit.max_evals = n;
        }
        emulator.fit = fit;

        let mut sampler = SamplerConfig::new(stopping(&self.stopping)?);
        if let Some(b) = &self.batch {
            sampler.batch_size = b.size;
            sampler.batch_mode = b.mode.unwrap_or(if b.size > 1 { BatchMode::SameLevel } else { BatchMode::Sequential });
        }
        if let Some(k) = self.exploration_interval {
            sampler.exploration_interval = k;
        }
        sampler.surface.fit = fit;
        if let Some(m) = self.surface.mean_mode {
            sampler.surface.mean_mode = m;
        }
        if let Some(t) = self.surface.log_transform {
            sampler.surface.log_transform = t;
        }
        for (i, p) in self.surface.extra_pseudo_points.iter().enumerate() {
            if p.len() != problem.dim || p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(invalid(format!("surface.extra_pseudo_points[{i}]: must be a point in the unit cube")));
            }
        }
        sampler.surface.extra_pseudo_points = self.surface.extra_pseudo_points.clone();
        if let Some(n) = self.search.candidates_per_dim {
            sampler.search.candidates_per_dim = n;
        }
        if let Some(n) = self.search.n_refine {
            sampler.search.n_refine = n;
        }
        if let Some(n) = self.search.refine_evals {
            sampler.search.refine_evals = n;
        }
        if sampler.search.candidates_per_dim == 0 {
            return Err(invalid("search.candidates_per_dim: must be positive"));
        }

        let mut design = DesignOptions { fit, surface: sampler.surface.clone(), search: sampler.search, ..Default::default() };
        if let Some(r) = self.lhc_restarts {
            if r == 0 {
                return Err(invalid("lhc_restarts: must be positive"));
            }
            design.lhc_restarts = r;
        }

        let mut experiment = ExperimentConfig::new(&problem, self.initial.clone(), sampler.stopping, seeds);
        experiment.emulator = emulator;
        experiment.sampler = sampler;
        experiment.design = design;
        if let Some(g) = self.grid_per_axis {
            experiment.grid_per_axis = g;
        }
        experiment.validate(&problem).map_err(|e| invalid(e.to_string()))?;

        let sweep = match &self.sweep {
            Some(s) => {
                if s.ratios.is_empty() {
                    return Err(invalid("sweep.ratios: need at least one ratio"));
                }
                if let Some(r) = s.ratios.iter().find(|r| !(**r >= 1.0) || !r.is_finite()) {
                    return Err(invalid(format!("sweep.ratios: {r} is below 1")));
                }
                if s.iterations == 0 {
                    return Err(invalid("sweep.iterations: must be positive"));
                }
                Some(SweepSettings { ratios: s.ratios.clone(), iterations: s.iterations })
            }
            None => None,
        };

        let out = out_override.or_else(|| self.out.clone()).unwrap_or_else(|| PathBuf::from("mlas-out"));
        Ok(Resolved { problem: self.problem.clone(), out, experiment, sweep, test_problem: problem })
    }
}

impl Resolved {
    pub fn set_parallel(&mut self) {
        self.experiment.seed_execution = Execution::Parallel;
    }
}
