//! Autoregressive multi-level emulator.
//!
//! Level 1 is a GP on raw outputs; each level `l > 1` is an independent GP on
//! the discrepancy `y^(l) - rho^(l-1) * y^(l-1)` evaluated on level `l`'s own
//! design. Designs are not nested: the lower-level outputs used to form a
//! discrepancy never enter the lower level's training set.
//!
//! Levels are numbered from 1 in the public API.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{self, FitOptions, GaussianProcess, MeanMode, PosteriorSummary};
use crate::kernel::KernelSpec;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RhoMode {
    #[default]
    Fixed,
    /// No-intercept least squares, refreshed whenever the level gains a run.
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmulatorConfig {
    /// Per-level run costs, non-decreasing by level.
    pub costs: Vec<f64>,
    /// Fixed values (or fallbacks when estimation is impossible), one per
    /// adjacent level pair.
    pub rho: Vec<f64>,
    pub rho_mode: RhoMode,
    /// Prior mean mode per level.
    pub mean_modes: Vec<MeanMode>,
    pub nugget: f64,
    pub fit: FitOptions,
    pub seed: u64,
}

impl EmulatorConfig {
    /// Defaults: fixed `rho = 1`, constant mean on level 1 and zero mean on
    /// the discrepancy levels.
    pub fn new(costs: Vec<f64>) -> Self {
        let levels = costs.len();
        let mut mean_modes = vec![MeanMode::Zero; levels];
        if let Some(m) = mean_modes.first_mut() {
            *m = MeanMode::Constant;
        }
        Self {
            costs,
            rho: vec![1.0; levels.saturating_sub(1)],
            rho_mode: RhoMode::Fixed,
            mean_modes,
            nugget: gp::DEFAULT_NUGGET,
            fit: FitOptions::default(),
            seed: 0,
        }
    }

    pub fn levels(&self) -> usize {
        self.costs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.levels();
        if l < 2 {
            return Err(Error::InvalidConfig(format!("costs: need at least 2 levels, got {l}")));
        }
        if self.costs.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidConfig("costs: must be positive and finite".into()));
        }
        if self.costs.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig("costs: must not decrease by level".into()));
        }
        if self.rho.len() != l - 1 {
            return Err(Error::InvalidConfig(format!("rho: expected {} values, got {}", l - 1, self.rho.len())));
        }
        if self.rho.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidConfig("rho: must be finite".into()));
        }
        if self.mean_modes.len() != l {
            return Err(Error::InvalidConfig(format!(
                "mean_modes: expected {l} values, got {}",
                self.mean_modes.len()
            )));
        }
        if !(self.nugget >= 0.0) {
            return Err(Error::InvalidConfig("nugget: must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Training data for one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelData {
    pub level: usize,
    pub x: Vec<Vec<f64>>,
    /// Raw outputs `f^(l)` at `x`.
    pub y: Vec<f64>,
    /// Outputs of level `l - 1` at `x`; `None` on level 1.
    pub y_low: Option<Vec<f64>>,
    /// What the level's GP is trained on.
    pub y_target: Vec<f64>,
}

impl LevelData {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// `P_1 = prod_{i=1}^{L-1} rho_i`, `P_l = prod_{k=l}^{L-1} rho_k`, `P_L = 1`.
pub fn level_weights(rho: &[f64]) -> Result<Vec<f64>> {
    if rho.is_empty() {
        return Err(Error::InvalidConfig("rho: need at least one value".into()));
    }
    let levels = rho.len() + 1;
    let mut p = vec![1.0; levels];
    for l in (0..levels - 1).rev() {
        p[l] = p[l + 1] * rho[l];
    }
    Ok(p)
}

/// Elementwise `y_hi - rho_prev * y_lo`.
pub fn discrepancy_targets(y_hi: &[f64], y_lo: &[f64], rho_prev: f64) -> Result<Vec<f64>> {
    if y_hi.len() != y_lo.len() {
        return Err(Error::LengthMismatch { left: y_hi.len(), right: y_lo.len() });
    }
    Ok(y_hi.iter().zip(y_lo).map(|(h, l)| h - rho_prev * l).collect())
}

/// No-intercept least-squares slope of `y_hi` on `y_lo`.
pub fn rho_least_squares(y_hi: &[f64], y_lo: &[f64]) -> Result<f64> {
    if y_hi.len() != y_lo.len() {
        return Err(Error::LengthMismatch { left: y_hi.len(), right: y_lo.len() });
    }
    if y_hi.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: y_hi.len() });
    }
    let sxx: f64 = y_lo.iter().map(|v| v * v).sum();
    let n = y_lo.len() as f64;
    let mean = y_lo.iter().sum::<f64>() / n;
    let spread = y_lo.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    if sxx == 0.0 || spread == 0.0 {
        return Err(Error::DegenerateRegressor);
    }
    let sxy: f64 = y_lo.iter().zip(y_hi).map(|(l, h)| l * h).sum();
    Ok(sxy / sxx)
}

/// Per-level inputs for [`MultiLevelEmulator::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelInput {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub y_low: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct MultiLevelEmulator {
    config: EmulatorConfig,
    levels: Vec<LevelData>,
    gps: Vec<GaussianProcess>,
    rho: Vec<f64>,
    weights: Vec<f64>,
}

impl MultiLevelEmulator {
    pub fn new(config: EmulatorConfig, inputs: Vec<LevelInput>) -> Result<Self> {
        config.validate()?;
        let nl = config.levels();
        if inputs.len() != nl {
            return Err(Error::InvalidConfig(format!("expected data for {nl} levels, got {}", inputs.len())));
        }
        let mut rho = config.rho.clone();
        let mut levels = Vec::with_capacity(nl);
        for (i, input) in inputs.into_iter().enumerate() {
            let level = i + 1;
            if input.x.is_empty() {
                return Err(Error::TooFewPoints { needed: 1, got: 0 });
            }
            if input.x.len() != input.y.len() {
                return Err(Error::LengthMismatch { left: input.x.len(), right: input.y.len() });
            }
            match (&input.y_low, level) {
                (Some(_), 1) => {
                    return Err(Error::InvalidConfig("level 1 has no lower level outputs".into()));
                }
                (None, l) if l > 1 => {
                    return Err(Error::InvalidConfig(format!("level {l} needs lower-level outputs")));
                }
                (Some(lo), _) if lo.len() != input.y.len() => {
                    return Err(Error::LengthMismatch { left: input.y.len(), right: lo.len() });
                }
                _ => {}
            }
            if level > 1 && config.rho_mode == RhoMode::Estimated {
                if let Ok(r) = rho_least_squares(&input.y, input.y_low.as_ref().unwrap()) {
                    rho[level - 2] = r;
                }
            }
            let y_target = match &input.y_low {
                Some(lo) => discrepancy_targets(&input.y, lo, rho[level - 2])?,
                None => input.y.clone(),
            };
            levels.push(LevelData { level, x: input.x, y: input.y, y_low: input.y_low, y_target });
        }
        let p = levels[0].x[0].len();
        if levels.iter().any(|l| l.x.iter().any(|r| r.len() != p)) {
            return Err(Error::InvalidConfig("all levels must share the input dimension".into()));
        }
        let gps = levels
            .iter()
            .map(|l| fit_level(&config, l))
            .collect::<Result<Vec<_>>>()?;
        let weights = level_weights(&rho)?;
        Ok(Self { config, levels, gps, rho, weights })
    }

    pub fn config(&self) -> &EmulatorConfig {
        &self.config
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        self.levels[0].x[0].len()
    }

    pub fn costs(&self) -> &[f64] {
        &self.config.costs
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// Level weights `P_1..P_L`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn levels(&self) -> &[LevelData] {
        &self.levels
    }

    pub fn level(&self, level: usize) -> Result<&LevelData> {
        self.check_level(level)?;
        Ok(&self.levels[level - 1])
    }

    pub fn gp(&self, level: usize) -> Result<&GaussianProcess> {
        self.check_level(level)?;
        Ok(&self.gps[level - 1])
    }

    pub(crate) fn gps(&self) -> &[GaussianProcess] {
        &self.gps
    }

    /// Design points of every level, level 1 first.
    pub fn all_design_points(&self) -> Vec<Vec<f64>> {
        self.levels.iter().flat_map(|l| l.x.iter().cloned()).collect()
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level == 0 || level > self.num_levels() {
            return Err(Error::InvalidLevel { level, levels: self.num_levels() });
        }
        Ok(())
    }

    /// Top-level prediction `sum_l P_l Z_l(x)` with independent levels.
    pub fn predict(&self, x: &[f64]) -> Result<PosteriorSummary> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        let mut mean = 0.0;
        let mut variance = 0.0;
        for (gp, w) in self.gps.iter().zip(&self.weights) {
            let post = gp.posterior_unchecked(x);
            mean += w * post.mean;
            variance += w * w * post.variance;
        }
        Ok(PosteriorSummary { mean, variance })
    }

    /// Top-level posterior mean only; cheaper than [`predict`](Self::predict).
    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.gps.iter().zip(&self.weights).map(|(gp, w)| w * gp.mean_unchecked(x)).sum())
    }

    /// Add one run at `level`. `f_below` (the level-1 lower output at `x`) must
    /// be given exactly when `level > 1`; it only feeds the discrepancy target.
    /// Refits that level's GP. On error nothing changes.
    pub fn add_run(&mut self, x: &[f64], level: usize, f_level: f64, f_below: Option<f64>) -> Result<()> {
        self.check_level(level)?;
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if !f_level.is_finite() || f_below.is_some_and(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "simulator output" });
        }
        let current = &self.levels[level - 1];
        if let Some(idx) = current.x.iter().position(|r| r == x) {
            return Err(Error::DuplicateInput { index: idx });
        }
        let mut data = current.clone();
        let mut rho = self.rho.clone();
        data.x.push(x.to_vec());
        data.y.push(f_level);
        match (level, f_below) {
            (1, None) => data.y_target.push(f_level),
            (1, Some(_)) => return Err(Error::InvalidConfig("level 1 runs take no lower output".into())),
            (_, None) => return Err(Error::InvalidConfig(format!("level {level} run needs the level {} output", level - 1))),
            (_, Some(lo)) => {
                let lows = data.y_low.as_mut().expect("upper levels carry lower outputs");
                lows.push(lo);
                if self.config.rho_mode == RhoMode::Estimated {
                    if let Ok(r) = rho_least_squares(&data.y, lows) {
                        rho[level - 2] = r;
                    }
                }
                data.y_target = discrepancy_targets(&data.y, lows, rho[level - 2])?;
            }
        }
        let gp = fit_level(&self.config, &data)?;
        let weights = level_weights(&rho)?;
        self.levels[level - 1] = data;
        self.gps[level - 1] = gp;
        self.rho = rho;
        self.weights = weights;
        Ok(())
    }

    /// Least-squares `rho^(level-1)` from the data stored at `level`.
    pub fn estimate_rho(&self, level: usize) -> Result<f64> {
        self.check_level(level)?;
        if level == 1 {
            return Err(Error::InvalidLevel { level, levels: self.num_levels() });
        }
        let data = &self.levels[level - 1];
        rho_least_squares(&data.y, data.y_low.as_ref().expect("upper level"))
    }
}

/// Fit one level's GP. A single-point level gets default hyperparameters
/// since the likelihood cannot identify them.
fn fit_level(config: &EmulatorConfig, data: &LevelData) -> Result<GaussianProcess> {
    let mode = config.mean_modes[data.level - 1];
    let p = data.x[0].len();
    if data.len() == 1 {
        let scale = match mode {
            MeanMode::Zero => data.y_target[0] * data.y_target[0],
            MeanMode::Constant => 0.0,
        }
        .max(1.0);
        let kernel = KernelSpec::new(vec![0.3; p], scale)?;
        return GaussianProcess::with_kernel(data.x.clone(), data.y_target.clone(), mode, kernel, config.nugget, None);
    }
    let fit_seed = seed::derive(config.seed, &[data.level as u64, data.len() as u64]);
    gp::fit_gp(&data.x, &data.y_target, mode, &vec![0.0; p], config.nugget, fit_seed, &config.fit)
}
