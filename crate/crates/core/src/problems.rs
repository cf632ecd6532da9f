//! Closed-form multi-level test problems and the simulator contract.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A hierarchy of simulators on `[0,1]^p`. Level 1 is the cheapest.
pub trait Simulator: Sync {
    fn levels(&self) -> usize;
    fn dim(&self) -> usize;
    /// Run level `level` (1-based) at `x`. Failures must be reported, never
    /// absorbed.
    fn evaluate(&self, level: usize, x: &[f64]) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TermFunction {
    #[default]
    Identity,
    Sin,
    Cos,
}

/// `coef * g(freq * prod_d x_d^powers_d)` with `g` identity, sin or cos.
/// For the identity the frequency is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    #[serde(default)]
    pub powers: Vec<u32>,
    #[serde(default)]
    pub function: TermFunction,
    #[serde(default = "one")]
    pub freq: f64,
}

fn one() -> f64 {
    1.0
}

impl Term {
    fn eval(&self, x: &[f64]) -> f64 {
        let mono: f64 = self.powers.iter().zip(x).map(|(&k, v)| v.powi(k as i32)).product();
        self.coef
            * match self.function {
                TermFunction::Identity => mono,
                TermFunction::Sin => (self.freq * mono).sin(),
                TermFunction::Cos => (self.freq * mono).cos(),
            }
    }
}

#[derive(Clone)]
enum LevelFn {
    Builtin(fn(&[f64]) -> f64),
    Terms(Vec<Term>),
}

impl LevelFn {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            LevelFn::Builtin(f) => f(x),
            LevelFn::Terms(ts) => ts.iter().map(|t| t.eval(x)).sum(),
        }
    }
}

#[derive(Clone)]
pub struct TestProblem {
    pub name: String,
    pub dim: usize,
    levels: Vec<LevelFn>,
    pub default_costs: Vec<f64>,
}

impl fmt::Debug for TestProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("levels", &self.levels.len())
            .field("default_costs", &self.default_costs)
            .finish()
    }
}

impl TestProblem {
    /// Build a problem from per-level sums of polynomial/trigonometric terms.
    pub fn from_terms(name: &str, dim: usize, levels: Vec<Vec<Term>>, default_costs: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("problem: dimension must be positive".into()));
        }
        if levels.len() < 2 {
            return Err(Error::InvalidConfig("problem: need at least 2 levels".into()));
        }
        if default_costs.len() != levels.len() {
            return Err(Error::InvalidConfig("problem: one cost per level required".into()));
        }
        for t in levels.iter().flatten() {
            if t.powers.len() > dim {
                return Err(Error::InvalidConfig(format!(
                    "problem: term has {} powers for dimension {dim}",
                    t.powers.len()
                )));
            }
            if !t.coef.is_finite() || !t.freq.is_finite() {
                return Err(Error::InvalidConfig("problem: term coefficients must be finite".into()));
            }
        }
        Ok(Self {
            name: name.to_string(),
            dim,
            levels: levels.into_iter().map(LevelFn::Terms).collect(),
            default_costs,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// The top-level function, used as ground truth.
    pub fn truth(&self, x: &[f64]) -> f64 {
        self.levels.last().expect("at least two levels").eval(x)
    }
}

impl Simulator for TestProblem {
    fn levels(&self) -> usize {
        self.levels.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, level: usize, x: &[f64]) -> Result<f64> {
        if level == 0 || level > self.levels.len() {
            return Err(Error::InvalidLevel { level, levels: self.levels.len() });
        }
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let v = self.levels[level - 1].eval(x);
        if !v.is_finite() {
            return Err(Error::Simulator { level, message: format!("non-finite output at {x:?}") });
        }
        Ok(v)
    }
}

fn sine_quadratic_low(x: &[f64]) -> f64 {
    x[1] + x[0] * x[0] + x[1] * x[1] - SQRT_2
}

fn sine_quadratic_high(x: &[f64]) -> f64 {
    sine_quadratic_low(x) + (2.0 * PI * x[0]).sin() + (4.0 * PI * x[0] * x[1]).sin()
}

fn sine_quadratic_top(x: &[f64]) -> f64 {
    sine_quadratic_high(x) + 0.5 * (3.0 * PI * x[1]).sin()
}

fn forrester_high(x: &[f64]) -> f64 {
    let t = 6.0 * x[0] - 2.0;
    t * t * (12.0 * x[0] - 4.0).sin()
}

fn forrester_low(x: &[f64]) -> f64 {
    0.5 * forrester_high(x) + 10.0 * (x[0] - 0.5) - 5.0
}

/// Built-in problems:
///
/// - `sine-quadratic-2d`: `f1 = x2 + x1^2 + x2^2 - sqrt 2`,
///   `f2 = f1 + sin(2 pi x1) + sin(4 pi x1 x2)`, costs (1, 8).
/// - `sine-quadratic-3level-2d`: adds `f3 = f2 + 0.5 sin(3 pi x2)`, costs
///   (1, 4, 16).
/// - `forrester-1d`: the Forrester pair, costs (1, 10).
pub fn problem_registry() -> Vec<TestProblem> {
    let builtin = |name: &str, dim, fs: Vec<fn(&[f64]) -> f64>, costs: Vec<f64>| TestProblem {
        name: name.to_string(),
        dim,
        levels: fs.into_iter().map(LevelFn::Builtin).collect(),
        default_costs: costs,
    };
    vec![
        builtin("sine-quadratic-2d", 2, vec![sine_quadratic_low, sine_quadratic_high], vec![1.0, 8.0]),
        builtin(
            "sine-quadratic-3level-2d",
            2,
            vec![sine_quadratic_low, sine_quadratic_high, sine_quadratic_top],
            vec![1.0, 4.0, 16.0],
        ),
        builtin("forrester-1d", 1, vec![forrester_low, forrester_high], vec![1.0, 10.0]),
    ]
}

pub fn find_problem(name: &str) -> Option<TestProblem> {
    problem_registry().into_iter().find(|p| p.name == name)
}
