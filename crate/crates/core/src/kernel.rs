//! Squared-exponential kernel with per-dimension lengthscales.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    #[default]
    SquaredExponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lengthscales: Vec<f64>,
    /// Process variance.
    pub variance: f64,
    /// Per-dimension lower bounds on the lengthscales; 0 means unbounded.
    pub lengthscale_lower_bounds: Vec<f64>,
}

impl KernelSpec {
    pub fn new(lengthscales: Vec<f64>, variance: f64) -> Result<Self> {
        let p = lengthscales.len();
        Self::with_bounds(lengthscales, variance, vec![0.0; p])
    }

    pub fn with_bounds(lengthscales: Vec<f64>, variance: f64, lower: Vec<f64>) -> Result<Self> {
        if lower.len() != lengthscales.len() {
            return Err(Error::DimensionMismatch {
                expected: lengthscales.len(),
                got: lower.len(),
            });
        }
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::InvalidConfig(format!("kernel variance must be positive, got {variance}")));
        }
        for (&l, &lb) in lengthscales.iter().zip(&lower) {
            if !(l > 0.0) || !l.is_finite() || lb < 0.0 || l < lb {
                return Err(Error::InvalidConfig(format!(
                    "lengthscale {l} violates lower bound {lb}"
                )));
            }
        }
        Ok(Self {
            family: KernelFamily::SquaredExponential,
            lengthscales,
            variance,
            lengthscale_lower_bounds: lower,
        })
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// Kernel value without dimension checks. Hot path.
    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        self.variance * self.correlation_unchecked(a, b)
    }

    #[inline]
    pub(crate) fn correlation_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((x, y), l) in a.iter().zip(b).zip(&self.lengthscales) {
            let d = (x - y) / l;
            s += d * d;
        }
        (-0.5 * s).exp()
    }

    /// Correlation `k(a, b) / variance`, in (0, 1].
    pub fn correlation(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.correlation_unchecked(a, b))
    }

    fn check(&self, a: &[f64]) -> Result<()> {
        if a.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: a.len(),
            });
        }
        Ok(())
    }
}

/// `variance * exp(-sum_d (a_d - b_d)^2 / (2 l_d^2))`.
pub fn kernel_eval(spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<f64> {
    spec.check(a)?;
    spec.check(b)?;
    Ok(spec.eval_unchecked(a, b))
}
