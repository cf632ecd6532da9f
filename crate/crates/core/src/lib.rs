//! Multi-level Gaussian-process emulation with cost-aware adaptive sampling.
//!
//! The crate is organized bottom-up:
//!
//! - [`kernel`] and [`gp`]: squared-exponential GP regression with exact
//!   posterior and leave-one-out queries.
//! - [`emulator`]: the autoregressive multi-level emulator.
//! - [`esloo`]: leave-one-out error propagation, ES-LOO surfaces and the
//!   PEI acquisition.
//! - [`sampler`]: joint location/level selection, batch modes and the
//!   sequential design loop.
//! - [`design`], [`problems`], [`metrics`], [`experiment`]: initial designs,
//!   test functions, error metrics and seeded experiment orchestration.

pub mod design;
pub mod emulator;
pub mod error;
pub mod esloo;
pub mod experiment;
pub mod gp;
pub mod kernel;
pub mod lowdisc;
pub mod metrics;
pub mod optim;
pub mod output;
pub mod par;
pub mod problems;
pub mod sampler;
pub mod seed;

pub use emulator::{EmulatorConfig, LevelData, LevelInput, MultiLevelEmulator, RhoMode};
pub use error::{Error, Result};
pub use esloo::{ErrorDistribution, EsLooSurface, SearchOptions, SurfaceOptions};
pub use gp::{FitOptions, GaussianProcess, MeanMode, PosteriorSummary};
pub use kernel::KernelSpec;
pub use par::Execution;
pub use problems::{Simulator, TestProblem};
pub use sampler::{BatchMode, Proposal, RunLog, SamplerConfig, Stopping};
