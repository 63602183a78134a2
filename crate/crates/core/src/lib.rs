//! Discrete-state-space MCMC with multiple-try Metropolis steps.
//!
//! The crate centers on [`sampler::mtm_step`], a multiple-try Metropolis kernel
//! parameterized by a trial count and a weight family (ordinary or locally
//! balanced). Around it sit:
//!
//! - [`model`]: the `ModelSpace` abstraction every sampling target implements,
//! - [`weights`]: balancing functions and trial-weight evaluation in log space,
//! - [`tuner`]: a one-shot neighborhood scan that picks the number of trials,
//! - [`bvs`]: a Bayesian variable-selection target with incremental Cholesky
//!   bookkeeping,
//! - [`sbm`]: a Bayesian stochastic-block-model target with incremental edge
//!   counts,
//! - [`spectral`]: exact transition matrices, detailed-balance checks, spectral
//!   gaps, mixing times and congestion bounds on enumerable toy spaces,
//! - [`experiment`]: replicate orchestration, hitting-time metrics, ESS, and
//!   CSV/JSON reports.
//!
//! All posterior arithmetic is carried out in log space; posteriors in the
//! model-selection targets span hundreds of orders of magnitude.

pub mod bvs;
pub mod error;
pub mod experiment;
pub mod logspace;
pub mod model;
pub mod sampler;
pub mod sbm;
pub mod spectral;
pub mod tuner;
pub mod weights;

pub use error::{Error, Result};
pub use experiment::{
    run_experiment, write_report, ExperimentConfig, ExperimentReport, InitRule, ModelConfig,
    ReportFormat,
};
pub use model::{ModelSpace, Trial};
pub use sampler::{run_chain, ChainTrace, HookAction, MtmConfig, SamplerSpec, StepStats};
pub use weights::{Balancing, WeightSpec};
