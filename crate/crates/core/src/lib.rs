//! Hardware-aware multi-objective architecture search benchmark.
//!
//! The crate models GPT-style decoder search spaces, generates synthetic but
//! structured ground truth (perplexity, parameter/FLOP/memory counts, noisy
//! per-device latency and energy), fits calibrated surrogates, runs
//! multi-objective search baselines and analyses the resulting fronts.
//!
//! Modules, bottom-up:
//!
//! * [`space`]: search spaces, sampling, encoding, mutation/crossover.
//! * [`oracle`]: the synthetic ground truth.
//! * [`surrogate`]: MLP and bagged-tree predictors.
//! * [`metrics`]: accuracy, calibration and rank-correlation metrics.
//! * [`pareto`]: dominance, fronts, hypervolume, attainment functions.
//! * [`moo`]: search baselines (RS, MOREA, NSGA-II, LS, LSBO/RSBO, EHVI).
//! * [`analysis`]: OLS, power-law fits, recursive feature elimination, ECDFs.
//! * [`bench`]: the query façade, dataset files and baseline runner.

pub mod analysis;
pub mod bench;
pub mod error;
pub mod metrics;
pub mod moo;
pub mod pareto;
pub mod oracle;
pub mod rng;
pub mod space;
pub mod surrogate;
pub mod special;

pub use error::{Error, Result};
pub use oracle::{HwMetric, MetricRecord, Oracle, PowerLawModel};
pub use space::{ArchConfig, EncodedArch, SearchSpaceSpec};
