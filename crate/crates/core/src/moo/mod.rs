//! Multi-objective search baselines with an evaluation-count budget.
//!
//! Every method draws its decisions from `stream(seed, 0)` and hands
//! `stream(seed, 1)` to the evaluator for observation noise, so a run is a
//! pure function of (method, config, seed).

mod bo;
mod evolution;
pub mod gp;
mod local;

pub use bo::{ehvi_mc_acquisition, expected_improvement, hv_improvement, run_ehvi_mc, run_scalarized_bo, Scalarization};
pub use evolution::{rank_and_crowding, run_morea, run_nsga2};
pub use local::run_local_search;

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::median;
use crate::oracle::{HwMetric, Oracle};
use crate::pareto::{hypervolume, pareto_indices, Front, ObjectiveVector};
use crate::rng::{stream, BenchRng};
use crate::space::{sample_uniform, validate, ArchConfig, SearchSpaceSpec};

/// Draws used by [`Aggregation::Median`].
pub const MEDIAN_DRAWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Noise-free oracle mean.
    Mean,
    /// Median of [`MEDIAN_DRAWS`] noisy observations.
    Median,
    /// One noisy observation.
    SingleDraw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Perplexity,
    Params,
    Flops,
    MemBytes,
    Hardware(HwMetric),
}

impl MetricKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "perplexity" => Self::Perplexity,
            "params" => Self::Params,
            "flops" => Self::Flops,
            "mem_bytes" | "memory" => Self::MemBytes,
            other => Self::Hardware(HwMetric::parse(other)?),
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Perplexity => "perplexity",
            Self::Params => "params",
            Self::Flops => "flops",
            Self::MemBytes => "mem_bytes",
            Self::Hardware(m) => m.as_str(),
        }
    }
}

/// One minimized objective, written `metric[/device][:aggregation]`,
/// e.g. `latency/rtx2080:median`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Objective {
    pub metric: MetricKind,
    pub device: Option<String>,
    pub aggregation: Aggregation,
}

impl Objective {
    pub fn parse(s: &str) -> Result<Self> {
        let (body, agg) = match s.split_once(':') {
            Some((b, a)) => (b, a),
            None => (s, "mean"),
        };
        let aggregation = match agg {
            "mean" => Aggregation::Mean,
            "median" => Aggregation::Median,
            "single-draw" | "single" => Aggregation::SingleDraw,
            other => return Err(Error::Config(format!("unknown aggregation `{other}`"))),
        };
        let (metric, device) = match body.split_once('/') {
            Some((m, d)) => (MetricKind::parse(m)?, Some(d.to_string())),
            None => (MetricKind::parse(body)?, None),
        };
        if matches!(metric, MetricKind::Hardware(_)) != device.is_some() {
            return Err(Error::Config(format!(
                "objective `{s}`: hardware metrics need a device and scalar metrics take none"
            )));
        }
        Ok(Self {
            metric,
            device,
            aggregation,
        })
    }

    pub fn name(&self) -> String {
        let mut s = self.metric.as_str().to_string();
        if let Some(d) = &self.device {
            s.push('/');
            s.push_str(d);
        }
        if matches!(self.metric, MetricKind::Hardware(_)) && self.aggregation != Aggregation::Mean {
            s.push_str(match self.aggregation {
                Aggregation::Median => ":median",
                _ => ":single-draw",
            });
        }
        s
    }
}

/// Parses a list of objectives; at least two are required.
pub fn parse_objectives(specs: &[String]) -> Result<Vec<Objective>> {
    if specs.len() < 2 {
        return Err(Error::Config("at least two objectives are required".into()));
    }
    specs.iter().map(|s| Objective::parse(s)).collect()
}

/// Maps architectures to minimized objective vectors.
pub trait Evaluator: Sync {
    fn space(&self) -> &SearchSpaceSpec;
    fn objective_names(&self) -> Vec<String>;
    fn evaluate(&self, arch: &ArchConfig, noise: &mut BenchRng) -> Result<ObjectiveVector>;
}

/// Evaluates objectives on the synthetic oracle.
pub struct OracleEvaluator<'a> {
    pub oracle: &'a Oracle,
    pub objectives: Vec<Objective>,
}

impl<'a> OracleEvaluator<'a> {
    pub fn new(oracle: &'a Oracle, objectives: Vec<Objective>) -> Result<Self> {
        if objectives.len() < 2 {
            return Err(Error::Config("at least two objectives are required".into()));
        }
        for o in &objectives {
            if let Some(d) = &o.device {
                oracle.profile(d)?;
            }
        }
        Ok(Self { oracle, objectives })
    }
}

impl Evaluator for OracleEvaluator<'_> {
    fn space(&self) -> &SearchSpaceSpec {
        &self.oracle.space
    }

    fn objective_names(&self) -> Vec<String> {
        self.objectives.iter().map(Objective::name).collect()
    }

    fn evaluate(&self, arch: &ArchConfig, noise: &mut BenchRng) -> Result<ObjectiveVector> {
        validate(&self.oracle.space, arch).into_result()?;
        let spec = &self.oracle.space;
        self.objectives
            .iter()
            .map(|o| {
                Ok(match o.metric {
                    MetricKind::Perplexity => self.oracle.perplexity(arch),
                    MetricKind::Params => crate::oracle::param_count(arch, spec) as f64,
                    MetricKind::Flops => crate::oracle::flops(arch, spec) as f64,
                    MetricKind::MemBytes => crate::oracle::memory_bytes(arch, spec, self.oracle.bytes_per_param) as f64,
                    MetricKind::Hardware(m) => {
                        let device = o.device.as_deref().expect("checked at parse time");
                        match o.aggregation {
                            Aggregation::Mean => self.oracle.hw_mean(device, arch, m)?,
                            Aggregation::Median => median(&self.oracle.hw_samples(device, arch, m, MEDIAN_DRAWS, noise)?),
                            Aggregation::SingleDraw => self.oracle.hw_samples(device, arch, m, 1, noise)?[0],
                        }
                    }
                })
            })
            .collect()
    }
}

/// Wraps an evaluator and counts calls.
pub struct CountingEvaluator<E> {
    pub inner: E,
    count: AtomicUsize,
}

impl<E> CountingEvaluator<E> {
    pub fn new(inner: E) -> Self {
        Self {
            inner,
            count: AtomicUsize::new(0),
        }
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::SeqCst)
    }
}

impl<E: Evaluator> Evaluator for CountingEvaluator<E> {
    fn space(&self) -> &SearchSpaceSpec {
        self.inner.space()
    }

    fn objective_names(&self) -> Vec<String> {
        self.inner.objective_names()
    }

    fn evaluate(&self, arch: &ArchConfig, noise: &mut BenchRng) -> Result<ObjectiveVector> {
        self.count.fetch_add(1, Ordering::SeqCst);
        self.inner.evaluate(arch, noise)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rs,
    Morea,
    Nsga2,
    Ls,
    Lsbo,
    Rsbo,
    Ehvi,
}

pub const SUPPORTED_METHODS: [&str; 7] = ["rs", "morea", "nsga2", "ls", "lsbo", "rsbo", "ehvi"];

impl Method {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "rs" => Self::Rs,
            "morea" => Self::Morea,
            "nsga2" => Self::Nsga2,
            "ls" => Self::Ls,
            "lsbo" => Self::Lsbo,
            "rsbo" => Self::Rsbo,
            "ehvi" => Self::Ehvi,
            other => {
                return Err(Error::UnknownMethod {
                    name: other.to_string(),
                    supported: SUPPORTED_METHODS.to_vec(),
                })
            }
        })
    }

    pub fn as_str(self) -> &'static str {
        SUPPORTED_METHODS[self as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub budget: usize,
    pub seed: u64,
    pub pop_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub init_points: usize,
    pub mc_samples: usize,
    pub candidates: usize,
    /// GP lengthscale as a multiple of sqrt(encoding length), on
    /// standardized encodings.
    pub lengthscale_factor: f64,
    /// Record the method's current front every this many evaluations.
    pub checkpoint_every: usize,
    /// Fixed hypervolume reference for `hv_curve`; left empty when unset.
    pub reference: Option<Vec<f64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            budget: 200,
            seed: 0,
            pop_size: 20,
            crossover_prob: 0.9,
            mutation_prob: 0.5,
            init_points: 10,
            mc_samples: 32,
            candidates: 512,
            lengthscale_factor: 2.0,
            checkpoint_every: 10,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub arch: ArchConfig,
    pub objectives: ObjectiveVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub evaluations: usize,
    /// The method's own non-dominated set (archive, rank-0 population, or
    /// history front) at this point.
    pub front: Vec<ObjectiveVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: String,
    pub seed: u64,
    pub objectives: Vec<String>,
    pub history: Vec<Evaluation>,
    pub checkpoints: Vec<Checkpoint>,
    pub reference: Option<Vec<f64>>,
    /// `(evaluations, hypervolume)` for evaluations 1..=budget.
    pub hv_curve: Vec<(usize, f64)>,
}

impl RunResult {
    pub fn points(&self) -> Vec<ObjectiveVector> {
        self.history.iter().map(|e| e.objectives.clone()).collect()
    }

    pub fn front(&self) -> Front {
        let pts = self.points();
        Front {
            points: pareto_indices(&pts).into_iter().map(|i| pts[i].clone()).collect(),
        }
    }

    pub fn set_reference(&mut self, reference: &[f64]) -> Result<()> {
        self.hv_curve = hv_trajectory(self, reference)?;
        self.reference = Some(reference.to_vec());
        Ok(())
    }

    pub fn final_hv(&self) -> Option<f64> {
        self.hv_curve.last().map(|p| p.1)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rows `eval_index,hypervolume,seed,method` without header.
    pub fn hv_csv_rows(&self) -> String {
        self.hv_curve
            .iter()
            .map(|(k, hv)| format!("{k},{hv},{},{}\n", self.seed, self.method))
            .collect()
    }
}

pub const HV_CSV_HEADER: &str = "eval_index,hypervolume,seed,method";

/// Hypervolume of the front of the first k evaluations, k = 1..=n. Values
/// are recomputed only when the front changes; a running maximum absorbs
/// Monte-Carlo noise beyond three objectives.
pub fn hv_trajectory(result: &RunResult, reference: &[f64]) -> Result<Vec<(usize, f64)>> {
    if result.history.is_empty() {
        return Err(Error::EmptyInput("empty history"));
    }
    let mut front: Vec<ObjectiveVector> = Vec::new();
    let mut curve = Vec::with_capacity(result.history.len());
    let mut current = 0.0f64;
    for (k, e) in result.history.iter().enumerate() {
        let p = &e.objectives;
        if p.len() != reference.len() {
            return Err(Error::DimensionMismatch {
                expected: reference.len(),
                found: p.len(),
            });
        }
        let covered = front.iter().any(|q| q.iter().zip(p).all(|(a, b)| a <= b));
        if !covered {
            front.retain(|q| !q.iter().zip(p).all(|(a, b)| b <= a));
            front.push(p.clone());
            current = current.max(hypervolume(&front, reference)?.value);
        }
        curve.push((k + 1, current));
    }
    Ok(curve)
}

/// Bookkeeping shared by all methods: the budget, the history and checkpoints.
pub(crate) struct Tracker<'a> {
    eval: &'a dyn Evaluator,
    noise: BenchRng,
    budget: usize,
    every: usize,
    history: Vec<Evaluation>,
    checkpoints: Vec<Checkpoint>,
}

impl<'a> Tracker<'a> {
    pub(crate) fn new(eval: &'a dyn Evaluator, cfg: &RunConfig) -> Result<Self> {
        if cfg.budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        Ok(Self {
            eval,
            noise: stream(cfg.seed, 1),
            budget: cfg.budget,
            every: cfg.checkpoint_every.max(1),
            history: Vec::with_capacity(cfg.budget),
            checkpoints: Vec::new(),
        })
    }

    pub(crate) fn space(&self) -> &SearchSpaceSpec {
        self.eval.space()
    }

    pub(crate) fn remaining(&self) -> usize {
        self.budget - self.history.len()
    }

    pub(crate) fn done(&self) -> bool {
        self.history.len() >= self.budget
    }

    pub(crate) fn history(&self) -> &[Evaluation] {
        &self.history
    }

    pub(crate) fn evaluate(&mut self, arch: ArchConfig) -> Result<ObjectiveVector> {
        assert!(!self.done(), "evaluation budget exhausted");
        let y = self.eval.evaluate(&arch, &mut self.noise)?;
        self.history.push(Evaluation {
            arch,
            objectives: y.clone(),
        });
        Ok(y)
    }

    pub(crate) fn checkpoint_due(&self) -> bool {
        let n = self.history.len();
        n % self.every == 0 || n == self.budget
    }

    pub(crate) fn checkpoint(&mut self, front: Vec<ObjectiveVector>) {
        self.checkpoints.push(Checkpoint {
            evaluations: self.history.len(),
            front,
        });
    }

    pub(crate) fn checkpoint_last_mut(&mut self) -> Option<&mut Checkpoint> {
        self.checkpoints.last_mut()
    }

    pub(crate) fn history_front(&self) -> Vec<ObjectiveVector> {
        let pts: Vec<ObjectiveVector> = self.history.iter().map(|e| e.objectives.clone()).collect();
        pareto_indices(&pts).into_iter().map(|i| pts[i].clone()).collect()
    }

    pub(crate) fn finish(self, method: Method, cfg: &RunConfig) -> Result<RunResult> {
        let mut result = RunResult {
            method: method.as_str().to_string(),
            seed: cfg.seed,
            objectives: self.eval.objective_names(),
            history: self.history,
            checkpoints: self.checkpoints,
            reference: None,
            hv_curve: Vec::new(),
        };
        if let Some(r) = &cfg.reference {
            result.set_reference(r)?;
        }
        Ok(result)
    }
}

pub fn run_random_search(eval: &dyn Evaluator, cfg: &RunConfig) -> Result<RunResult> {
    let mut t = Tracker::new(eval, cfg)?;
    let mut rng = stream(cfg.seed, 0);
    while !t.done() {
        let arch = sample_uniform(t.space(), 1, false, &mut rng)?.remove(0);
        t.evaluate(arch)?;
        if t.checkpoint_due() {
            let f = t.history_front();
            t.checkpoint(f);
        }
    }
    t.finish(Method::Rs, cfg)
}

pub fn run(method: Method, eval: &dyn Evaluator, cfg: &RunConfig) -> Result<RunResult> {
    match method {
        Method::Rs => run_random_search(eval, cfg),
        Method::Morea => run_morea(eval, cfg),
        Method::Nsga2 => run_nsga2(eval, cfg),
        Method::Ls => run_local_search(eval, cfg),
        Method::Lsbo => run_scalarized_bo(eval, cfg, Scalarization::LinearFixed),
        Method::Rsbo => run_scalarized_bo(eval, cfg, Scalarization::RandomPerIteration),
        Method::Ehvi => run_ehvi_mc(eval, cfg),
    }
}
