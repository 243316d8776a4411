//! The query façade, dataset files and the baseline runner.
//!
//! ```no_run
//! use hwnas_core::bench::{BenchContext, Predictor};
//!
//! let mut api = BenchContext::new("gpt-s", 0).unwrap();
//! let arch = api.sample_arch();
//! api.set_arch(arch).unwrap();
//! let all = api.query(None, None, Predictor::Oracle).unwrap();
//! let energy = api.query(Some("energy"), Some("rtx2080"), Predictor::Oracle).unwrap();
//! # let _ = (all, energy);
//! ```

pub mod config;
pub mod dataset;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::BenchConfig;
pub use dataset::{generate_dataset, Dataset, DatasetHeader, DATASET_SCHEMA_VERSION};

use crate::error::{Error, Result};
use crate::analysis::Stratum;
use crate::metrics::{mean, median, sample_std, MetricColumn};
use crate::moo::{self, Aggregation, Evaluator, MetricKind, Method, Objective, OracleEvaluator, RunConfig, RunResult};
use crate::oracle::{self, preset_power_law, HwMetric, MetricRecord, Oracle};
use crate::pareto::{eaf_surfaces, inflated_reference, surfaces_to_csv, AttainmentSurface, ObjectiveVector};
use crate::rng::{stream, BenchRng};
use crate::space::{encode, sample_uniform, toy_space, validate, ArchConfig, SearchSpaceSpec};
use crate::surrogate::{
    evaluate_moments, evaluate_scalar, fit_hw_surrogate, fit_scalar_surrogate, split_dataset, MomentPredictor, Persist,
    ScalarPredictor, ScalarTarget, SplitDataset, SurrogateEvaluation,
};

/// A preset space or `toy`.
pub fn space_for(name: &str) -> Result<SearchSpaceSpec> {
    if name == "toy" {
        return Ok(toy_space());
    }
    crate::space::preset(name)
}

/// Oracle for a preset name or `toy`; the toy space borrows the GPT-S power law.
pub fn oracle_for(space: &str) -> Result<Oracle> {
    if space == "toy" {
        return Ok(Oracle::new(toy_space(), preset_power_law("gpt-s")?));
    }
    Oracle::for_preset(space)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predictor {
    #[default]
    Oracle,
    Surrogate,
}

impl Predictor {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "surrogate" => Ok(Self::Surrogate),
            other => Err(Error::Config(format!("unknown predictor `{other}` (oracle, surrogate)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QueryValue {
    Scalar(f64),
    /// `samples` is empty for surrogate predictions.
    Moments { mean: f64, std: f64, samples: Vec<f64> },
}

impl QueryValue {
    pub fn mean(&self) -> f64 {
        match self {
            Self::Scalar(v) => *v,
            Self::Moments { mean, .. } => *mean,
        }
    }
}

/// Fitted surrogates: scalar predictors keyed by target name, moment
/// predictors keyed by `metric/device`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SurrogateBundle {
    pub space: String,
    /// Seed and train ratio of the split the models were fitted on.
    pub split: Option<(u64, f64)>,
    pub scalars: BTreeMap<String, ScalarPredictor>,
    pub hardware: BTreeMap<String, MomentPredictor>,
}

impl Persist for SurrogateBundle {
    const KIND: &'static str = "surrogate_bundle";
}

pub fn hw_key(metric: HwMetric, device: &str) -> String {
    format!("{}/{device}", metric.as_str())
}

impl SurrogateBundle {
    pub fn is_empty(&self) -> bool {
        self.scalars.is_empty() && self.hardware.is_empty()
    }

    pub fn insert_scalar(&mut self, p: ScalarPredictor) {
        self.scalars.insert(p.target.as_str().to_string(), p);
    }

    pub fn insert_hw(&mut self, p: MomentPredictor) {
        self.hardware.insert(hw_key(p.metric, &p.device), p);
    }

    pub fn scalar(&self, target: ScalarTarget) -> Result<&ScalarPredictor> {
        self.scalars
            .get(target.as_str())
            .ok_or_else(|| Error::SurrogateNotFitted(target.as_str().to_string()))
    }

    pub fn hw(&self, metric: HwMetric, device: &str) -> Result<&MomentPredictor> {
        let key = hw_key(metric, device);
        self.hardware.get(&key).ok_or(Error::SurrogateNotFitted(key))
    }
}

/// Which surrogates [`fit_bundle`] trains.
#[derive(Debug, Clone, PartialEq)]
pub struct FitPlan {
    pub targets: Vec<ScalarTarget>,
    pub hw_metrics: Vec<HwMetric>,
    /// Empty means every device recorded in the dataset.
    pub devices: Vec<String>,
}

impl Default for FitPlan {
    fn default() -> Self {
        Self {
            targets: vec![ScalarTarget::Perplexity],
            hw_metrics: HW_METRICS.to_vec(),
            devices: Vec::new(),
        }
    }
}

/// The train/test split used for fitting and evaluation; stream 0 of `seed`.
pub fn dataset_split(dataset: &Dataset, ratio: f64, seed: u64) -> Result<SplitDataset<MetricRecord>> {
    split_dataset(&dataset.records, ratio, &mut stream(seed, 0))
}

/// Fits the planned surrogates on the training part of the configured split.
/// Scalar targets use `ppl_family`, hardware moments use `hw_family`.
pub fn fit_bundle(dataset: &Dataset, cfg: &BenchConfig, plan: &FitPlan) -> Result<SurrogateBundle> {
    let split = dataset_split(dataset, cfg.split_ratio, cfg.seed)?;
    let spec = &dataset.header.space_spec;
    let scfg = cfg.surrogate_config();
    let devices = if plan.devices.is_empty() {
        dataset.header.devices.clone()
    } else {
        plan.devices.clone()
    };
    for d in &devices {
        if !dataset.header.devices.contains(d) {
            return Err(Error::UnknownDevice(d.clone()));
        }
    }
    let mut bundle = SurrogateBundle {
        space: spec.name.clone(),
        split: Some((cfg.seed, cfg.split_ratio)),
        ..Default::default()
    };
    for &t in &plan.targets {
        bundle.insert_scalar(fit_scalar_surrogate(spec, &split.train, t, cfg.ppl_family, &scfg)?);
    }
    let jobs: Vec<(HwMetric, &String)> = plan.hw_metrics.iter().flat_map(|&m| devices.iter().map(move |d| (m, d))).collect();
    let fitted = jobs
        .par_iter()
        .map(|&(m, d)| fit_hw_surrogate(spec, &split.train, d, m, cfg.hw_family, &scfg))
        .collect::<Result<Vec<_>>>()?;
    for p in fitted {
        bundle.insert_hw(p);
    }
    Ok(bundle)
}

/// Table rows for every surrogate in `bundle` on the held-out part of the
/// split it was fitted on.
pub fn evaluate_bundle(bundle: &SurrogateBundle, dataset: &Dataset, quantiles: usize) -> Result<Vec<SurrogateEvaluation>> {
    let (seed, ratio) = bundle
        .split
        .ok_or_else(|| Error::Config("surrogate bundle does not record its split".into()))?;
    let split = dataset_split(dataset, ratio, seed)?;
    let spec = &dataset.header.space_spec;
    let mut rows = Vec::new();
    for p in bundle.scalars.values() {
        rows.push(evaluate_scalar(spec, p, &split.test)?);
    }
    for p in bundle.hardware.values() {
        rows.push(evaluate_moments(spec, p, &split.test, quantiles)?);
    }
    Ok(rows)
}

/// A dataset column by name: a scalar target, or `latency/<device>` and
/// `energy/<device>` as raw observations.
pub fn record_column(records: &[MetricRecord], name: &str) -> Result<MetricColumn> {
    if let Some((metric, device)) = name.split_once('/') {
        let m = HwMetric::parse(metric)?;
        return records
            .iter()
            .map(|r| {
                r.hw.get(device)
                    .map(|h| h.get(m).to_vec())
                    .ok_or_else(|| Error::UnknownDevice(device.to_string()))
            })
            .collect::<Result<Vec<_>>>()
            .map(MetricColumn::Multi);
    }
    let t = ScalarTarget::parse(name)?;
    Ok(MetricColumn::Scalar(records.iter().map(|r| t.value(r)).collect()))
}

/// Every column of a dataset: the scalar targets, then per device latency
/// and energy.
pub fn dataset_columns(dataset: &Dataset) -> Result<Vec<(String, MetricColumn)>> {
    let mut names: Vec<String> = SCALARS.iter().map(|t| t.as_str().to_string()).collect();
    for d in &dataset.header.devices {
        for m in HW_METRICS {
            names.push(hw_key(m, d));
        }
    }
    names
        .into_iter()
        .map(|n| record_column(&dataset.records, &n).map(|c| (n, c)))
        .collect()
}

/// Parses a stratum such as `layers=max&embed=max`. Keys are `layers`,
/// `embed`, `heads` and `mlp` (every layer), and `bias`; values are `min`,
/// `max` or a number (`true`/`false` for bias). `all` selects everything.
pub fn parse_stratum(spec: &SearchSpaceSpec, text: &str) -> Result<Stratum<'static>> {
    if text.trim() == "all" {
        return Ok(Stratum::new("all", |_: &ArchConfig| true));
    }
    let bad = |msg: String| Error::Config(format!("stratum `{text}`: {msg}"));
    let mut conds: Vec<Box<dyn Fn(&ArchConfig) -> bool>> = Vec::new();
    for part in text.split('&') {
        let (key, value) = part.split_once('=').ok_or_else(|| bad(format!("`{part}` is not key=value")))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "bias" {
            let b: bool = value.parse().map_err(|_| bad(format!("bias must be true or false, got `{value}`")))?;
            conds.push(Box::new(move |a: &ArchConfig| a.bias == b));
            continue;
        }
        let choices = match key {
            "layers" => &spec.layer_choices,
            "embed" => &spec.embed_choices,
            "heads" => &spec.head_choices,
            "mlp" => &spec.mlp_ratio_choices,
            other => return Err(bad(format!("unknown key `{other}`"))),
        };
        let v = match value {
            "min" => *choices.iter().min().expect("nonempty choices"),
            "max" => *choices.iter().max().expect("nonempty choices"),
            n => n.parse().map_err(|_| bad(format!("bad value `{n}`")))?,
        };
        conds.push(match key {
            "layers" => Box::new(move |a: &ArchConfig| a.num_layers == v),
            "embed" => Box::new(move |a: &ArchConfig| a.embed_dim == v),
            "heads" => Box::new(move |a: &ArchConfig| a.heads.iter().all(|&h| h == v)),
            _ => Box::new(move |a: &ArchConfig| a.mlp_ratios.iter().all(|&m| m == v)),
        });
    }
    Ok(Stratum::new(text, move |a| conds.iter().all(|c| c(a))))
}

/// What a query asks for: a scalar target, a hardware metric, or everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MetricFilter {
    All,
    Scalar(ScalarTarget),
    Hardware(HwMetric),
}

fn parse_metric(name: Option<&str>) -> Result<MetricFilter> {
    let Some(name) = name else {
        return Ok(MetricFilter::All);
    };
    if let Ok(m) = HwMetric::parse(name) {
        return Ok(MetricFilter::Hardware(m));
    }
    ScalarTarget::parse(name)
        .map(MetricFilter::Scalar)
        .map_err(|_| Error::UnknownMetric(name.to_string()))
}

const SCALARS: [ScalarTarget; 4] = [
    ScalarTarget::Perplexity,
    ScalarTarget::Params,
    ScalarTarget::Flops,
    ScalarTarget::MemBytes,
];
const HW_METRICS: [HwMetric; 2] = [HwMetric::Latency, HwMetric::Energy];

pub struct BenchContext {
    pub oracle: Oracle,
    pub surrogates: SurrogateBundle,
    pub seed: u64,
    /// Draws per hardware query under the oracle.
    pub k_lat: usize,
    pub k_energy: usize,
    /// Settings other than budget and seed used by [`BenchContext::run_baseline`].
    pub run_template: RunConfig,
    pub eaf_levels: Vec<f64>,
    arch: Option<ArchConfig>,
    rng: BenchRng,
    frozen: Option<HashMap<ArchConfig, MetricRecord>>,
}

impl BenchContext {
    pub fn new(space: &str, seed: u64) -> Result<Self> {
        Ok(Self::with_oracle(oracle_for(space)?, seed))
    }

    pub fn with_oracle(oracle: Oracle, seed: u64) -> Self {
        Self {
            surrogates: SurrogateBundle {
                space: oracle.space.name.clone(),
                ..Default::default()
            },
            oracle,
            seed,
            k_lat: 10,
            k_energy: 50,
            run_template: RunConfig::default(),
            eaf_levels: vec![0.25, 0.5, 0.75],
            arch: None,
            rng: stream(seed, 0),
            frozen: None,
        }
    }

    pub fn from_config(cfg: &BenchConfig) -> Result<Self> {
        let mut oracle = oracle_for(&cfg.space)?;
        if let Some(p) = &cfg.profiles {
            oracle.profiles = oracle::load_profiles(Path::new(p))?;
        }
        let mut ctx = Self::with_oracle(oracle, cfg.seed);
        ctx.k_lat = cfg.k_lat;
        ctx.k_energy = cfg.k_energy;
        ctx.run_template = cfg.run_config(cfg.seed);
        ctx.eaf_levels = cfg.eaf_levels.clone();
        Ok(ctx)
    }

    pub fn space(&self) -> &SearchSpaceSpec {
        &self.oracle.space
    }

    pub fn sample_arch(&mut self) -> ArchConfig {
        sample_uniform(&self.oracle.space, 1, false, &mut self.rng)
            .expect("non-unique sampling cannot fail")
            .remove(0)
    }

    pub fn set_arch(&mut self, arch: ArchConfig) -> Result<()> {
        validate(&self.oracle.space, &arch).into_result()?;
        self.arch = Some(arch);
        Ok(())
    }

    pub fn arch(&self) -> Option<&ArchConfig> {
        self.arch.as_ref()
    }

    /// Pins oracle answers to the records of `dataset`; architectures outside
    /// it then fail with [`Error::NotInDataset`].
    pub fn freeze(&mut self, dataset: &Dataset) {
        self.frozen = Some(dataset.records.iter().map(|r| (r.arch.clone(), r.clone())).collect());
    }

    pub fn unfreeze(&mut self) {
        self.frozen = None;
    }

    /// Named values for the current architecture.
    ///
    /// Without a metric every metric is returned; a device restricts hardware
    /// entries to that device. Keys are target names (`perplexity`, `params`,
    /// `flops`, `mem_bytes`) and `latency/<device>`, `energy/<device>`. Under
    /// the surrogate predictor an unfiltered query returns the fitted
    /// surrogates only.
    pub fn query(
        &mut self,
        metric: Option<&str>,
        device: Option<&str>,
        predictor: Predictor,
    ) -> Result<BTreeMap<String, QueryValue>> {
        let filter = parse_metric(metric)?;
        let arch = self.arch.clone().ok_or(Error::NoArchSet)?;
        if let Some(d) = device {
            self.oracle.profile(d)?;
        }
        let devices: Vec<String> = match device {
            Some(d) => vec![d.to_string()],
            None => self.oracle.profiles.keys().cloned().collect(),
        };
        let scalars: Vec<ScalarTarget> = match filter {
            MetricFilter::All => SCALARS.to_vec(),
            MetricFilter::Scalar(t) => vec![t],
            MetricFilter::Hardware(_) => Vec::new(),
        };
        let hw: Vec<HwMetric> = match filter {
            MetricFilter::All => HW_METRICS.to_vec(),
            MetricFilter::Scalar(_) => Vec::new(),
            MetricFilter::Hardware(m) => vec![m],
        };
        let mut out = BTreeMap::new();
        match predictor {
            Predictor::Oracle => {
                let frozen = match &self.frozen {
                    Some(map) => Some(map.get(&arch).ok_or(Error::NotInDataset)?.clone()),
                    None => None,
                };
                for t in scalars {
                    let v = match &frozen {
                        Some(r) => t.value(r),
                        None => self.oracle_scalar(t, &arch),
                    };
                    out.insert(t.as_str().to_string(), QueryValue::Scalar(v));
                }
                for m in hw {
                    for d in &devices {
                        let samples = match &frozen {
                            Some(r) => r
                                .hw
                                .get(d)
                                .map(|h| h.get(m).to_vec())
                                .filter(|s| !s.is_empty())
                                .ok_or(Error::NotInDataset)?,
                            None => {
                                let k = match m {
                                    HwMetric::Latency => self.k_lat,
                                    HwMetric::Energy => self.k_energy,
                                };
                                self.oracle.hw_samples(d, &arch, m, k.max(1), &mut self.rng)?
                            }
                        };
                        let std = if samples.len() > 1 { sample_std(&samples) } else { 0.0 };
                        out.insert(
                            hw_key(m, d),
                            QueryValue::Moments {
                                mean: mean(&samples),
                                std,
                                samples,
                            },
                        );
                    }
                }
            }
            Predictor::Surrogate => {
                let row = encode(&self.oracle.space, &arch)?.to_f64();
                let rows = std::slice::from_ref(&row);
                let all = filter == MetricFilter::All;
                if all && self.surrogates.is_empty() {
                    return Err(Error::SurrogateNotFitted("any metric".into()));
                }
                for t in scalars {
                    match self.surrogates.scalar(t) {
                        Ok(p) => {
                            out.insert(t.as_str().to_string(), QueryValue::Scalar(p.predict(rows)?[0]));
                        }
                        Err(_) if all => {}
                        Err(e) => return Err(e),
                    }
                }
                for m in hw {
                    for d in &devices {
                        match self.surrogates.hw(m, d) {
                            Ok(p) => {
                                let (mean, std) = p.predict(rows)?[0];
                                out.insert(
                                    hw_key(m, d),
                                    QueryValue::Moments {
                                        mean,
                                        std,
                                        samples: Vec::new(),
                                    },
                                );
                            }
                            Err(_) if all || device.is_none() => {}
                            Err(e) => return Err(e),
                        }
                    }
                }
                if out.is_empty() {
                    let what = metric.unwrap_or("any metric").to_string();
                    return Err(Error::SurrogateNotFitted(what));
                }
            }
        }
        Ok(out)
    }

    fn oracle_scalar(&self, t: ScalarTarget, arch: &ArchConfig) -> f64 {
        let spec = &self.oracle.space;
        match t {
            ScalarTarget::Perplexity => self.oracle.perplexity(arch),
            ScalarTarget::Params => oracle::param_count(arch, spec) as f64,
            ScalarTarget::Flops => oracle::flops(arch, spec) as f64,
            ScalarTarget::MemBytes => oracle::memory_bytes(arch, spec, self.oracle.bytes_per_param) as f64,
        }
    }

    pub fn generate_dataset(&self, n: usize, k_lat: usize, k_energy: usize, devices: &[String], seed: u64) -> Result<Dataset> {
        generate_dataset(&self.oracle, n, k_lat, k_energy, devices, seed)
    }

    /// One run per seed (in parallel), all scored against the inflated nadir
    /// of the union of their histories, plus EAF surfaces for two objectives.
    pub fn run_baseline(
        &self,
        method: &str,
        objectives: &[String],
        budget: usize,
        seeds: &[u64],
        predictor: Predictor,
    ) -> Result<BaselineReport> {
        let method = Method::parse(method)?;
        let objectives = moo::parse_objectives(objectives)?;
        if seeds.is_empty() {
            return Err(Error::EmptyInput("no seeds"));
        }
        let evaluator: Box<dyn Evaluator> = match predictor {
            Predictor::Oracle => Box::new(OracleEvaluator::new(&self.oracle, objectives)?),
            Predictor::Surrogate => Box::new(SurrogateEvaluator::new(&self.oracle, &self.surrogates, objectives)?),
        };
        let mut results = seeds
            .par_iter()
            .map(|&seed| {
                let mut cfg = self.run_template.clone();
                cfg.budget = budget;
                cfg.seed = seed;
                cfg.reference = None;
                moo::run(method, evaluator.as_ref(), &cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        let union: Vec<ObjectiveVector> = results.iter().flat_map(|r| r.points()).collect();
        let reference = self.run_template.reference.clone().map_or_else(|| inflated_reference(&union), Ok)?;
        for r in &mut results {
            r.set_reference(&reference)?;
        }
        let surfaces = if reference.len() == 2 {
            let fronts: Vec<_> = results.iter().map(RunResult::front).collect();
            eaf_surfaces(&fronts, &self.eaf_levels)?
        } else {
            Vec::new()
        };
        Ok(BaselineReport {
            method: method.as_str().to_string(),
            reference,
            results,
            surfaces,
        })
    }
}

/// Objective evaluation through fitted surrogates. Counters without a fitted
/// surrogate fall back to their closed forms; median and single-draw
/// hardware objectives sample the predicted Gaussian.
pub struct SurrogateEvaluator<'a> {
    pub oracle: &'a Oracle,
    pub surrogates: &'a SurrogateBundle,
    pub objectives: Vec<Objective>,
}

impl<'a> SurrogateEvaluator<'a> {
    pub fn new(oracle: &'a Oracle, surrogates: &'a SurrogateBundle, objectives: Vec<Objective>) -> Result<Self> {
        if objectives.len() < 2 {
            return Err(Error::Config("at least two objectives are required".into()));
        }
        for o in &objectives {
            match o.metric {
                MetricKind::Perplexity => {
                    surrogates.scalar(ScalarTarget::Perplexity)?;
                }
                MetricKind::Hardware(m) => {
                    surrogates.hw(m, o.device.as_deref().expect("checked at parse time"))?;
                }
                _ => {}
            }
        }
        Ok(Self {
            oracle,
            surrogates,
            objectives,
        })
    }

    fn counter(&self, target: ScalarTarget, row: &[Vec<f64>], exact: f64) -> Result<f64> {
        match self.surrogates.scalar(target) {
            Ok(p) => Ok(p.predict(row)?[0]),
            Err(_) => Ok(exact),
        }
    }
}

impl Evaluator for SurrogateEvaluator<'_> {
    fn space(&self) -> &SearchSpaceSpec {
        &self.oracle.space
    }

    fn objective_names(&self) -> Vec<String> {
        self.objectives.iter().map(Objective::name).collect()
    }

    fn evaluate(&self, arch: &ArchConfig, noise: &mut BenchRng) -> Result<ObjectiveVector> {
        let spec = &self.oracle.space;
        let row = vec![encode(spec, arch)?.to_f64()];
        self.objectives
            .iter()
            .map(|o| match o.metric {
                MetricKind::Perplexity => Ok(self.surrogates.scalar(ScalarTarget::Perplexity)?.predict(&row)?[0]),
                MetricKind::Params => self.counter(ScalarTarget::Params, &row, oracle::param_count(arch, spec) as f64),
                MetricKind::Flops => self.counter(ScalarTarget::Flops, &row, oracle::flops(arch, spec) as f64),
                MetricKind::MemBytes => self.counter(
                    ScalarTarget::MemBytes,
                    &row,
                    oracle::memory_bytes(arch, spec, self.oracle.bytes_per_param) as f64,
                ),
                MetricKind::Hardware(m) => {
                    let device = o.device.as_deref().expect("checked at parse time");
                    let (mu, sd) = self.surrogates.hw(m, device)?.predict(&row)?[0];
                    let dist = Normal::new(mu, sd).map_err(|e| Error::Config(e.to_string()))?;
                    Ok(match o.aggregation {
                        Aggregation::Mean => mu,
                        Aggregation::Median => {
                            let draws: Vec<f64> = (0..moo::MEDIAN_DRAWS).map(|_| dist.sample(noise)).collect();
                            median(&draws)
                        }
                        Aggregation::SingleDraw => dist.sample(noise),
                    })
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReport {
    pub method: String,
    pub reference: Vec<f64>,
    pub results: Vec<RunResult>,
    /// Empty unless there are exactly two objectives.
    pub surfaces: Vec<AttainmentSurface>,
}

impl BaselineReport {
    pub fn run_file_name(&self, seed: u64) -> String {
        format!("run_{}_seed{seed}.json", self.method)
    }

    pub fn hv_csv(&self) -> String {
        let mut out = format!("{}\n", moo::HV_CSV_HEADER);
        for r in &self.results {
            out.push_str(&r.hv_csv_rows());
        }
        out
    }

    pub fn eaf_csv(&self) -> String {
        surfaces_to_csv(&self.surfaces)
    }

    /// Writes one JSON per run, `hv.csv`, and `eaf.csv` when surfaces exist.
    pub fn export(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for r in &self.results {
            std::fs::write(dir.join(self.run_file_name(r.seed)), r.to_json()?)?;
        }
        std::fs::write(dir.join("hv.csv"), self.hv_csv())?;
        if !self.surfaces.is_empty() {
            std::fs::write(dir.join("eaf.csv"), self.eaf_csv())?;
        }
        Ok(())
    }
}

fn csv_body<'a>(text: &'a str, header: &str) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == header => {}
        Some(h) => return Err(Error::Parse(format!("expected header `{header}`, found `{h}`"))),
        None => return Err(Error::EmptyInput("empty csv")),
    }
    Ok(lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 2, l.split(',').collect())))
}

fn cell<T: std::str::FromStr>(cells: &[&str], k: usize, line: usize) -> Result<T> {
    cells
        .get(k)
        .and_then(|c| c.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("line {line}: bad column {k}")))
}

/// Inverse of [`surfaces_to_csv`].
pub fn surfaces_from_csv(text: &str) -> Result<Vec<AttainmentSurface>> {
    let mut out: Vec<AttainmentSurface> = Vec::new();
    for (line, cells) in csv_body(text, "level,obj0,obj1")? {
        let level: f64 = cell(&cells, 0, line)?;
        let p = [cell(&cells, 1, line)?, cell(&cells, 2, line)?];
        match out.last_mut() {
            Some(s) if s.level == level => s.points.push(p),
            _ => out.push(AttainmentSurface { level, points: vec![p] }),
        }
    }
    Ok(out)
}

/// Rows of an `hv.csv` file: `(eval_index, hypervolume, seed, method)`.
pub fn hv_from_csv(text: &str) -> Result<Vec<(usize, f64, u64, String)>> {
    csv_body(text, moo::HV_CSV_HEADER)?
        .map(|(line, cells)| {
            Ok((
                cell(&cells, 0, line)?,
                cell(&cells, 1, line)?,
                cell(&cells, 2, line)?,
                cell(&cells, 3, line)?,
            ))
        })
        .collect()
}
