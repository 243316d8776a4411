//! Surrogate predictors over encoded architectures.
//!
//! [`MlpRegressor`] serves scalar metrics (perplexity, memory). Hardware
//! metrics use a [`MomentPredictor`]: one model for the per-architecture
//! observation mean and one for the observation standard deviation.

mod forest;
mod mlp;

pub use forest::{clamp_std, fit_forest, forest_moments, ForestConfig, RegressionTree, TreeEnsemble, STD_FLOOR_REL};
pub use mlp::{fit_mlp, Dense, MlpConfig, MlpRegressor, HIDDEN_WIDTH};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, CalibrationReport, RegressionReport};
use crate::oracle::{HwMetric, MetricRecord};
use crate::space::{encode, ArchConfig, SearchSpaceSpec};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset<T> {
    pub train: Vec<T>,
    pub test: Vec<T>,
    pub ratio: f64,
}

/// Shuffle then cut; the train part holds `round(ratio * n)` items.
pub fn split_dataset<T: Clone, R: Rng + ?Sized>(items: &[T], ratio: f64, rng: &mut R) -> Result<SplitDataset<T>> {
    if items.len() < 2 {
        return Err(Error::TooFewRecords {
            needed: 2,
            found: items.len(),
        });
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {ratio} is outside (0, 1)")));
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(rng);
    let cut = (ratio * items.len() as f64).round() as usize;
    Ok(SplitDataset {
        train: order[..cut].iter().map(|&i| items[i].clone()).collect(),
        test: order[cut..].iter().map(|&i| items[i].clone()).collect(),
        ratio,
    })
}

pub fn encode_rows(spec: &SearchSpaceSpec, archs: &[&ArchConfig]) -> Result<Vec<Vec<f64>>> {
    archs.iter().map(|a| Ok(encode(spec, a)?.to_f64())).collect()
}

fn record_rows(spec: &SearchSpaceSpec, records: &[MetricRecord]) -> Result<Vec<Vec<f64>>> {
    encode_rows(spec, &records.iter().map(|r| &r.arch).collect::<Vec<_>>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Forest,
    Mlp,
}

impl Family {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "forest" => Ok(Self::Forest),
            "mlp" => Ok(Self::Mlp),
            other => Err(Error::Config(format!("unknown surrogate family `{other}` (forest, mlp)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Regressor {
    Forest(TreeEnsemble),
    Mlp(MlpRegressor),
}

impl Regressor {
    pub fn fit(family: Family, rows: &[Vec<f64>], y: &[f64], cfg: &SurrogateConfig) -> Result<Self> {
        Ok(match family {
            Family::Forest => Self::Forest(fit_forest(rows, y, &cfg.forest)?),
            Family::Mlp => Self::Mlp(fit_mlp(rows, y, &cfg.mlp)?),
        })
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        match self {
            Self::Forest(f) => f.predict(rows),
            Self::Mlp(m) => m.predict(rows),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub forest: ForestConfig,
    pub mlp: MlpConfig,
}

/// Scalar targets available on every record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarTarget {
    Perplexity,
    Params,
    Flops,
    MemBytes,
}

impl ScalarTarget {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "perplexity" => Ok(Self::Perplexity),
            "params" => Ok(Self::Params),
            "flops" => Ok(Self::Flops),
            "mem_bytes" | "memory" => Ok(Self::MemBytes),
            other => Err(Error::UnknownMetric(other.to_string())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Perplexity => "perplexity",
            Self::Params => "params",
            Self::Flops => "flops",
            Self::MemBytes => "mem_bytes",
        }
    }

    pub fn value(self, r: &MetricRecord) -> f64 {
        match self {
            Self::Perplexity => r.perplexity,
            Self::Params => r.params as f64,
            Self::Flops => r.flops as f64,
            Self::MemBytes => r.mem_bytes as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarPredictor {
    pub target: ScalarTarget,
    pub model: Regressor,
}

impl ScalarPredictor {
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.model.predict(rows)
    }
}

pub fn fit_scalar_surrogate(
    spec: &SearchSpaceSpec,
    records: &[MetricRecord],
    target: ScalarTarget,
    family: Family,
    cfg: &SurrogateConfig,
) -> Result<ScalarPredictor> {
    let rows = record_rows(spec, records)?;
    let y: Vec<f64> = records.iter().map(|r| target.value(r)).collect();
    Ok(ScalarPredictor {
        target,
        model: Regressor::fit(family, &rows, &y, cfg)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentPredictor {
    pub device: String,
    pub metric: HwMetric,
    pub mean_model: Regressor,
    pub std_model: Regressor,
}

impl MomentPredictor {
    /// `(mean, std)` per row, std clamped to at least 1e-9 of |mean|.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
        let means = self.mean_model.predict(rows)?;
        let stds = self.std_model.predict(rows)?;
        Ok(means.into_iter().zip(stds).map(|(m, s)| (m, clamp_std(m, s))).collect())
    }
}

fn observations<'a>(records: &'a [MetricRecord], device: &str, metric: HwMetric) -> Result<Vec<&'a [f64]>> {
    records
        .iter()
        .enumerate()
        .map(|(index, r)| {
            let obs = r.hw.get(device).map_or(&[][..], |h| h.get(metric));
            if obs.len() < 2 {
                return Err(Error::InsufficientObservations {
                    index,
                    device: device.to_string(),
                    metric: metric.as_str().to_string(),
                    found: obs.len(),
                });
            }
            Ok(obs)
        })
        .collect()
}

pub fn fit_hw_surrogate(
    spec: &SearchSpaceSpec,
    records: &[MetricRecord],
    device: &str,
    metric: HwMetric,
    family: Family,
    cfg: &SurrogateConfig,
) -> Result<MomentPredictor> {
    let obs = observations(records, device, metric)?;
    let rows = record_rows(spec, records)?;
    let means: Vec<f64> = obs.iter().map(|o| metrics::mean(o)).collect();
    let stds: Vec<f64> = obs.iter().map(|o| metrics::sample_std(o)).collect();
    let mut std_cfg = cfg.clone();
    std_cfg.forest.seed = cfg.forest.seed.wrapping_add(1);
    std_cfg.mlp.seed = cfg.mlp.seed.wrapping_add(1);
    Ok(MomentPredictor {
        device: device.to_string(),
        metric,
        mean_model: Regressor::fit(family, &rows, &means, cfg)?,
        std_model: Regressor::fit(family, &rows, &stds, &std_cfg)?,
    })
}

/// One Table-2-style row; `calibration` is present for moment predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateEvaluation {
    pub model: String,
    pub regression: RegressionReport,
    pub spearman: Option<f64>,
    pub kendall: Option<f64>,
    pub calibration: Option<CalibrationReport>,
}

pub const TABLE_COLUMNS: [&str; 9] = [
    "MAE",
    "RMSE",
    "MDAE",
    "MARPD",
    "R²",
    "Corr.",
    "RMS Cal.",
    "MA Cal.",
    "Miscal. Area",
];

impl SurrogateEvaluation {
    pub fn table_header() -> String {
        format!("{:<24}{}", "model", TABLE_COLUMNS.iter().map(|c| format!("{c:>14}")).collect::<String>())
    }

    pub fn table_row(&self) -> String {
        let num = |v: Option<f64>| v.map_or(format!("{:>14}", "nan"), |v| format!("{v:>14.6}"));
        let r = &self.regression;
        let c = self.calibration.as_ref();
        let cells = [
            Some(r.mae),
            Some(r.rmse),
            Some(r.mdae),
            Some(r.marpd),
            r.r2,
            r.pearson,
            c.map(|c| c.rms_cal),
            c.map(|c| c.ma_cal),
            c.map(|c| c.miscal_area),
        ];
        format!("{:<24}{}", self.model, cells.iter().map(|&v| num(v)).collect::<String>())
    }
}

fn rank_stats(pred: &[f64], truth: &[f64]) -> (Option<f64>, Option<f64>) {
    if pred.len() < 2 {
        return (None, None);
    }
    (metrics::spearman_rho(pred, truth).ok(), metrics::kendall_tau(pred, truth).ok())
}

pub fn evaluate_scalar(spec: &SearchSpaceSpec, model: &ScalarPredictor, test: &[MetricRecord]) -> Result<SurrogateEvaluation> {
    let rows = record_rows(spec, test)?;
    let pred = model.predict(&rows)?;
    let truth: Vec<f64> = test.iter().map(|r| model.target.value(r)).collect();
    let (spearman, kendall) = rank_stats(&pred, &truth);
    Ok(SurrogateEvaluation {
        model: model.target.as_str().to_string(),
        regression: metrics::regression_report(&pred, &truth)?,
        spearman,
        kendall,
        calibration: None,
    })
}

/// Accuracy against per-architecture observation means; calibration against
/// every held-out raw observation.
pub fn evaluate_moments(
    spec: &SearchSpaceSpec,
    model: &MomentPredictor,
    test: &[MetricRecord],
    quantiles: usize,
) -> Result<SurrogateEvaluation> {
    let obs = observations(test, &model.device, model.metric)?;
    let rows = record_rows(spec, test)?;
    let moments = model.predict(&rows)?;
    let pred: Vec<f64> = moments.iter().map(|m| m.0).collect();
    let truth: Vec<f64> = obs.iter().map(|o| metrics::mean(o)).collect();
    let (mut cm, mut cs, mut cy) = (Vec::new(), Vec::new(), Vec::new());
    for (&(m, s), o) in moments.iter().zip(&obs) {
        for &y in o.iter() {
            cm.push(m);
            cs.push(s);
            cy.push(y);
        }
    }
    let (spearman, kendall) = rank_stats(&pred, &truth);
    Ok(SurrogateEvaluation {
        model: format!("{}/{}", model.metric.as_str(), model.device),
        regression: metrics::regression_report(&pred, &truth)?,
        spearman,
        kendall,
        calibration: Some(metrics::calibration_report(&cm, &cs, &cy, quantiles)?),
    })
}

#[derive(Serialize, Deserialize)]
struct Document<T> {
    version: u32,
    kind: String,
    model: T,
}

/// Models that persist as a versioned JSON document.
pub trait Persist: Serialize + DeserializeOwned {
    const KIND: &'static str;

    fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Document {
            version: MODEL_FORMAT_VERSION,
            kind: Self::KIND.to_string(),
            model: self,
        })?)
    }

    fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let doc: Document<Self> = serde_json::from_value(value)?;
        if doc.kind != Self::KIND {
            return Err(Error::Parse(format!("expected a `{}` document, found `{}`", Self::KIND, doc.kind)));
        }
        Ok(doc.model)
    }
}

impl Persist for MlpRegressor {
    const KIND: &'static str = "mlp";
}
impl Persist for TreeEnsemble {
    const KIND: &'static str = "forest";
}
impl Persist for MomentPredictor {
    const KIND: &'static str = "moment_predictor";
}
impl Persist for ScalarPredictor {
    const KIND: &'static str = "scalar_predictor";
}
