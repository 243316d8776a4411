//! Flat key-value configuration shared by the library façade and the CLI.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::DEFAULT_QUANTILES;
use crate::moo::RunConfig;
use crate::surrogate::{Family, ForestConfig, MlpConfig, SurrogateConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub space: String,
    pub seed: u64,
    /// Optional JSON file overriding the preset device profiles.
    pub profiles: Option<String>,

    pub n: usize,
    pub k_lat: usize,
    pub k_energy: usize,
    /// Devices recorded in datasets; empty means every profile.
    pub devices: Vec<String>,

    pub split_ratio: f64,
    pub ppl_family: Family,
    pub hw_family: Family,
    pub mlp_epochs: usize,
    pub mlp_lr: f64,
    pub mlp_batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub forest_trees: usize,
    pub forest_max_depth: usize,
    pub forest_min_leaf: usize,
    pub quantiles: usize,

    pub objectives: Vec<String>,
    pub budget: usize,
    pub seeds: Vec<u64>,
    pub pop_size: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub init_points: usize,
    pub mc_samples: usize,
    pub candidates: usize,
    pub lengthscale_factor: f64,
    pub checkpoint_every: usize,
    pub eaf_levels: Vec<f64>,

    pub rfe_trees: usize,
    pub rfe_drop_per_round: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let mlp = MlpConfig::default();
        let forest = ForestConfig::default();
        let run = RunConfig::default();
        Self {
            space: "gpt-s".into(),
            seed: 0,
            profiles: None,
            n: 2000,
            k_lat: 10,
            k_energy: 50,
            devices: Vec::new(),
            split_ratio: 0.8,
            ppl_family: Family::Mlp,
            hw_family: Family::Forest,
            mlp_epochs: mlp.epochs,
            mlp_lr: mlp.lr,
            mlp_batch_size: mlp.batch_size,
            adam_beta1: mlp.beta1,
            adam_beta2: mlp.beta2,
            adam_eps: mlp.eps,
            forest_trees: forest.n_trees,
            forest_max_depth: forest.max_depth,
            forest_min_leaf: forest.min_leaf,
            quantiles: DEFAULT_QUANTILES,
            objectives: vec!["perplexity".into(), "latency/rtx2080".into()],
            budget: run.budget,
            seeds: (0..10).collect(),
            pop_size: run.pop_size,
            crossover_prob: run.crossover_prob,
            mutation_prob: run.mutation_prob,
            init_points: run.init_points,
            mc_samples: run.mc_samples,
            candidates: run.candidates,
            lengthscale_factor: run.lengthscale_factor,
            checkpoint_every: run.checkpoint_every,
            eaf_levels: vec![0.25, 0.5, 0.75],
            rfe_trees: 50,
            rfe_drop_per_round: 1,
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn surrogate_config(&self) -> SurrogateConfig {
        SurrogateConfig {
            forest: ForestConfig {
                n_trees: self.forest_trees,
                max_depth: self.forest_max_depth,
                min_leaf: self.forest_min_leaf,
                seed: self.seed,
            },
            mlp: MlpConfig {
                lr: self.mlp_lr,
                batch_size: self.mlp_batch_size,
                epochs: self.mlp_epochs,
                beta1: self.adam_beta1,
                beta2: self.adam_beta2,
                eps: self.adam_eps,
                seed: self.seed,
            },
        }
    }

    pub fn run_config(&self, seed: u64) -> RunConfig {
        RunConfig {
            budget: self.budget,
            seed,
            pop_size: self.pop_size,
            crossover_prob: self.crossover_prob,
            mutation_prob: self.mutation_prob,
            init_points: self.init_points,
            mc_samples: self.mc_samples,
            candidates: self.candidates,
            lengthscale_factor: self.lengthscale_factor,
            checkpoint_every: self.checkpoint_every,
            reference: None,
        }
    }
}
