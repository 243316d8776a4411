//! Bagged CART regression trees.
//!
//! Splits maximize the reduction in squared error; candidate thresholds are
//! midpoints between consecutive distinct feature values and a candidate
//! replaces the incumbent only if its gain is strictly larger, so ties go to
//! the lowest feature index and then the lowest threshold. Samples with
//! `x[f] <= threshold` go left.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 50,
            max_depth: 14,
            min_leaf: 1,
            seed: 0,
        }
    }
}

/// Nodes stored as parallel arrays; `feature[i] < 0` marks a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        while self.feature[node] >= 0 {
            let f = self.feature[node] as usize;
            node = if x[f] <= self.threshold[node] {
                self.left[node]
            } else {
                self.right[node]
            } as usize;
        }
        self.value[node]
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.feature.iter().filter(|&&f| f < 0).count()
    }

    fn push_leaf(&mut self, value: f64) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.feature.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub n_features: usize,
    pub config: ForestConfig,
    pub trees: Vec<RegressionTree>,
    /// Row indices drawn for each tree.
    pub bootstrap: Vec<Vec<u32>>,
    /// Impurity-decrease importance, normalized per tree then averaged.
    pub importances: Vec<f64>,
}

struct Builder<'a> {
    /// Column-major feature values of the bootstrap sample.
    cols: &'a [Vec<f64>],
    y: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
    tree: RegressionTree,
    gains: Vec<f64>,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn best_split(&self, orders: &[Vec<u32>], sum: f64) -> Option<Split> {
        let n = orders[0].len();
        let parent = sum * sum / n as f64;
        let mut best: Option<Split> = None;
        for (f, order) in orders.iter().enumerate() {
            let col = &self.cols[f];
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                let p = order[k] as usize;
                left_sum += self.y[p];
                let nl = k + 1;
                let nr = n - nl;
                if nl < self.min_leaf || nr < self.min_leaf {
                    continue;
                }
                let a = col[p];
                let b = col[order[k + 1] as usize];
                if a == b {
                    continue;
                }
                let right_sum = sum - left_sum;
                let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64 - parent;
                if best.as_ref().map_or(gain > 0.0, |s| gain > s.gain) {
                    best = Some(Split {
                        feature: f,
                        threshold: a + (b - a) / 2.0,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, orders: Vec<Vec<u32>>, depth: usize) -> usize {
        let n = orders[0].len();
        let sum: f64 = orders[0].iter().map(|&p| self.y[p as usize]).sum();
        let mean = sum / n as f64;
        let first = self.y[orders[0][0] as usize];
        let constant = orders[0].iter().all(|&p| self.y[p as usize] == first);
        if depth >= self.max_depth || n < 2 * self.min_leaf || constant {
            return self.tree.push_leaf(mean);
        }
        let Some(split) = self.best_split(&orders, sum) else {
            return self.tree.push_leaf(mean);
        };
        let col = &self.cols[split.feature];
        let (left, right): (Vec<Vec<u32>>, Vec<Vec<u32>>) = orders
            .into_iter()
            .map(|order| order.into_iter().partition(|&p| col[p as usize] <= split.threshold))
            .unzip();
        self.gains[split.feature] += split.gain;
        let node = self.tree.push_leaf(mean);
        self.tree.feature[node] = split.feature as i32;
        self.tree.threshold[node] = split.threshold;
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        self.tree.left[node] = l as u32;
        self.tree.right[node] = r as u32;
        node
    }
}

fn fit_tree(
    rows: &[Vec<f64>],
    y: &[f64],
    sample: &[u32],
    cfg: &ForestConfig,
    n_features: usize,
) -> (RegressionTree, Vec<f64>) {
    let cols: Vec<Vec<f64>> = (0..n_features)
        .map(|f| sample.iter().map(|&i| rows[i as usize][f]).collect())
        .collect();
    let ys: Vec<f64> = sample.iter().map(|&i| y[i as usize]).collect();
    let orders: Vec<Vec<u32>> = cols
        .iter()
        .map(|col| {
            let mut o: Vec<u32> = (0..sample.len() as u32).collect();
            o.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            o
        })
        .collect();
    let mut b = Builder {
        cols: &cols,
        y: &ys,
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf,
        tree: RegressionTree {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            value: Vec::new(),
        },
        gains: vec![0.0; n_features],
    };
    if n_features == 0 {
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        b.tree.push_leaf(mean);
    } else {
        b.build(orders, 0);
    }
    (b.tree, b.gains)
}

pub fn fit_forest(rows: &[Vec<f64>], y: &[f64], cfg: &ForestConfig) -> Result<TreeEnsemble> {
    if rows.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: rows.len(),
            right: y.len(),
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("no training rows"));
    }
    if cfg.n_trees < 2 || cfg.max_depth == 0 || cfg.min_leaf == 0 {
        return Err(Error::Config(
            "forest needs n_trees >= 2, max_depth >= 1 and min_leaf >= 1".into(),
        ));
    }
    if rows.len() < cfg.min_leaf {
        return Err(Error::TooFewRecords {
            needed: cfg.min_leaf,
            found: rows.len(),
        });
    }
    let d = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: r.len(),
        });
    }
    let n = rows.len();
    let mut rng = seeded(cfg.seed);
    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut bootstrap = Vec::with_capacity(cfg.n_trees);
    let mut importances = vec![0.0; d];
    for _ in 0..cfg.n_trees {
        let sample: Vec<u32> = (0..n).map(|_| rng.random_range(0..n as u32)).collect();
        let (tree, gains) = fit_tree(rows, y, &sample, cfg, d);
        let total: f64 = gains.iter().sum();
        if total > 0.0 {
            for (imp, g) in importances.iter_mut().zip(&gains) {
                *imp += g / total / cfg.n_trees as f64;
            }
        }
        trees.push(tree);
        bootstrap.push(sample);
    }
    Ok(TreeEnsemble {
        n_features: d,
        config: cfg.clone(),
        trees,
        bootstrap,
        importances,
    })
}

impl TreeEnsemble {
    pub fn tree_predictions(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(self.trees.iter().map(|t| t.predict(x)).collect())
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<f64> {
        Ok(forest_moments(self, x)?.0)
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict_one(r)).collect()
    }
}

/// Lower bound on a predicted standard deviation relative to the mean.
pub const STD_FLOOR_REL: f64 = 1e-9;

pub fn clamp_std(mean: f64, std: f64) -> f64 {
    std.max(STD_FLOOR_REL * mean.abs())
}

/// Mean and population standard deviation of the per-tree predictions.
pub fn forest_moments(ensemble: &TreeEnsemble, x: &[f64]) -> Result<(f64, f64)> {
    let preds = ensemble.tree_predictions(x)?;
    let n = preds.len() as f64;
    let mean = preds.iter().sum::<f64>() / n;
    let var = preds.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, clamp_std(mean, var.sqrt())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_trees: usize, max_depth: usize) -> ForestConfig {
        ForestConfig {
            n_trees,
            max_depth,
            min_leaf: 1,
            seed: 3,
        }
    }

    #[test]
    fn single_x_value_gives_single_leaves() {
        let rows = vec![vec![2.0, 5.0]; 6];
        let y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let f = fit_forest(&rows, &y, &cfg(4, 5)).unwrap();
        for (t, sample) in f.trees.iter().zip(&f.bootstrap) {
            assert_eq!(t.n_nodes(), 1);
            let m = sample.iter().map(|&i| y[i as usize]).sum::<f64>() / sample.len() as f64;
            assert!((t.value[0] - m).abs() < 1e-12);
        }
    }

    #[test]
    fn step_function_is_fit_exactly_at_depth_two() {
        // Two clusters either side of 0.5 so every midpoint threshold separates them.
        let x0 = |i: usize| if i < 100 { i as f64 / 250.0 } else { 0.6 + (i - 100) as f64 / 250.0 };
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![x0(i), ((i * 7) % 13) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r[0] > 0.5))).collect();
        let f = fit_forest(&rows, &y, &cfg(10, 2)).unwrap();
        let mse = f
            .predict(&rows)
            .unwrap()
            .iter()
            .zip(&y)
            .map(|(p, t)| (p - t).powi(2))
            .sum::<f64>()
            / 200.0;
        assert!(mse < 1e-12, "mse {mse}");
        assert!(f.importances[0] > 0.99);
    }

    #[test]
    fn ties_pick_lowest_feature_then_lowest_threshold() {
        // Features 0 and 1 are identical; feature 0 must win.
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![(i / 4) as f64, (i / 4) as f64]).collect();
        let y: Vec<f64> = (0..8).map(|i| (i / 4) as f64).collect();
        let sample: Vec<u32> = (0..8).collect();
        let (tree, _) = fit_tree(&rows, &y, &sample, &cfg(2, 3), 2);
        assert_eq!(tree.feature[0], 0);
        assert_eq!(tree.threshold[0], 0.5);
        // Symmetric data with two equally good thresholds: the lower one wins.
        let rows: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 3.0].iter().map(|&v| vec![v]).collect();
        let y = [0.0, 1.0, 1.0, 0.0];
        let (tree, _) = fit_tree(&rows, &y, &[0, 1, 2, 3], &cfg(2, 1), 1);
        assert_eq!(tree.threshold[0], 0.5);
    }

    #[test]
    fn same_seed_same_structure() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 7) as f64, (i % 5) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * 2.0 - r[1]).collect();
        assert_eq!(fit_forest(&rows, &y, &cfg(5, 4)).unwrap(), fit_forest(&rows, &y, &cfg(5, 4)).unwrap());
        let other = ForestConfig { seed: 4, ..cfg(5, 4) };
        assert_ne!(fit_forest(&rows, &y, &cfg(5, 4)).unwrap(), fit_forest(&rows, &y, &other).unwrap());
    }

    #[test]
    fn two_tree_moments() {
        let leaf = |v: f64| RegressionTree {
            feature: vec![-1],
            threshold: vec![0.0],
            left: vec![0],
            right: vec![0],
            value: vec![v],
        };
        let mut ens = TreeEnsemble {
            n_features: 1,
            config: cfg(2, 1),
            trees: vec![leaf(1.0), leaf(3.0)],
            bootstrap: vec![vec![], vec![]],
            importances: vec![0.0],
        };
        assert_eq!(forest_moments(&ens, &[0.0]).unwrap(), (2.0, 1.0));
        ens.trees = vec![leaf(4.0), leaf(4.0)];
        assert_eq!(forest_moments(&ens, &[0.0]).unwrap(), (4.0, 4e-9));
    }

    #[test]
    fn config_and_input_errors() {
        assert!(matches!(fit_forest(&[], &[], &cfg(2, 2)), Err(Error::EmptyInput(_))));
        assert!(matches!(fit_forest(&[vec![1.0]], &[1.0], &cfg(1, 2)), Err(Error::Config(_))));
        let f = fit_forest(&[vec![1.0], vec![2.0]], &[1.0, 2.0], &cfg(2, 2)).unwrap();
        assert!(matches!(f.predict_one(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }
}
