//! Four-layer ReLU perceptron trained with Adam on the mean squared error.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

pub const HIDDEN_WIDTH: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 1024,
            epochs: 500,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `fan_in x fan_out`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRegressor {
    pub layer_dims: Vec<usize>,
    pub layers: Vec<Dense>,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_mean: f64,
    pub y_scale: f64,
    /// Mean standardized training loss before the first and after the last epoch.
    pub initial_loss: f64,
    pub final_loss: f64,
}

fn column_moments(rows: &[Vec<f64>], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m).powi(2);
        }
    }
    let scale = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

fn check_rows(rows: &[Vec<f64>], dim: Option<usize>) -> Result<usize> {
    let first = rows.first().ok_or(Error::EmptyInput("no training rows"))?.len();
    let dim = dim.unwrap_or(first);
    for r in rows {
        if r.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
    }
    Ok(dim)
}

struct Forward {
    /// Input of every layer plus the final output.
    acts: Vec<Array2<f64>>,
}

impl MlpRegressor {
    fn init<R: Rng + ?Sized>(input_dim: usize, rng: &mut R) -> Vec<Dense> {
        let dims = [input_dim, HIDDEN_WIDTH, HIDDEN_WIDTH, HIDDEN_WIDTH, 1];
        dims.windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let weights = Array2::from_shape_fn((w[0], w[1]), |_| rng.random_range(-bound..=bound));
                let bias = Array1::from_shape_fn(w[1], |_| rng.random_range(-bound..=bound));
                Dense { weights, bias }
            })
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    fn standardize(&self, rows: &[Vec<f64>]) -> Array2<f64> {
        let d = self.input_dim();
        Array2::from_shape_fn((rows.len(), d), |(i, j)| (rows[i][j] - self.x_mean[j]) / self.x_scale[j])
    }

    fn forward(&self, x: Array2<f64>) -> Forward {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x);
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&layer.weights) + &layer.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        Forward { acts }
    }

    /// Mean squared error on standardized inputs/targets, and its gradient
    /// with respect to every layer (weights, bias).
    fn backward(&self, fwd: &Forward, y: &Array1<f64>) -> (f64, Vec<(Array2<f64>, Array1<f64>)>) {
        let n = y.len() as f64;
        let out = fwd.acts.last().unwrap().column(0).to_owned();
        let resid = &out - y;
        let loss = resid.dot(&resid) / n;
        let mut delta = (resid * (2.0 / n)).insert_axis(Axis(1));
        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let gw = fwd.acts[i].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut next = delta.dot(&self.layers[i].weights.t());
                Zip::from(&mut next).and(&fwd.acts[i]).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = next;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        (loss, grads)
    }

    fn standardized_targets(&self, y: &[f64]) -> Array1<f64> {
        y.iter().map(|v| (v - self.y_mean) / self.y_scale).collect()
    }

    /// Loss and flattened parameter gradient on `(rows, y)` under the stored
    /// normalization. Parameter order matches [`Self::flat_params`].
    pub fn loss_and_gradient(&self, rows: &[Vec<f64>], y: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_rows(rows, Some(self.input_dim()))?;
        let fwd = self.forward(self.standardize(rows));
        let (loss, grads) = self.backward(&fwd, &self.standardized_targets(y));
        let flat = grads
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied().collect::<Vec<_>>())
            .collect();
        Ok((loss, flat))
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied().collect::<Vec<_>>())
            .collect()
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        let total: usize = self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum();
        if params.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                found: params.len(),
            });
        }
        let mut it = params.iter();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = *it.next().unwrap());
        }
        Ok(())
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        if rows.is_empty() {
            return Ok(Vec::new());
        }
        check_rows(rows, Some(self.input_dim()))?;
        let fwd = self.forward(self.standardize(rows));
        Ok(fwd
            .acts
            .last()
            .unwrap()
            .column(0)
            .iter()
            .map(|v| v * self.y_scale + self.y_mean)
            .collect())
    }

    pub fn predict_one(&self, row: &[f64]) -> Result<f64> {
        Ok(self.predict(&[row.to_vec()])?[0])
    }
}

struct Adam {
    m: Vec<(Array2<f64>, Array1<f64>)>,
    v: Vec<(Array2<f64>, Array1<f64>)>,
    t: i32,
}

impl Adam {
    fn new(layers: &[Dense]) -> Self {
        let zeros = || {
            layers
                .iter()
                .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.len())))
                .collect::<Vec<_>>()
        };
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    fn step(&mut self, layers: &mut [Dense], grads: &[(Array2<f64>, Array1<f64>)], cfg: &MlpConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *p -= cfg.lr * (*m / c1) / ((*v / c2).sqrt() + cfg.eps);
        };
        for (i, layer) in layers.iter_mut().enumerate() {
            let (mw, mb) = &mut self.m[i];
            let (vw, vb) = &mut self.v[i];
            let (gw, gb) = &grads[i];
            Zip::from(&mut layer.weights)
                .and(mw)
                .and(vw)
                .and(gw)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut layer.bias)
                .and(mb)
                .and(vb)
                .and(gb)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}

pub fn fit_mlp(rows: &[Vec<f64>], y: &[f64], cfg: &MlpConfig) -> Result<MlpRegressor> {
    if rows.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: rows.len(),
            right: y.len(),
        });
    }
    let dim = check_rows(rows, None)?;
    if cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Config("mlp needs batch_size >= 1 and lr > 0".into()));
    }
    let mut rng = seeded(cfg.seed);
    let (x_mean, x_scale) = column_moments(rows, dim);
    let y_rows: Vec<Vec<f64>> = y.iter().map(|&v| vec![v]).collect();
    let (ym, ys) = column_moments(&y_rows, 1);
    let mut model = MlpRegressor {
        layer_dims: vec![dim, HIDDEN_WIDTH, HIDDEN_WIDTH, HIDDEN_WIDTH, 1],
        layers: MlpRegressor::init(dim, &mut rng),
        x_mean,
        x_scale,
        y_mean: ym[0],
        y_scale: ys[0],
        initial_loss: 0.0,
        final_loss: 0.0,
    };
    let x = model.standardize(rows);
    let t = model.standardized_targets(y);
    let full_loss = |m: &MlpRegressor| m.backward(&m.forward(x.clone()), &t).0;
    model.initial_loss = full_loss(&model);

    let mut adam = Adam::new(&model.layers);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb = t.select(Axis(0), batch);
            let fwd = model.forward(xb);
            let (loss, grads) = model.backward(&fwd, &yb);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            adam.step(&mut model.layers, &grads, cfg);
        }
    }
    model.final_loss = full_loss(&model);
    if !model.final_loss.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: cfg.epochs });
    }
    Ok(model)
}
