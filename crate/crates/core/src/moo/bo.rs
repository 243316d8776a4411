use rand::Rng;
use rand_distr::StandardNormal;

use super::gp::GaussianProcess;
use super::{Evaluator, Method, RunConfig, RunResult, Tracker};
use crate::error::{Error, Result};
use crate::pareto::{hypervolume, inflated_reference, ObjectiveVector};
use crate::rng::stream;
use crate::special::{normal_cdf, normal_pdf};
use crate::space::{encode, sample_uniform, ArchConfig, SearchSpaceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scalarization {
    /// Equal fixed weights (LSBO).
    LinearFixed,
    /// Weights drawn uniformly on the simplex every iteration (RSBO).
    RandomPerIteration,
}

/// Expected improvement below `best` for a minimized target.
pub fn expected_improvement(mean: f64, std: f64, best: f64) -> f64 {
    if std <= 1e-12 {
        return (best - mean).max(0.0);
    }
    let u = (best - mean) / std;
    ((best - mean) * normal_cdf(u) + std * normal_pdf(u)).max(0.0)
}

fn weakly(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

/// `(x, y)` of the front points strictly inside the reference box, x ascending.
fn sorted_2d(front: &[ObjectiveVector], reference: &[f64]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = front
        .iter()
        .filter(|q| q[0] < reference[0] && q[1] < reference[1])
        .map(|q| (q[0], q[1]))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts
}

fn hvi_2d(sorted: &[(f64, f64)], p: &[f64], reference: &[f64]) -> f64 {
    let (p0, p1) = (p[0], p[1]);
    let mut i = 0;
    let mut cover = reference[1];
    while i < sorted.len() && sorted[i].0 <= p0 {
        cover = cover.min(sorted[i].1);
        i += 1;
    }
    let mut x = p0;
    let mut area = 0.0;
    while cover > p1 {
        let next_x = if i < sorted.len() { sorted[i].0.min(reference[0]) } else { reference[0] };
        area += (next_x - x) * (cover - p1);
        if i >= sorted.len() || sorted[i].0 >= reference[0] {
            break;
        }
        cover = cover.min(sorted[i].1);
        x = next_x;
        i += 1;
    }
    area
}

/// Hypervolume gained by adding `p` to `front` under `reference`.
pub fn hv_improvement(front: &[ObjectiveVector], p: &[f64], reference: &[f64]) -> Result<f64> {
    if p.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            found: p.len(),
        });
    }
    if p.iter().zip(reference).any(|(a, r)| a >= r) || front.iter().any(|q| weakly(q, p)) {
        return Ok(0.0);
    }
    if p.len() == 2 {
        return Ok(hvi_2d(&sorted_2d(front, reference), p, reference));
    }
    let mut with = front.to_vec();
    with.push(p.to_vec());
    let base = if front.is_empty() { 0.0 } else { hypervolume(front, reference)?.value };
    Ok((hypervolume(&with, reference)?.value - base).max(0.0))
}

/// Mean hypervolume improvement over `mc_samples` draws from independent
/// Gaussian marginals per objective.
pub fn ehvi_mc_acquisition<R: Rng + ?Sized>(
    front: &[ObjectiveVector],
    reference: &[f64],
    means: &[f64],
    stds: &[f64],
    mc_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let sorted = (reference.len() == 2).then(|| sorted_2d(front, reference));
    let mut total = 0.0;
    let mut y = vec![0.0; means.len()];
    for _ in 0..mc_samples {
        for k in 0..means.len() {
            let z: f64 = rng.sample(StandardNormal);
            y[k] = means[k] + stds[k] * z;
        }
        total += match &sorted {
            Some(s) => {
                if y.iter().zip(reference).any(|(a, r)| a >= r) || front.iter().any(|q| weakly(q, &y)) {
                    0.0
                } else {
                    hvi_2d(s, &y, reference)
                }
            }
            None => hv_improvement(front, &y, reference)?,
        };
    }
    Ok(total / mc_samples.max(1) as f64)
}

fn check(cfg: &RunConfig) -> Result<()> {
    if cfg.init_points < 2 || cfg.budget <= cfg.init_points {
        return Err(Error::Config("model-based search needs budget > init_points >= 2".into()));
    }
    if cfg.candidates == 0 {
        return Err(Error::Config("candidates must be at least 1".into()));
    }
    Ok(())
}

fn rows(spec: &SearchSpaceSpec, archs: &[&ArchConfig]) -> Vec<Vec<f64>> {
    archs
        .iter()
        .map(|a| encode(spec, a).expect("sampled architectures are valid").to_f64())
        .collect()
}

fn initialize<R: Rng>(t: &mut Tracker<'_>, cfg: &RunConfig, rng: &mut R) -> Result<()> {
    for arch in sample_uniform(t.space(), cfg.init_points, false, rng)? {
        t.evaluate(arch)?;
        if t.checkpoint_due() {
            let f = t.history_front();
            t.checkpoint(f);
        }
    }
    Ok(())
}

fn lengthscale(spec: &SearchSpaceSpec, cfg: &RunConfig) -> f64 {
    cfg.lengthscale_factor * (spec.encoding_len() as f64).sqrt()
}

/// Index of the first maximum.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn run_scalarized_bo(eval: &dyn Evaluator, cfg: &RunConfig, mode: Scalarization) -> Result<RunResult> {
    check(cfg)?;
    let mut t = Tracker::new(eval, cfg)?;
    let mut rng = stream(cfg.seed, 0);
    initialize(&mut t, cfg, &mut rng)?;
    let m = t.history()[0].objectives.len();
    while !t.done() {
        let ys: Vec<&ObjectiveVector> = t.history().iter().map(|e| &e.objectives).collect();
        let lo: Vec<f64> = (0..m).map(|k| ys.iter().map(|y| y[k]).fold(f64::INFINITY, f64::min)).collect();
        let hi: Vec<f64> = (0..m).map(|k| ys.iter().map(|y| y[k]).fold(f64::NEG_INFINITY, f64::max)).collect();
        let weights: Vec<f64> = match mode {
            Scalarization::LinearFixed => vec![1.0 / m as f64; m],
            Scalarization::RandomPerIteration => {
                let e: Vec<f64> = (0..m).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| v / s).collect()
            }
        };
        let target: Vec<f64> = ys
            .iter()
            .map(|y| {
                (0..m)
                    .map(|k| {
                        let range = hi[k] - lo[k];
                        let z = if range > 0.0 { (y[k] - lo[k]) / range } else { 0.0 };
                        weights[k] * z
                    })
                    .sum()
            })
            .collect();
        let archs: Vec<&ArchConfig> = t.history().iter().map(|e| &e.arch).collect();
        let gp = GaussianProcess::fit(&rows(t.space(), &archs), &target, Some(lengthscale(t.space(), cfg)))?;
        let best = target.iter().copied().fold(f64::INFINITY, f64::min);
        let candidates = sample_uniform(t.space(), cfg.candidates, false, &mut rng)?;
        let cand_rows = rows(t.space(), &candidates.iter().collect::<Vec<_>>());
        let ei: Vec<f64> = cand_rows
            .iter()
            .map(|r| {
                let (mu, var) = gp.predict(r);
                expected_improvement(mu, var.sqrt(), best)
            })
            .collect();
        let pick = argmax(&ei);
        t.evaluate(candidates[pick].clone())?;
        if t.checkpoint_due() {
            let f = t.history_front();
            t.checkpoint(f);
        }
    }
    let method = match mode {
        Scalarization::LinearFixed => Method::Lsbo,
        Scalarization::RandomPerIteration => Method::Rsbo,
    };
    t.finish(method, cfg)
}

pub fn run_ehvi_mc(eval: &dyn Evaluator, cfg: &RunConfig) -> Result<RunResult> {
    check(cfg)?;
    if cfg.mc_samples < 16 {
        return Err(Error::Config("ehvi needs mc_samples >= 16".into()));
    }
    let mut t = Tracker::new(eval, cfg)?;
    let mut rng = stream(cfg.seed, 0);
    initialize(&mut t, cfg, &mut rng)?;
    let m = t.history()[0].objectives.len();
    while !t.done() {
        let archs: Vec<&ArchConfig> = t.history().iter().map(|e| &e.arch).collect();
        let train = rows(t.space(), &archs);
        let gps = (0..m)
            .map(|k| {
                let y: Vec<f64> = t.history().iter().map(|e| e.objectives[k]).collect();
                GaussianProcess::fit(&train, &y, Some(lengthscale(t.space(), cfg)))
            })
            .collect::<Result<Vec<_>>>()?;
        let front = t.history_front();
        let reference = inflated_reference(&front)?;
        let candidates = sample_uniform(t.space(), cfg.candidates, false, &mut rng)?;
        let cand_rows = rows(t.space(), &candidates.iter().collect::<Vec<_>>());
        let mut scores = Vec::with_capacity(candidates.len());
        for r in &cand_rows {
            let (means, stds): (Vec<f64>, Vec<f64>) = gps
                .iter()
                .map(|gp| {
                    let (mu, var) = gp.predict(r);
                    (mu, var.sqrt())
                })
                .unzip();
            scores.push(ehvi_mc_acquisition(&front, &reference, &means, &stds, cfg.mc_samples, &mut rng)?);
        }
        let pick = argmax(&scores);
        t.evaluate(candidates[pick].clone())?;
        if t.checkpoint_due() {
            let f = t.history_front();
            t.checkpoint(f);
        }
    }
    t.finish(Method::Ehvi, cfg)
}
