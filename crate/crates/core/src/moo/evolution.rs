use std::cmp::Ordering;
use std::collections::VecDeque;

use rand::Rng;

use super::{Method, RunConfig, RunResult, Tracker, Evaluator};
use crate::error::{Error, Result};
use crate::pareto::{crowding_distance, nondominated_sort, ObjectiveVector};
use crate::rng::stream;
use crate::space::{crossover, mutate, sample_uniform, ArchConfig};

/// Nondominated rank of each point and its crowding distance within its rank.
pub fn rank_and_crowding(points: &[ObjectiveVector]) -> Result<(Vec<usize>, Vec<f64>)> {
    let ranks = nondominated_sort(points)?;
    let mut crowd = vec![0.0; points.len()];
    let max_rank = ranks.iter().copied().max().unwrap_or(0);
    for r in 0..=max_rank {
        let members: Vec<usize> = (0..points.len()).filter(|&i| ranks[i] == r).collect();
        let front: Vec<ObjectiveVector> = members.iter().map(|&i| points[i].clone()).collect();
        for (&i, d) in members.iter().zip(crowding_distance(&front)) {
            crowd[i] = d;
        }
    }
    Ok((ranks, crowd))
}

/// Lower rank wins, then larger crowding distance, then the first index.
fn better(ranks: &[usize], crowd: &[f64], a: usize, b: usize) -> usize {
    match ranks[a].cmp(&ranks[b]).then(crowd[b].total_cmp(&crowd[a])) {
        Ordering::Greater => b,
        _ => a,
    }
}

fn tournament<R: Rng>(ranks: &[usize], crowd: &[f64], rng: &mut R) -> usize {
    let a = rng.random_range(0..ranks.len());
    let b = rng.random_range(0..ranks.len());
    better(ranks, crowd, a, b)
}

fn rank0(points: &[ObjectiveVector], ranks: &[usize]) -> Vec<ObjectiveVector> {
    points
        .iter()
        .zip(ranks)
        .filter(|(_, &r)| r == 0)
        .map(|(p, _)| p.clone())
        .collect()
}

/// Regularized evolution with multi-objective tournament selection; the
/// oldest member is discarded after each child is added.
pub fn run_morea(eval: &dyn Evaluator, cfg: &RunConfig) -> Result<RunResult> {
    if cfg.pop_size < 2 || cfg.budget < cfg.pop_size {
        return Err(Error::Config("morea needs pop_size >= 2 and budget >= pop_size".into()));
    }
    let mut t = Tracker::new(eval, cfg)?;
    let mut rng = stream(cfg.seed, 0);
    let mut pop: VecDeque<(ArchConfig, ObjectiveVector)> = VecDeque::with_capacity(cfg.pop_size + 1);
    for arch in sample_uniform(t.space(), cfg.pop_size, false, &mut rng)? {
        let y = t.evaluate(arch.clone())?;
        pop.push_back((arch, y));
        if t.checkpoint_due() {
            let f = t.history_front();
            t.checkpoint(f);
        }
    }
    while !t.done() {
        let pts: Vec<ObjectiveVector> = pop.iter().map(|m| m.1.clone()).collect();
        let (ranks, crowd) = rank_and_crowding(&pts)?;
        let parent = tournament(&ranks, &crowd, &mut rng);
        let child = mutate(t.space(), &pop[parent].0, &mut rng);
        let y = t.evaluate(child.clone())?;
        pop.push_back((child, y));
        pop.pop_front();
        if t.checkpoint_due() {
            let pts: Vec<ObjectiveVector> = pop.iter().map(|m| m.1.clone()).collect();
            let ranks = nondominated_sort(&pts)?;
            t.checkpoint(rank0(&pts, &ranks));
        }
    }
    t.finish(Method::Morea, cfg)
}

/// Indices of the `keep` survivors ordered by rank, then crowding distance
/// (descending), then index.
pub(crate) fn environmental_selection(points: &[ObjectiveVector], keep: usize) -> Result<Vec<usize>> {
    let (ranks, crowd) = rank_and_crowding(points)?;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| ranks[a].cmp(&ranks[b]).then(crowd[b].total_cmp(&crowd[a])).then(a.cmp(&b)));
    order.truncate(keep);
    Ok(order)
}

pub fn run_nsga2(eval: &dyn Evaluator, cfg: &RunConfig) -> Result<RunResult> {
    if cfg.pop_size < 4 || cfg.pop_size % 2 != 0 {
        return Err(Error::Config("nsga2 needs an even pop_size >= 4".into()));
    }
    if !(0.0..=1.0).contains(&cfg.crossover_prob) || !(0.0..=1.0).contains(&cfg.mutation_prob) {
        return Err(Error::Config("nsga2 probabilities must lie in [0, 1]".into()));
    }
    let mut t = Tracker::new(eval, cfg)?;
    let mut rng = stream(cfg.seed, 0);
    let mut pop: Vec<(ArchConfig, ObjectiveVector)> = Vec::with_capacity(2 * cfg.pop_size);
    let init = cfg.pop_size.min(cfg.budget);
    for arch in sample_uniform(t.space(), init, false, &mut rng)? {
        let y = t.evaluate(arch.clone())?;
        pop.push((arch, y));
        if t.checkpoint_due() {
            let f = t.history_front();
            t.checkpoint(f);
        }
    }
    let mut front = {
        let pts: Vec<ObjectiveVector> = pop.iter().map(|m| m.1.clone()).collect();
        rank0(&pts, &nondominated_sort(&pts)?)
    };
    while !t.done() {
        let pts: Vec<ObjectiveVector> = pop.iter().map(|m| m.1.clone()).collect();
        let (ranks, crowd) = rank_and_crowding(&pts)?;
        let n_children = cfg.pop_size.min(t.remaining());
        let mut children = Vec::with_capacity(n_children);
        for _ in 0..n_children {
            let a = tournament(&ranks, &crowd, &mut rng);
            let mut child = if rng.random_bool(cfg.crossover_prob) {
                let b = tournament(&ranks, &crowd, &mut rng);
                crossover(t.space(), &pop[a].0, &pop[b].0, &mut rng)
            } else {
                pop[a].0.clone()
            };
            if rng.random_bool(cfg.mutation_prob) {
                child = mutate(t.space(), &child, &mut rng);
            }
            let y = t.evaluate(child.clone())?;
            children.push((child, y));
            if t.checkpoint_due() {
                t.checkpoint(front.clone());
            }
        }
        pop.extend(children);
        let pts: Vec<ObjectiveVector> = pop.iter().map(|m| m.1.clone()).collect();
        let survivors = environmental_selection(&pts, cfg.pop_size)?;
        let mut next = Vec::with_capacity(cfg.pop_size);
        for i in survivors {
            next.push(pop[i].clone());
        }
        pop = next;
        let pts: Vec<ObjectiveVector> = pop.iter().map(|m| m.1.clone()).collect();
        front = rank0(&pts, &nondominated_sort(&pts)?);
        let n = t.history().len();
        if let Some(last) = t.checkpoint_last_mut() {
            if last.evaluations == n {
                last.front = front.clone();
            }
        }
    }
    t.finish(Method::Nsga2, cfg)
}
