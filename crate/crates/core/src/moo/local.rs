use rand::Rng;

use super::{Evaluator, Method, RunConfig, RunResult, Tracker};
use crate::error::Result;
use crate::pareto::ObjectiveVector;
use crate::rng::stream;
use crate::space::{mutate, sample_uniform, ArchConfig};

fn strictly(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Archive-based Pareto local search: mutate a uniformly chosen archive
/// member and keep the neighbour unless an archive member dominates it or
/// already has the same objective vector.
pub fn run_local_search(eval: &dyn Evaluator, cfg: &RunConfig) -> Result<RunResult> {
    let mut t = Tracker::new(eval, cfg)?;
    let mut rng = stream(cfg.seed, 0);
    let start = sample_uniform(t.space(), 1, false, &mut rng)?.remove(0);
    let y = t.evaluate(start.clone())?;
    let mut archive: Vec<(ArchConfig, ObjectiveVector)> = vec![(start, y)];
    let front = |a: &[(ArchConfig, ObjectiveVector)]| a.iter().map(|m| m.1.clone()).collect::<Vec<_>>();
    if t.checkpoint_due() {
        t.checkpoint(front(&archive));
    }
    while !t.done() {
        let pick = rng.random_range(0..archive.len());
        let child = mutate(t.space(), &archive[pick].0, &mut rng);
        let y = t.evaluate(child.clone())?;
        let rejected = archive.iter().any(|(_, q)| strictly(q, &y) || *q == y);
        if !rejected {
            archive.retain(|(_, q)| !strictly(&y, q));
            archive.push((child, y));
        }
        if t.checkpoint_due() {
            t.checkpoint(front(&archive));
        }
    }
    t.finish(Method::Ls, cfg)
}
