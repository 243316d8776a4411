//! Pareto dominance, fronts, hypervolume and empirical attainment functions.
//!
//! All objectives are minimized. Two dominance relations coexist:
//! [`dominates`] is the weak relation (no worse everywhere, equality allowed)
//! used by attainment functions, and [`strictly_dominates`] additionally
//! requires one strict improvement and defines Pareto fronts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

pub type ObjectiveVector = Vec<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Front {
    pub points: Vec<ObjectiveVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttainmentSurface {
    /// Achieved level k/n.
    pub level: f64,
    /// Staircase vertices, x ascending and y descending.
    pub points: Vec<[f64; 2]>,
}

fn check_dim(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

/// Weak dominance: `a` is no worse than `b` in every objective.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    check_dim(a, b)?;
    Ok(weakly(a, b))
}

fn weakly(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

fn strictly(a: &[f64], b: &[f64]) -> bool {
    weakly(a, b) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// No worse everywhere and strictly better somewhere.
pub fn strictly_dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    check_dim(a, b)?;
    Ok(strictly(a, b))
}

fn check_points(points: &[ObjectiveVector]) -> Result<usize> {
    let first = points.first().ok_or(Error::EmptyInput("no points"))?;
    for p in points {
        check_dim(first, p)?;
    }
    Ok(first.len())
}

/// Indices of the non-dominated points, keeping the first copy of duplicates.
pub fn pareto_indices(points: &[ObjectiveVector]) -> Vec<usize> {
    let mut keep = Vec::new();
    'outer: for (i, p) in points.iter().enumerate() {
        for (j, q) in points.iter().enumerate() {
            if strictly(q, p) || (j < i && q == p) {
                continue 'outer;
            }
        }
        keep.push(i);
    }
    keep
}

pub fn pareto_front(points: &[ObjectiveVector]) -> Result<Front> {
    check_points(points)?;
    Ok(Front {
        points: pareto_indices(points).into_iter().map(|i| points[i].clone()).collect(),
    })
}

/// Rank 0 is the Pareto front; rank k the front after removing ranks < k.
pub fn nondominated_sort(points: &[ObjectiveVector]) -> Result<Vec<usize>> {
    check_points(points)?;
    let n = points.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if strictly(&points[i], &points[j]) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if strictly(&points[j], &points[i]) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut ranks = vec![0usize; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    let mut rank = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            ranks[i] = rank;
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        current = next;
        rank += 1;
    }
    Ok(ranks)
}

/// Crowding distance of each point of a mutually non-dominated set.
/// Repeated copies of a point get 0; the first copy is scored on the
/// de-duplicated set.
pub fn crowding_distance(front: &[ObjectiveVector]) -> Vec<f64> {
    let n = front.len();
    let mut out = vec![0.0; n];
    let unique: Vec<usize> = (0..n).filter(|&i| !front[..i].contains(&front[i])).collect();
    if unique.len() <= 2 {
        for &i in &unique {
            out[i] = f64::INFINITY;
        }
        return out;
    }
    let m = front[unique[0]].len();
    for obj in 0..m {
        let mut order = unique.clone();
        order.sort_by(|&a, &b| front[a][obj].total_cmp(&front[b][obj]).then(a.cmp(&b)));
        let lo = front[order[0]][obj];
        let hi = front[*order.last().unwrap()][obj];
        out[order[0]] = f64::INFINITY;
        out[*order.last().unwrap()] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in order.windows(3) {
            out[w[1]] += (front[w[2]][obj] - front[w[0]][obj]) / range;
        }
    }
    out
}

/// Componentwise maximum over the Pareto front of `points`.
pub fn nadir(points: &[ObjectiveVector]) -> Result<ObjectiveVector> {
    let front = pareto_front(points)?;
    let m = front.points[0].len();
    Ok((0..m)
        .map(|k| front.points.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max))
        .collect())
}

/// Reference point `nadir + 0.1 * |nadir|` (i.e. nadir x 1.1 for positive objectives).
pub fn inflated_reference(points: &[ObjectiveVector]) -> Result<ObjectiveVector> {
    Ok(nadir(points)?.into_iter().map(|v| v + 0.1 * v.abs()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hypervolume {
    pub value: f64,
    /// Zero for exact computations.
    pub std_error: f64,
    /// Points dropped because they exceed the reference in some objective.
    pub clipped: usize,
}

fn clip(points: &[ObjectiveVector], reference: &[f64]) -> Result<(Vec<ObjectiveVector>, usize)> {
    for p in points {
        check_dim(reference, p)?;
    }
    let kept: Vec<ObjectiveVector> = points.iter().filter(|p| weakly(p, reference)).cloned().collect();
    let clipped = points.len() - kept.len();
    if kept.is_empty() {
        return Ok((kept, clipped));
    }
    let front = pareto_indices(&kept).into_iter().map(|i| kept[i].clone()).collect();
    Ok((front, clipped))
}

fn hv2d(front: &[ObjectiveVector], reference: &[f64]) -> f64 {
    let mut pts: Vec<[f64; 2]> = front.iter().map(|p| [p[0], p[1]]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut best_y = reference[1];
    for (i, p) in pts.iter().enumerate() {
        if p[1] >= best_y {
            continue;
        }
        let next_x = pts[i + 1..]
            .iter()
            .find(|q| q[1] < p[1])
            .map_or(reference[0], |q| q[0]);
        area += (next_x - p[0]) * (reference[1] - p[1]);
        best_y = p[1];
    }
    area
}

fn hv3d(front: &[ObjectiveVector], reference: &[f64]) -> f64 {
    let mut pts = front.to_vec();
    pts.sort_by(|a, b| a[2].total_cmp(&b[2]));
    let mut volume = 0.0;
    for i in 0..pts.len() {
        let z_next = pts.get(i + 1).map_or(reference[2], |p| p[2]);
        let depth = z_next - pts[i][2];
        if depth > 0.0 {
            volume += depth * hv2d(&pts[..=i], reference);
        }
    }
    volume
}

/// Exact for two and three objectives; Monte-Carlo (fixed internal seed,
/// 200k samples) beyond.
pub fn hypervolume(points: &[ObjectiveVector], reference: &[f64]) -> Result<Hypervolume> {
    let (front, clipped) = clip(points, reference)?;
    if front.is_empty() {
        return Ok(Hypervolume { value: 0.0, std_error: 0.0, clipped });
    }
    let value = match reference.len() {
        0 | 1 => return Err(Error::DimensionMismatch { expected: 2, found: reference.len() }),
        2 => hv2d(&front, reference),
        3 => hv3d(&front, reference),
        _ => {
            let mut hv = hypervolume_mc(&front, reference, 200_000, &mut seeded(0x5eed))?;
            hv.clipped = clipped;
            return Ok(hv);
        }
    };
    Ok(Hypervolume { value, std_error: 0.0, clipped })
}

/// Uniform sampling of the box spanned by the componentwise minimum of the
/// points and the reference.
pub fn hypervolume_mc<R: Rng + ?Sized>(
    points: &[ObjectiveVector],
    reference: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<Hypervolume> {
    let (front, clipped) = clip(points, reference)?;
    if front.is_empty() || samples == 0 {
        return Ok(Hypervolume { value: 0.0, std_error: 0.0, clipped });
    }
    let m = reference.len();
    let lower: Vec<f64> = (0..m)
        .map(|k| front.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min))
        .collect();
    let box_volume: f64 = lower.iter().zip(reference).map(|(l, r)| r - l).product();
    let mut hits = 0usize;
    let mut u = vec![0.0; m];
    for _ in 0..samples {
        for k in 0..m {
            u[k] = lower[k] + (reference[k] - lower[k]) * rng.random::<f64>();
        }
        if front.iter().any(|p| weakly(p, &u)) {
            hits += 1;
        }
    }
    let frac = hits as f64 / samples as f64;
    Ok(Hypervolume {
        value: box_volume * frac,
        std_error: box_volume * (frac * (1.0 - frac) / samples as f64).sqrt(),
        clipped,
    })
}

/// Fraction of fronts with at least one point weakly dominating `z`.
pub fn attainment_value(fronts: &[Front], z: &[f64]) -> Result<f64> {
    if fronts.is_empty() {
        return Err(Error::EmptyInput("no fronts"));
    }
    let mut attained = 0usize;
    for f in fronts {
        let mut hit = false;
        for p in &f.points {
            check_dim(z, p)?;
            hit |= weakly(p, z);
        }
        attained += usize::from(hit);
    }
    Ok(attained as f64 / fronts.len() as f64)
}

/// Smallest k with k/n >= level, clamped to 1..=n.
pub fn level_to_count(level: f64, n: usize) -> usize {
    ((level * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

/// Attainment surfaces of two-objective fronts.
///
/// For every candidate first coordinate (taken from the union of front
/// points), each front's best attained second coordinate is computed; the
/// k-th smallest of these is the level-k/n boundary there.
pub fn eaf_surfaces(fronts: &[Front], levels: &[f64]) -> Result<Vec<AttainmentSurface>> {
    if fronts.is_empty() {
        return Err(Error::EmptyInput("no fronts"));
    }
    for f in fronts {
        for p in &f.points {
            if p.len() != 2 {
                return Err(Error::DimensionMismatch { expected: 2, found: p.len() });
            }
        }
    }
    let n = fronts.len();
    let mut xs: Vec<f64> = fronts.iter().flat_map(|f| f.points.iter().map(|p| p[0])).collect();
    xs.sort_by(|a, b| a.total_cmp(b));
    xs.dedup();

    // attained[x][i]: best y reached by front i using points with p.x <= x
    let per_x: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| {
            let mut ys: Vec<f64> = fronts
                .iter()
                .map(|f| {
                    f.points
                        .iter()
                        .filter(|p| p[0] <= x)
                        .map(|p| p[1])
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            ys.sort_by(|a, b| a.total_cmp(b));
            ys
        })
        .collect();

    Ok(levels
        .iter()
        .map(|&level| {
            let k = level_to_count(level, n);
            let mut points = Vec::new();
            let mut last_y = f64::INFINITY;
            for (x, ys) in xs.iter().zip(&per_x) {
                let y = ys[k - 1];
                if y < last_y {
                    points.push([*x, y]);
                    last_y = y;
                }
            }
            AttainmentSurface {
                level: k as f64 / n as f64,
                points,
            }
        })
        .collect())
}

pub fn front_to_csv(points: &[ObjectiveVector]) -> String {
    let m = points.first().map_or(0, Vec::len);
    let header: Vec<String> = (0..m).map(|k| format!("obj{k}")).collect();
    let mut out = header.join(",") + "\n";
    for p in points {
        let row: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn surfaces_to_csv(surfaces: &[AttainmentSurface]) -> String {
    let mut out = String::from("level,obj0,obj1\n");
    for s in surfaces {
        for p in &s.points {
            out.push_str(&format!("{},{},{}\n", s.level, p[0], p[1]));
        }
    }
    out
}
