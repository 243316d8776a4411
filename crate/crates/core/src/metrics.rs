//! Accuracy, calibration and rank-correlation metrics for surrogate evaluation.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::normal_quantile;

pub const DEFAULT_QUANTILES: usize = 99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub mae: f64,
    pub rmse: f64,
    pub mdae: f64,
    pub marpd: f64,
    /// `None` when the truth is constant.
    pub r2: Option<f64>,
    /// `None` when either side is constant.
    pub pearson: Option<f64>,
    /// Pairs skipped by MARPD because both values were zero.
    pub marpd_skipped: usize,
    /// Reasons for every `None` above.
    pub undefined: Vec<String>,
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Pearson correlation; `None` if either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    check_lengths(x, y)?;
    if x.len() < 2 {
        return Err(Error::EmptyInput("pearson needs at least two points"));
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

pub fn regression_report(pred: &[f64], truth: &[f64]) -> Result<RegressionReport> {
    check_lengths(pred, truth)?;
    if pred.is_empty() {
        return Err(Error::EmptyInput("regression_report"));
    }
    let n = pred.len() as f64;
    let abs: Vec<f64> = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).collect();
    let mae = abs.iter().sum::<f64>() / n;
    let rmse = (abs.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let mdae = median(&abs);

    let mut marpd_sum = 0.0;
    let mut marpd_skipped = 0;
    for (p, t) in pred.iter().zip(truth) {
        let scale = p.abs() + t.abs();
        if scale == 0.0 {
            marpd_skipped += 1;
        } else {
            marpd_sum += (2.0 * (p - t) / scale).abs();
        }
    }
    let used = pred.len() - marpd_skipped;
    let marpd = if used > 0 { 100.0 * marpd_sum / used as f64 } else { 0.0 };

    let mut undefined = Vec::new();
    let t_mean = mean(truth);
    let sst: f64 = truth.iter().map(|t| (t - t_mean).powi(2)).sum();
    let ssr: f64 = abs.iter().map(|e| e * e).sum();
    let r2 = if sst > 0.0 {
        Some(1.0 - ssr / sst)
    } else {
        undefined.push("r2: truth is constant".to_string());
        None
    };
    let pearson = if pred.len() >= 2 { pearson(pred, truth)? } else { None };
    if pearson.is_none() {
        undefined.push("pearson: fewer than two points or constant input".to_string());
    }
    Ok(RegressionReport {
        mae,
        rmse,
        mdae,
        marpd,
        r2,
        pearson,
        marpd_skipped,
        undefined,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub quantile_levels: Vec<f64>,
    pub observed_freqs: Vec<f64>,
    pub rms_cal: f64,
    pub ma_cal: f64,
    pub miscal_area: f64,
    /// Miscalibration area of central prediction intervals: expected coverage
    /// p = q_k against the observed fraction inside mu +- z((1 + p) / 2) * s.
    pub interval_miscal_area: f64,
}

/// Gaussian-quantile calibration at levels k/(K+1), k = 1..K.
///
/// The miscalibration area integrates |observed - expected| with the
/// trapezoid rule over the curve closed by (0, 0) and (1, 1); the interval
/// variant does the same for central-interval coverage.
pub fn calibration_report(
    pred_mean: &[f64],
    pred_std: &[f64],
    truth: &[f64],
    quantiles: usize,
) -> Result<CalibrationReport> {
    check_lengths(pred_mean, truth)?;
    check_lengths(pred_std, truth)?;
    if truth.is_empty() {
        return Err(Error::EmptyInput("calibration_report"));
    }
    if quantiles < 2 {
        return Err(Error::Config("calibration needs at least 2 quantile levels".into()));
    }
    if let Some(index) = pred_std.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::NonPositiveStd { index });
    }
    // standardized residuals: y <= mu + z*s  <=>  (y - mu)/s <= z
    let mut scores: Vec<f64> = truth
        .iter()
        .zip(pred_mean.iter().zip(pred_std))
        .map(|(y, (m, s))| (y - m) / s)
        .collect();
    scores.sort_by(|a, b| a.total_cmp(b));
    let n = scores.len() as f64;

    let levels: Vec<f64> = (1..=quantiles).map(|k| k as f64 / (quantiles + 1) as f64).collect();
    let observed: Vec<f64> = levels
        .iter()
        .map(|&q| {
            let z = normal_quantile(q);
            scores.partition_point(|&s| s <= z) as f64 / n
        })
        .collect();

    let k = quantiles as f64;
    let rms_cal = (levels.iter().zip(&observed).map(|(q, o)| (o - q).powi(2)).sum::<f64>() / k).sqrt();
    let ma_cal = levels.iter().zip(&observed).map(|(q, o)| (o - q).abs()).sum::<f64>() / k;

    let miscal_area = trapezoid_gap(&levels, &observed);

    let mut abs_scores: Vec<f64> = scores.iter().map(|s| s.abs()).collect();
    abs_scores.sort_by(|a, b| a.total_cmp(b));
    let covered: Vec<f64> = levels
        .iter()
        .map(|&p| {
            let z = normal_quantile((1.0 + p) / 2.0);
            abs_scores.partition_point(|&s| s <= z) as f64 / n
        })
        .collect();
    let interval_miscal_area = trapezoid_gap(&levels, &covered);

    Ok(CalibrationReport {
        quantile_levels: levels,
        observed_freqs: observed,
        rms_cal,
        ma_cal,
        miscal_area,
        interval_miscal_area,
    })
}

/// Trapezoid area of |observed - expected| over levels closed by 0 and 1.
fn trapezoid_gap(levels: &[f64], observed: &[f64]) -> f64 {
    let mut xs = vec![0.0];
    let mut gaps = vec![0.0];
    for (q, o) in levels.iter().zip(observed) {
        xs.push(*q);
        gaps.push((o - q).abs());
    }
    xs.push(1.0);
    gaps.push(0.0);
    xs.windows(2)
        .zip(gaps.windows(2))
        .map(|(x, g)| 0.5 * (x[1] - x[0]) * (g[0] + g[1]))
        .sum()
}

/// Kendall's tau-a: (concordant - discordant) / (n(n-1)/2). Tied pairs count
/// as neither.
pub fn kendall_tau(y: &[f64], z: &[f64]) -> Result<f64> {
    check_lengths(y, z)?;
    let n = y.len();
    if n < 2 {
        return Err(Error::EmptyInput("kendall_tau needs at least two points"));
    }
    // Sort by y (then z); count discordant pairs as inversions in z with a
    // merge sort, correcting for ties in y, z and both.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(z[a].total_cmp(&z[b])));

    let pairs = (n * (n - 1) / 2) as i64;
    let tie_groups = |vals: &mut dyn Iterator<Item = (f64, f64)>, by_both: bool| -> i64 {
        let v: Vec<(f64, f64)> = vals.collect();
        let mut total = 0i64;
        let mut run = 1i64;
        for w in v.windows(2) {
            let same = if by_both { w[0] == w[1] } else { w[0].0 == w[1].0 };
            if same {
                run += 1;
            } else {
                total += run * (run - 1) / 2;
                run = 1;
            }
        }
        total + run * (run - 1) / 2
    };
    let ties_y = tie_groups(&mut idx.iter().map(|&i| (y[i], 0.0)), false);
    let ties_yz = tie_groups(&mut idx.iter().map(|&i| (y[i], z[i])), true);

    let mut zs: Vec<f64> = idx.iter().map(|&i| z[i]).collect();
    let mut buf = zs.clone();
    let discordant = merge_count(&mut zs, &mut buf) as i64;
    // zs is now sorted
    let ties_z = tie_groups(&mut zs.iter().map(|&v| (v, 0.0)), false);

    // pairs untied in both = pairs - ties_y - ties_z + ties_yz
    let concordant = pairs - ties_y - ties_z + ties_yz - discordant;
    Ok((concordant - discordant) as f64 / pairs as f64)
}

/// Counts strict inversions while sorting `v` ascending.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            count += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    while i < mid {
        buf[k] = v[i];
        i += 1;
        k += 1;
    }
    while j < n {
        buf[k] = v[j];
        j += 1;
        k += 1;
    }
    v.copy_from_slice(&buf[..n]);
    count
}

/// 1-based ranks; ties receive the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

pub fn spearman_rho(y: &[f64], z: &[f64]) -> Result<f64> {
    check_lengths(y, z)?;
    if y.len() < 2 {
        return Err(Error::EmptyInput("spearman_rho needs at least two points"));
    }
    pearson(&average_ranks(y), &average_ranks(z))?
        .ok_or_else(|| Error::Config("spearman_rho undefined: constant input".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    Kendall,
    Spearman,
    Pearson,
}

impl CorrelationMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "kendall" => Ok(Self::Kendall),
            "spearman" => Ok(Self::Spearman),
            "pearson" => Ok(Self::Pearson),
            _ => Err(Error::Config(format!("unknown correlation method `{s}`"))),
        }
    }
}

/// A metric column: one value per architecture, or several observations per
/// architecture (reduced by their median).
#[derive(Debug, Clone, PartialEq)]
pub enum MetricColumn {
    Scalar(Vec<f64>),
    Multi(Vec<Vec<f64>>),
}

impl MetricColumn {
    fn reduce(&self) -> Vec<f64> {
        match self {
            MetricColumn::Scalar(v) => v.clone(),
            MetricColumn::Multi(rows) => rows.iter().map(|r| median(r)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.values[i][j])
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("metric,{}\n", self.names.join(","));
        for (name, row) in self.names.iter().zip(&self.values) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&format!("{name},{}\n", cells.join(",")));
        }
        out
    }

    /// Inverse of [`CorrelationMatrix::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(Error::EmptyInput("empty csv"))?;
        let names: Vec<String> = match header.split(',').collect::<Vec<_>>().split_first() {
            Some((&"metric", rest)) => rest.iter().map(|s| s.to_string()).collect(),
            _ => return Err(Error::Parse("expected a `metric,...` header".into())),
        };
        let mut values = Vec::with_capacity(names.len());
        for (i, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != names.len() + 1 || names.get(i).map(String::as_str) != Some(cells[0]) {
                return Err(Error::Parse(format!("malformed row `{line}`")));
            }
            let row = cells[1..]
                .iter()
                .map(|c| c.parse::<f64>().map_err(|e| Error::Parse(format!("`{c}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            values.push(row);
        }
        if values.len() != names.len() {
            return Err(Error::Parse("correlation matrix is not square".into()));
        }
        Ok(Self { names, values })
    }
}

pub fn correlation_matrix(
    columns: &[(String, MetricColumn)],
    method: CorrelationMethod,
) -> Result<CorrelationMatrix> {
    let reduced: Vec<Vec<f64>> = columns.iter().map(|(_, c)| c.reduce()).collect();
    if let Some(first) = reduced.first() {
        for col in &reduced[1..] {
            check_lengths(first, col)?;
        }
    }
    let k = reduced.len();
    let mut values = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let c = match method {
                CorrelationMethod::Kendall => kendall_tau(&reduced[i], &reduced[j])?,
                CorrelationMethod::Spearman => spearman_rho(&reduced[i], &reduced[j]).unwrap_or(f64::NAN),
                CorrelationMethod::Pearson => pearson(&reduced[i], &reduced[j])?.unwrap_or(f64::NAN),
            };
            values[i][j] = c;
            values[j][i] = c;
        }
    }
    Ok(CorrelationMatrix {
        names: columns.iter().map(|(n, _)| n.clone()).collect(),
        values,
    })
}

/// O(n^2) pair counter; the reference for [`kendall_tau`].
pub fn kendall_tau_naive(y: &[f64], z: &[f64]) -> f64 {
    let n = y.len();
    let mut score = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let a = y[i].partial_cmp(&y[j]).unwrap_or(Ordering::Equal);
            let b = z[i].partial_cmp(&z[j]).unwrap_or(Ordering::Equal);
            match (a, b) {
                (Ordering::Equal, _) | (_, Ordering::Equal) => {}
                (x, w) if x == w => score += 1,
                _ => score -= 1,
            }
        }
    }
    score as f64 / (n * (n - 1) / 2) as f64
}
