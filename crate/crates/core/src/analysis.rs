//! OLS covariate analysis, log-space power-law fits, recursive feature
//! elimination and stratified ECDFs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{MetricRecord, PowerLawModel};
use crate::special::student_t_two_sided_p;
use crate::space::ArchConfig;
use crate::surrogate::{fit_forest, ForestConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub coef: f64,
    pub std_err: f64,
    pub t_value: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsReport {
    /// Intercept first.
    pub coefficients: Vec<Coefficient>,
    pub r2: f64,
    pub adj_r2: f64,
    pub n: usize,
    pub dof: usize,
    pub standardized: bool,
}

/// Columns whose diagonal entry in R is below this fraction of the largest
/// one are treated as linearly dependent on the columns before them.
const RANK_TOL: f64 = 1e-10;

/// Least squares via Householder QR. `x` holds rows of the full design
/// matrix (intercept column included); `names` labels its columns.
pub fn ols(x: &[Vec<f64>], y: &[f64], names: &[String]) -> Result<OlsReport> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    let p = names.len();
    if let Some(r) = x.iter().find(|r| r.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: r.len(),
        });
    }
    if n <= p {
        return Err(Error::TooFewRecords { needed: p + 1, found: n });
    }
    let a = DMatrix::from_fn(n, p, |i, j| x[i][j]);
    let b = DVector::from_column_slice(y);
    let qr = a.clone().qr();
    let r = qr.r();
    let max_diag = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    let dependent: Vec<String> = (0..p)
        .filter(|&j| r[(j, j)].abs() <= RANK_TOL * max_diag.max(f64::MIN_POSITIVE))
        .map(|j| names[j].clone())
        .collect();
    if !dependent.is_empty() {
        return Err(Error::RankDeficient { columns: dependent });
    }
    let qty = qr.q().transpose() * &b;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient { columns: names.to_vec() })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::RankDeficient { columns: names.to_vec() })?;
    let resid = &b - &a * &beta;
    let ssr = resid.dot(&resid);
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let dof = n - p;
    let sigma2 = ssr / dof as f64;
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    let adj_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / dof as f64;
    let coefficients = (0..p)
        .map(|j| {
            let var = r_inv.row(j).iter().map(|v| v * v).sum::<f64>() * sigma2;
            let se = var.sqrt();
            let coef = beta[j];
            let t = if se > 0.0 {
                coef / se
            } else if coef == 0.0 {
                0.0
            } else {
                f64::INFINITY.copysign(coef)
            };
            Coefficient {
                name: names[j].clone(),
                coef,
                std_err: se,
                t_value: t,
                p_value: student_t_two_sided_p(t, dof as f64),
            }
        })
        .collect();
    Ok(OlsReport {
        coefficients,
        r2,
        adj_r2,
        n,
        dof,
        standardized: false,
    })
}

/// OLS on named covariate columns with an added intercept `const`. In
/// standardized mode every covariate is scaled to zero mean and unit
/// (population) variance first, so `const` estimates the mean of `y`.
pub fn ols_columns(names: &[&str], columns: &[Vec<f64>], y: &[f64], standardize: bool) -> Result<OlsReport> {
    let n = y.len();
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::LengthMismatch { left: c.len(), right: n });
    }
    let cols: Vec<Vec<f64>> = if standardize {
        columns
            .iter()
            .map(|c| {
                let m = c.iter().sum::<f64>() / n as f64;
                let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
                let sd = if sd > 0.0 { sd } else { 1.0 };
                c.iter().map(|v| (v - m) / sd).collect()
            })
            .collect()
    } else {
        columns.to_vec()
    };
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| std::iter::once(1.0).chain(cols.iter().map(|c| c[i])).collect())
        .collect();
    let mut all = vec!["const".to_string()];
    all.extend(names.iter().map(|s| s.to_string()));
    let mut rep = ols(&rows, y, &all)?;
    rep.standardized = standardize;
    Ok(rep)
}

impl OlsReport {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// Fixed-width text table in the style of a statistics package summary.
    pub fn to_table(&self, title: &str) -> String {
        let rule = "=".repeat(78);
        let thin = "-".repeat(78);
        let mut s = String::new();
        s.push_str(&format!("{:^78}\n", format!("OLS Regression Results {title}")));
        s.push_str(&rule);
        s.push('\n');
        s.push_str(&format!("{:<22}{:>16}{:>24}{:>16.3}\n", "No. Observations:", self.n, "R-squared:", self.r2));
        s.push_str(&format!("{:<22}{:>16}{:>24}{:>16.3}\n", "Df Residuals:", self.dof, "Adj. R-squared:", self.adj_r2));
        s.push_str(&format!(
            "{:<22}{:>16}\n",
            "Df Model:",
            self.coefficients.len().saturating_sub(1)
        ));
        s.push_str(&format!("{:<22}{:>16}\n", "Covariates:", if self.standardized { "standardized" } else { "raw" }));
        s.push_str(&rule);
        s.push('\n');
        s.push_str(&format!("{:<22}{:>14}{:>14}{:>14}{:>14}\n", "", "coef", "std err", "t", "P>|t|"));
        s.push_str(&thin);
        s.push('\n');
        // Values that do not fit the column switch to scientific notation.
        let cell = |v: f64, prec: usize| {
            let fixed = format!("{v:.prec$}");
            if fixed.len() > 12 || (v != 0.0 && v.abs() < 1e-3 && prec == 4) {
                format!("{v:>14.3e}")
            } else {
                format!("{fixed:>14}")
            }
        };
        for c in &self.coefficients {
            s.push_str(&format!(
                "{:<22}{}{}{}{}\n",
                c.name,
                cell(c.coef, 4),
                cell(c.std_err, 4),
                cell(c.t_value, 3),
                cell(c.p_value, 3)
            ));
        }
        s.push_str(&rule);
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub model: PowerLawModel,
    pub report: OlsReport,
}

pub const POWER_LAW_COVARIATES: [&str; 5] = ["num_layers", "embed_dim", "mean_heads", "mean_mlp_ratio", "bias"];

/// Regresses log y on log l, log e, log mean(h), log mean(m) and log(b + 1).
pub fn fit_power_law_data(archs: &[ArchConfig], y: &[f64]) -> Result<PowerLawFit> {
    if archs.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: archs.len(),
            right: y.len(),
        });
    }
    if let Some(index) = y.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NonPositiveTarget { index });
    }
    let columns: Vec<Vec<f64>> = vec![
        archs.iter().map(|a| (a.num_layers as f64).ln()).collect(),
        archs.iter().map(|a| (a.embed_dim as f64).ln()).collect(),
        archs.iter().map(|a| a.mean_heads().ln()).collect(),
        archs.iter().map(|a| a.mean_mlp_ratio().ln()).collect(),
        archs.iter().map(|a| (f64::from(u8::from(a.bias)) + 1.0).ln()).collect(),
    ];
    let log_y: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let report = ols_columns(&POWER_LAW_COVARIATES, &columns, &log_y, false)?;
    let c = |k: usize| report.coefficients[k].coef;
    Ok(PowerLawFit {
        model: PowerLawModel::new(c(0).exp(), c(1), c(2), c(3), c(4), c(5)),
        report,
    })
}

pub fn fit_power_law(records: &[MetricRecord]) -> Result<PowerLawFit> {
    let archs: Vec<ArchConfig> = records.iter().map(|r| r.arch.clone()).collect();
    let y: Vec<f64> = records.iter().map(|r| r.perplexity).collect();
    fit_power_law_data(&archs, &y)
}

/// The five aggregate covariates used for the summary tables, raw scale.
pub fn aggregate_covariates(archs: &[ArchConfig]) -> Vec<Vec<f64>> {
    vec![
        archs.iter().map(|a| a.num_layers as f64).collect(),
        archs.iter().map(|a| a.embed_dim as f64).collect(),
        archs.iter().map(|a| a.mean_heads()).collect(),
        archs.iter().map(|a| a.mean_mlp_ratio()).collect(),
        archs.iter().map(|a| f64::from(u8::from(a.bias))).collect(),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeRanking {
    /// `(feature, rank)` in input column order; rank 1 survives longest.
    pub ranks: Vec<(String, usize)>,
}

impl RfeRanking {
    pub fn rank_of(&self, name: &str) -> Option<usize> {
        self.ranks.iter().find(|r| r.0 == name).map(|r| r.1)
    }

    /// Features sorted by rank, then name.
    pub fn ordered(&self) -> Vec<(String, usize)> {
        let mut v = self.ranks.clone();
        v.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
        v
    }

    /// `feature,rank` rows in input column order.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("feature,rank\n");
        for (name, rank) in &self.ranks {
            s.push_str(&format!("{name},{rank}\n"));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("feature,rank") {
            return Err(Error::Parse("expected header `feature,rank`".into()));
        }
        let ranks = lines
            .map(|l| {
                let (name, rank) = l.rsplit_once(',').ok_or_else(|| Error::Parse(format!("malformed row `{l}`")))?;
                let rank = rank.trim().parse().map_err(|_| Error::Parse(format!("bad rank in `{l}`")))?;
                Ok((name.to_string(), rank))
            })
            .collect::<Result<_>>()?;
        Ok(Self { ranks })
    }
}

/// Recursive feature elimination with the bagged-tree ensemble: each round
/// refits on the surviving features and drops the `drop_per_round` with the
/// lowest impurity importance (ties drop the later column first) until one
/// feature remains.
pub fn rfe_rank(
    rows: &[Vec<f64>],
    y: &[f64],
    names: &[String],
    forest: &ForestConfig,
    drop_per_round: usize,
) -> Result<RfeRanking> {
    if names.len() < 2 {
        return Err(Error::Config("rfe needs at least two features".into()));
    }
    if drop_per_round == 0 {
        return Err(Error::Config("drop_per_round must be positive".into()));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != names.len()) {
        return Err(Error::DimensionMismatch {
            expected: names.len(),
            found: r.len(),
        });
    }
    let mut alive: Vec<usize> = (0..names.len()).collect();
    let mut eliminated: Vec<Vec<usize>> = Vec::new();
    while alive.len() > 1 {
        let sub: Vec<Vec<f64>> = rows.iter().map(|r| alive.iter().map(|&j| r[j]).collect()).collect();
        let ens = fit_forest(&sub, y, forest)?;
        let mut order: Vec<usize> = (0..alive.len()).collect();
        order.sort_by(|&a, &b| ens.importances[a].total_cmp(&ens.importances[b]).then(b.cmp(&a)));
        let k = drop_per_round.min(alive.len() - 1);
        let mut dropped: Vec<usize> = order[..k].iter().map(|&i| alive[i]).collect();
        dropped.sort_unstable();
        alive.retain(|j| !dropped.contains(j));
        eliminated.push(dropped);
    }
    let mut ranks = vec![1usize; names.len()];
    let rounds = eliminated.len();
    for (round, group) in eliminated.iter().enumerate() {
        for &j in group {
            ranks[j] = rounds - round + 1;
        }
    }
    Ok(RfeRanking {
        ranks: names.iter().cloned().zip(ranks).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfCurve {
    pub stratum: String,
    /// `(x, F(x))`, x ascending, F = rank / n.
    pub points: Vec<(f64, f64)>,
}

/// A named predicate selecting architectures for one ECDF curve.
pub struct Stratum<'a> {
    pub name: String,
    pub filter: Box<dyn Fn(&ArchConfig) -> bool + 'a>,
}

impl<'a> Stratum<'a> {
    pub fn new(name: impl Into<String>, filter: impl Fn(&ArchConfig) -> bool + 'a) -> Self {
        Self {
            name: name.into(),
            filter: Box::new(filter),
        }
    }
}

pub fn ecdf_values(name: &str, values: &[f64]) -> Result<EcdfCurve> {
    if values.is_empty() {
        return Err(Error::EmptyStratum(name.to_string()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    Ok(EcdfCurve {
        stratum: name.to_string(),
        points: v.into_iter().enumerate().map(|(i, x)| (x, (i + 1) as f64 / n)).collect(),
    })
}

/// One curve per stratum; with no strata, a single `all` curve.
pub fn ecdf(values: &[f64], archs: &[ArchConfig], strata: &[Stratum<'_>]) -> Result<Vec<EcdfCurve>> {
    if values.len() != archs.len() {
        return Err(Error::LengthMismatch {
            left: values.len(),
            right: archs.len(),
        });
    }
    if strata.is_empty() {
        return Ok(vec![ecdf_values("all", values)?]);
    }
    strata
        .iter()
        .map(|s| {
            let picked: Vec<f64> = values
                .iter()
                .zip(archs)
                .filter(|(_, a)| (s.filter)(a))
                .map(|(v, _)| *v)
                .collect();
            ecdf_values(&s.name, &picked)
        })
        .collect()
}

impl EcdfCurve {
    /// Smallest x with F(x) >= q.
    pub fn quantile(&self, q: f64) -> f64 {
        self.points
            .iter()
            .find(|p| p.1 >= q)
            .map_or(self.points.last().map_or(f64::NAN, |p| p.0), |p| p.0)
    }
}

pub fn ecdf_to_csv(curves: &[EcdfCurve]) -> String {
    let mut s = String::from("stratum,x,F\n");
    for c in curves {
        for (x, f) in &c.points {
            s.push_str(&format!("{},{x},{f}\n", c.stratum));
        }
    }
    s
}

/// Inverse of [`ecdf_to_csv`].
pub fn ecdf_from_csv(text: &str) -> Result<Vec<EcdfCurve>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("stratum,x,F") {
        return Err(Error::Parse("expected header `stratum,x,F`".into()));
    }
    let mut curves: Vec<EcdfCurve> = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Error::Parse(format!("line {}: `{line}`", i + 2));
        let mut cells = line.rsplitn(3, ',');
        let f: f64 = cells.next().and_then(|c| c.parse().ok()).ok_or_else(bad)?;
        let x: f64 = cells.next().and_then(|c| c.parse().ok()).ok_or_else(bad)?;
        let name = cells.next().ok_or_else(bad)?;
        match curves.last_mut() {
            Some(c) if c.stratum == name => c.points.push((x, f)),
            _ => curves.push(EcdfCurve {
                stratum: name.to_string(),
                points: vec![(x, f)],
            }),
        }
    }
    Ok(curves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_quantile;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn exact_linear_data() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64, ((i * i) % 7) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 - 2.0 * r[1] + 0.5 * r[2]).collect();
        let rep = ols(&rows, &y, &names(&["const", "a", "b"])).unwrap();
        for (c, t) in rep.coefficients.iter().zip([3.0, -2.0, 0.5]) {
            assert!((c.coef - t).abs() < 1e-10);
        }
        assert!((rep.r2 - 1.0).abs() < 1e-12);
        assert_eq!(rep.dof, 7);
    }

    #[test]
    fn four_point_hand_least_squares() {
        // y = 2x + 1 with noise +e, -e, -e, +e at x = 0..3.
        let e = 0.1;
        let xs = [0.0, 1.0, 2.0, 3.0];
        let noise = [e, -e, -e, e];
        let y: Vec<f64> = xs.iter().zip(noise).map(|(x, n)| 2.0 * x + 1.0 + n).collect();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x]).collect();
        let rep = ols(&rows, &y, &names(&["const", "x"])).unwrap();
        // Normal equations: slope = Sxy / Sxx, intercept = ybar - slope * xbar.
        let xbar = 1.5;
        let ybar = y.iter().sum::<f64>() / 4.0;
        let sxy: f64 = xs.iter().zip(&y).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
        let slope = sxy / 5.0;
        assert!((rep.coefficients[1].coef - slope).abs() < 1e-12);
        assert!((rep.coefficients[0].coef - (ybar - slope * xbar)).abs() < 1e-12);
        assert!((slope - 2.0).abs() < 1e-12);
        assert!((rep.coefficients[0].coef - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_names_columns() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..6).map(|i| i as f64).collect();
        match ols(&rows, &y, &names(&["const", "a", "twice_a"])) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["twice_a".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![1.0, (i as f64).sin(), (i as f64 * 0.3).cos() * 5.0])
            .collect();
        let y: Vec<f64> = (0..30).map(|i| normal_quantile((i as f64 + 0.5) / 30.0) + i as f64 * 0.1).collect();
        let rep = ols(&rows, &y, &names(&["const", "s", "c"])).unwrap();
        let fitted: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().zip(&rep.coefficients).map(|(x, c)| x * c.coef).sum())
            .collect();
        for j in 0..3 {
            let dot: f64 = rows.iter().zip(&y).zip(&fitted).map(|((r, y), f)| r[j] * (y - f)).sum();
            assert!(dot.abs() < 1e-8, "column {j}: {dot}");
        }
        assert!(rep.coefficients.iter().all(|c| (0.0..=1.0).contains(&c.p_value)));
        assert!(rep.r2 <= 1.0);
    }

    #[test]
    fn standardized_intercept_is_mean() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 3.0 + 7.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + ((v * 1.7).sin())).collect();
        let rep = ols_columns(&["x"], &[x], &y, true).unwrap();
        let mean = y.iter().sum::<f64>() / 20.0;
        assert!((rep.coefficients[0].coef - mean).abs() < 1e-10);
        assert!(rep.to_table("toy").contains("P>|t|"));
    }

    #[test]
    fn power_law_needs_positive_targets() {
        let a = ArchConfig {
            embed_dim: 768,
            num_layers: 10,
            heads: vec![8; 10],
            mlp_ratios: vec![2; 10],
            bias: true,
        };
        assert!(matches!(
            fit_power_law_data(&[a.clone(), a], &[1.0, 0.0]),
            Err(Error::NonPositiveTarget { index: 1 })
        ));
    }

    #[test]
    fn rfe_two_features_and_signal_feature() {
        let rows: Vec<Vec<f64>> = (0..120)
            .map(|i| {
                let x0 = (i % 2) as f64;
                vec![x0, ((i * 7) % 11) as f64, ((i * 5) % 13) as f64, ((i * 3) % 17) as f64]
            })
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * 10.0).collect();
        let cfg = ForestConfig { n_trees: 10, ..ForestConfig::default() };
        let r = rfe_rank(&rows, &y, &names(&["signal", "j1", "j2", "j3"]), &cfg, 1).unwrap();
        assert_eq!(r.rank_of("signal"), Some(1));
        let mut ranks: Vec<usize> = r.ranks.iter().map(|x| x.1).collect();
        ranks.sort_unstable();
        assert_eq!(ranks, vec![1, 2, 3, 4]);
        let two: Vec<Vec<f64>> = rows.iter().map(|r| r[..2].to_vec()).collect();
        let r2 = rfe_rank(&two, &y, &names(&["signal", "j1"]), &cfg, 3).unwrap();
        assert_eq!(r2.ranks, vec![("signal".to_string(), 1), ("j1".to_string(), 2)]);
    }

    #[test]
    fn ecdf_basics() {
        let c = ecdf_values("one", &[4.2]).unwrap();
        assert_eq!(c.points, vec![(4.2, 1.0)]);
        let vals: Vec<f64> = (1..=5).rev().map(|v| v as f64).collect();
        let c = ecdf_values("n", &vals).unwrap();
        for (k, p) in c.points.iter().enumerate() {
            assert_eq!(*p, ((k + 1) as f64, (k + 1) as f64 / 5.0));
        }
        let a = ArchConfig {
            embed_dim: 768,
            num_layers: 10,
            heads: vec![8; 10],
            mlp_ratios: vec![2; 10],
            bias: true,
        };
        let strata = [Stratum::new("deep", |a: &ArchConfig| a.num_layers > 10)];
        assert!(matches!(ecdf(&[1.0], &[a], &strata), Err(Error::EmptyStratum(s)) if s == "deep"));
    }
}
