mod common;

use hwnas_core::bench::{dataset_columns, generate_dataset, oracle_for};
use hwnas_core::metrics::{
    calibration_report, correlation_matrix, CalibrationReport, kendall_tau, regression_report, spearman_rho, CorrelationMethod,
};
use hwnas_core::rng::seeded;
use proptest::prelude::*;
use rand_distr::{Distribution, Normal, StandardNormal};

use common::pair_count_tau;

#[test]
fn kendall_matches_pair_counting_on_random_integer_vectors() {
    let mut rng = seeded(77);
    for trial in 0..100 {
        let n = 2 + (trial * 5) % 499;
        let y: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, 0..20) as f64).collect();
        let z: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, 0..20) as f64).collect();
        assert_eq!(kendall_tau(&y, &z).unwrap(), pair_count_tau(&y, &z), "n = {n}");
    }
}

#[test]
fn spearman_tie_example() {
    let rho = spearman_rho(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
    assert!((rho - 3f64.sqrt() / 2.0).abs() < 1e-12);
    assert!((kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 4.0 / 6.0).abs() < 1e-15);
}

/// Truth drawn from the predicted Gaussians; `scale` multiplies the std handed to the report.
fn gaussian_calibration(n: usize, scale: f64, seed: u64) -> CalibrationReport {
    let mut rng = seeded(seed);
    let mean: Vec<f64> = (0..n).map(|i| (i % 17) as f64).collect();
    let std: Vec<f64> = (0..n).map(|i| 0.5 + (i % 5) as f64 * 0.25).collect();
    let truth: Vec<f64> = mean
        .iter()
        .zip(&std)
        .map(|(&m, &s)| Normal::new(m, s).unwrap().sample(&mut rng))
        .collect();
    let scaled: Vec<f64> = std.iter().map(|s| s * scale).collect();
    calibration_report(&mean, &scaled, &truth, 99).unwrap()
}

/// Population miscalibration areas for a predictor whose std is `scale`
/// times the truth: quantile coverage is Phi(scale * z(q)), central-interval
/// coverage 2 Phi(scale * z((1 + p) / 2)) - 1. Trapezoid rule on the same grid.
fn population_areas(scale: f64) -> (f64, f64) {
    let phi = |x: f64| 0.5 * statrs::function::erf::erfc(-x / 2f64.sqrt());
    let z = |p: f64| statrs::distribution::ContinuousCDF::inverse_cdf(&statrs::distribution::Normal::standard(), p);
    let levels: Vec<f64> = (1..=99).map(|k| k as f64 / 100.0).collect();
    let area = |f: &dyn Fn(f64) -> f64| {
        let mut xs = vec![0.0];
        let mut g = vec![0.0];
        for &q in &levels {
            xs.push(q);
            g.push((f(q) - q).abs());
        }
        xs.push(1.0);
        g.push(0.0);
        (0..xs.len() - 1).map(|i| 0.5 * (xs[i + 1] - xs[i]) * (g[i] + g[i + 1])).sum::<f64>()
    };
    (
        area(&|q| phi(scale * z(q))),
        area(&|p| 2.0 * phi(scale * z((1.0 + p) / 2.0)) - 1.0),
    )
}

#[test]
fn calibration_matches_the_population_areas() {
    let good = gaussian_calibration(100_000, 1.0, 1);
    assert!(good.miscal_area < 0.01 && good.interval_miscal_area < 0.01);
    let sharp = gaussian_calibration(100_000, 0.5, 1);
    let (quantile, interval) = population_areas(0.5);
    assert!((sharp.miscal_area - quantile).abs() < 0.005, "{} vs {quantile}", sharp.miscal_area);
    assert!((sharp.interval_miscal_area - interval).abs() < 0.005);
    assert!((quantile - 0.1017).abs() < 1e-3);
    assert!(sharp.interval_miscal_area > 0.15);
}

#[test]
fn overconfidence_undercovers_the_upper_quantiles() {
    let mut rng = seeded(3);
    let truth: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let r = calibration_report(&vec![0.0; 5000], &vec![0.4; 5000], &truth, 19).unwrap();
    for (q, o) in r.quantile_levels.iter().zip(&r.observed_freqs) {
        if *q > 0.6 {
            assert!(o < q, "q = {q}, observed = {o}");
        } else if *q < 0.4 {
            assert!(o > q);
        }
    }
}

#[test]
fn latency_tracks_flops_more_than_perplexity() {
    let oracle = oracle_for("gpt-s").unwrap();
    let d = generate_dataset(&oracle, 500, 10, 2, &["rtx2080".to_string()], 4).unwrap();
    let columns = dataset_columns(&d).unwrap();
    let m = correlation_matrix(&columns, CorrelationMethod::Kendall).unwrap();
    let with_flops = m.get("latency/rtx2080", "flops").unwrap();
    let with_ppl = m.get("latency/rtx2080", "perplexity").unwrap();
    assert!(with_ppl < 0.0, "latency and perplexity should be anti-correlated: {with_ppl}");
    assert!(with_flops > with_ppl.abs(), "{with_flops} vs {with_ppl}");
}

fn strictly_increasing(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.powi(3) + 2.0 * x).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn rmse_bounds_mae(pairs in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..100)) {
        let pred: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let truth: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let r = regression_report(&pred, &truth).unwrap();
        prop_assert!(r.mae >= 0.0);
        prop_assert!(r.rmse >= r.mae * (1.0 - 1e-12));
        if let Some(r2) = r.r2 {
            prop_assert!(r2 <= 1.0);
        }
        if let Some(p) = r.pearson {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&p));
        }
    }

    #[test]
    fn rank_statistics_ignore_monotone_transforms(
        pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 2..80),
    ) {
        let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let z: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let (ty, tz) = (strictly_increasing(&y), strictly_increasing(&z));
        prop_assert_eq!(kendall_tau(&y, &z).unwrap(), kendall_tau(&ty, &tz).unwrap());
        if let (Ok(a), Ok(b)) = (spearman_rho(&y, &z), spearman_rho(&ty, &z)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert_eq!(kendall_tau(&y, &z).unwrap(), pair_count_tau(&y, &z));
    }

    #[test]
    fn observed_frequencies_are_probabilities(
        data in proptest::collection::vec((-5.0f64..5.0, 0.01f64..3.0, -5.0f64..5.0), 1..200),
        k in 2usize..50,
    ) {
        let m: Vec<f64> = data.iter().map(|d| d.0).collect();
        let s: Vec<f64> = data.iter().map(|d| d.1).collect();
        let y: Vec<f64> = data.iter().map(|d| d.2).collect();
        let r = calibration_report(&m, &s, &y, k).unwrap();
        prop_assert_eq!(r.quantile_levels.len(), k);
        prop_assert!(r.observed_freqs.iter().all(|o| (0.0..=1.0).contains(o)));
        prop_assert!(r.observed_freqs.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(r.rms_cal >= r.ma_cal - 1e-12 && r.ma_cal >= 0.0 && r.miscal_area >= 0.0);
    }
}
