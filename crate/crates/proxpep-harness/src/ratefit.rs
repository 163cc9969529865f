//! Log-log rate fitting and multi-seed quantile reports.

use proxpep::error::{Error, Result};

/// Least-squares fit of `log(value)` against `log(T)`.
#[derive(Debug, Clone)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// The fitted (log T, log value) points.
    pub points: Vec<(f64, f64)>,
}

/// Fits the decay exponent of a positive series over horizons.
pub fn rate_fit(series: &[(f64, f64)]) -> Result<RateFit> {
    if series.len() < 3 {
        return Err(Error::invalid_argument(format!(
            "rate fit needs at least 3 points, got {}",
            series.len()
        )));
    }
    for &(t, v) in series {
        if !(t > 0.0 && v > 0.0) {
            return Err(Error::invalid_argument(format!(
                "rate fit needs positive horizons and values, got ({t}, {v})"
            )));
        }
    }
    let points: Vec<(f64, f64)> = series.iter().map(|&(t, v)| (t.ln(), v.ln())).collect();
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(x, y) in &points {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::invalid_argument("rate fit needs at least two distinct horizons"));
    }
    let exponent = sxy / sxx;
    let intercept = mean_y - exponent * mean_x;
    let r_squared = if syy <= 1e-300 {
        // Constant series: slope 0 explains everything.
        1.0
    } else {
        let mut ss_res = 0.0;
        for &(x, y) in &points {
            let e = y - (intercept + exponent * x);
            ss_res += e * e;
        }
        1.0 - ss_res / syy
    };
    Ok(RateFit {
        exponent,
        intercept,
        r_squared,
        points,
    })
}

/// Nearest-rank empirical quantile of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = (level * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

#[derive(Debug, Clone)]
pub struct QuantileReport {
    pub metric: String,
    pub seeds: usize,
    pub levels: Vec<f64>,
    pub quantiles: Vec<f64>,
    pub median: f64,
    pub q90: f64,
    /// q90 <= 3 * median.
    pub within_median_multiple: bool,
    /// Formula threshold the q90 is compared against, when available.
    pub threshold: Option<f64>,
    pub within_threshold: Option<bool>,
}

/// Empirical quantiles of a per-seed metric, compared against a median
/// multiple and an optional formula threshold.
pub fn quantile_report(
    metric: &str,
    values: &[f64],
    levels: &[f64],
    threshold: Option<f64>,
) -> Result<QuantileReport> {
    if values.len() < 20 {
        return Err(Error::invalid_argument(format!(
            "quantile report needs at least 20 seeds, got {}",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("metric values must be comparable"));
    let quantiles: Vec<f64> = levels.iter().map(|&l| quantile_sorted(&sorted, l)).collect();
    let median = quantile_sorted(&sorted, 0.5);
    let q90 = quantile_sorted(&sorted, 0.9);
    Ok(QuantileReport {
        metric: metric.to_string(),
        seeds: values.len(),
        levels: levels.to_vec(),
        quantiles,
        median,
        q90,
        within_median_multiple: q90 <= 3.0 * median,
        threshold,
        within_threshold: threshold.map(|th| q90 <= th),
    })
}
