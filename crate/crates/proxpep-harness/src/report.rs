//! Report generation: per-metric rate fits over the horizon grid, multi-seed
//! quantile tables, dual-boundedness counts, and plot-ready (T, value)
//! tables, all read back from the stored run summaries.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use proxpep::driver::schedule_params;
use proxpep::error::{Error, Result};
use proxpep::io::{read_key_values, write_atomic};
use proxpep::metrics::thresholds;
use proxpep::model::derived_constants;

use crate::experiment::{ExperimentConfig, Manifest, RunId};
use crate::generate::generate_from_config;
use crate::ratefit::{quantile_report, rate_fit, QuantileReport, RateFit};

/// Metrics whose decay rates the report fits, with their summary keys.
pub const RATE_METRICS: [(&str, &str); 4] = [
    ("moreau_grad_sq", "avg_moreau_grad_sq"),
    ("g_violation", "avg_sum_g_pos"),
    ("h_abs", "avg_sum_h_abs"),
    ("complementarity", "avg_comp_pos"),
];

/// Rate-fit acceptance window: exponent at most -0.15 with r^2 at least 0.8.
pub const MAX_EXPONENT: f64 = -0.15;
pub const MIN_R_SQUARED: f64 = 0.8;

#[derive(Debug, Clone)]
pub struct MetricRate {
    pub metric: String,
    pub fit: RateFit,
    pub series: Vec<(f64, f64)>,
    pub pass: bool,
}

#[derive(Debug)]
pub struct Report {
    pub rates: Vec<MetricRate>,
    pub quantiles: Option<QuantileReport>,
    pub dual_bound_psi: f64,
    pub dual_bound_passes: usize,
    pub dual_bound_total: usize,
    pub hard_violations_total: usize,
    pub report_dir: PathBuf,
}

/// Reads every ok-run summary of a sweep, keyed by run id.
pub fn collect_summaries(
    out_dir: &Path,
) -> Result<BTreeMap<RunId, BTreeMap<String, String>>> {
    let manifest = Manifest::load(&out_dir.join("manifest.txt"))?;
    let mut summaries = BTreeMap::new();
    for entry in manifest.entries.iter().filter(|e| e.status == "ok") {
        let path = out_dir
            .join("runs")
            .join(entry.id.dir_name())
            .join("summary.txt");
        summaries.insert(entry.id, read_key_values(&path)?);
    }
    Ok(summaries)
}

fn get_f64(map: &BTreeMap<String, String>, key: &str) -> Option<f64> {
    map.get(key).and_then(|v| v.parse().ok())
}

/// Mean of a summary metric across seeds for each horizon.
pub fn metric_by_horizon(
    summaries: &BTreeMap<RunId, BTreeMap<String, String>>,
    key: &str,
) -> Vec<(f64, f64)> {
    let mut grouped: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for (id, map) in summaries {
        if let Some(v) = get_f64(map, key) {
            if v.is_finite() {
                let e = grouped.entry(id.t).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
        }
    }
    grouped
        .into_iter()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(t, (sum, n))| (t as f64, sum / n as f64))
        .collect()
}

/// Builds the full report for a sweep directory and writes it under
/// `<out_dir>/report/`.
pub fn build_report(cfg: &ExperimentConfig) -> Result<Report> {
    let out_dir = PathBuf::from(&cfg.output_dir);
    let summaries = collect_summaries(&out_dir)?;
    if summaries.is_empty() {
        return Err(Error::InvalidState("no completed runs to report on".into()));
    }
    let program = generate_from_config(&cfg.problem)?;

    let mut rates = Vec::new();
    let mut tables = String::new();
    for (metric, key) in RATE_METRICS {
        let series = metric_by_horizon(&summaries, key);
        tables.push_str(&format!("# {metric}\n# T value\n"));
        for (t, v) in &series {
            tables.push_str(&format!("{t} {v}\n"));
        }
        tables.push('\n');
        if series.len() >= 3 && series.iter().all(|&(_, v)| v > 0.0) {
            let fit = rate_fit(&series)?;
            let pass = fit.exponent <= MAX_EXPONENT && fit.r_squared >= MIN_R_SQUARED;
            rates.push(MetricRate {
                metric: metric.to_string(),
                fit,
                series,
                pass,
            });
        }
    }

    // Dual boundedness per seed at the largest horizon: mean |y| <= psi.
    let t_max = summaries.keys().map(|id| id.t).max().expect("nonempty");
    let params = schedule_params(
        t_max,
        &cfg.coeffs.to_schedule(),
        &program,
        program.constants.d0,
    )?;
    let consts = derived_constants(
        &program,
        params.sigma_g,
        params.sigma_h,
        program.constants.d0,
    )?;
    let threshold_report = thresholds(&params, &consts, &program, None);
    let mut dual_bound_passes = 0usize;
    let mut dual_bound_total = 0usize;
    let mut hard_violations_total = 0usize;
    let mut h_abs_values = Vec::new();
    for (id, map) in &summaries {
        if let Some(v) = get_f64(map, "check_hard_violations") {
            hard_violations_total += v as usize;
        }
        if id.t == t_max {
            if let Some(mean_y) = get_f64(map, "mean_y_norm") {
                dual_bound_total += 1;
                if mean_y <= threshold_report.psi {
                    dual_bound_passes += 1;
                }
            }
            if let Some(h) = get_f64(map, "avg_sum_h_abs") {
                h_abs_values.push(h);
            }
        }
    }

    let quantiles = if h_abs_values.len() >= 20 {
        Some(quantile_report(
            "avg_sum_h_abs",
            &h_abs_values,
            &[0.1, 0.25, 0.5, 0.75, 0.9, 0.95],
            Some(threshold_report.pi_ch_avg),
        )?)
    } else {
        None
    };

    let report_dir = out_dir.join("report");
    fs::create_dir_all(&report_dir)?;

    let mut text = String::new();
    text.push_str("# rate fits (metric exponent r_squared pass)\n");
    for r in &rates {
        text.push_str(&format!(
            "rate {} exponent={} r_squared={} pass={}\n",
            r.metric, r.fit.exponent, r.fit.r_squared, r.pass
        ));
    }
    text.push_str(&format!(
        "dual_bound psi={} passes={} total={}\n",
        threshold_report.psi, dual_bound_passes, dual_bound_total
    ));
    text.push_str(&format!("hard_violations_total={hard_violations_total}\n"));
    if let Some(q) = &quantiles {
        text.push_str(&format!(
            "quantiles metric={} seeds={} median={} q90={} within_3x_median={} threshold={} within_threshold={}\n",
            q.metric,
            q.seeds,
            q.median,
            q.q90,
            q.within_median_multiple,
            q.threshold.unwrap_or(f64::NAN),
            q.within_threshold.unwrap_or(false)
        ));
        for (level, value) in q.levels.iter().zip(&q.quantiles) {
            text.push_str(&format!("quantile level={level} value={value}\n"));
        }
    }
    write_atomic(&report_dir.join("report.txt"), &text)?;
    write_atomic(&report_dir.join("rate_tables.txt"), &tables)?;

    Ok(Report {
        rates,
        quantiles,
        dual_bound_psi: threshold_report.psi,
        dual_bound_passes,
        dual_bound_total,
        hard_violations_total,
        report_dir,
    })
}
