//! Columnar text writers for trajectories and metric series, key-value
//! summaries, and content digests. Float columns use Rust's shortest
//! round-trip formatting, so files parse back to bit-identical values.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::driver::{AlgoParams, Phase, Trajectory};
use crate::error::{Error, Result};
use crate::metrics::{MetricsSeries, ThresholdReport};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in out {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// Short content digest of a vector (first 16 hex chars of its byte hash).
pub fn x_digest(x: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(8 * x.len());
    for v in x {
        bytes.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    sha256_hex(&bytes)[..16].to_string()
}

pub fn file_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

fn phase_label(phase: Phase) -> &'static str {
    match phase {
        Phase::I => "I",
        Phase::II => "II",
    }
}

/// Renders the per-iteration trajectory table:
/// `t phase beta x_digest u_l1 y_norm dx_norm residual`.
pub fn render_trajectory(traj: &Trajectory) -> String {
    let mut out = String::new();
    out.push_str("t phase beta x_digest u_l1 y_norm dx_norm residual\n");
    for diag in &traj.diags {
        let st = &traj.states[diag.t - 1];
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {}\n",
            diag.t,
            phase_label(st.phase),
            st.beta,
            x_digest(&st.x),
            crate::driver::u_l1(st),
            st.duals.joint_norm(),
            diag.dx_norm,
            diag.sub_residual,
        ));
    }
    out
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    fs::write(path, render_trajectory(traj))?;
    Ok(())
}

/// One parsed trajectory row (used by the replay verification).
#[derive(Debug, Clone)]
pub struct TrajectoryRow {
    pub t: usize,
    pub phase: String,
    pub beta: f64,
    pub x_digest: String,
    pub u_l1: f64,
    pub y_norm: f64,
    pub dx_norm: f64,
    pub residual: f64,
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 8 {
            return Err(Error::InvalidState(format!(
                "trajectory row {idx} has {} columns, expected 8",
                cols.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::InvalidState(format!("bad float {s}: {e}")))
        };
        rows.push(TrajectoryRow {
            t: cols[0]
                .parse()
                .map_err(|e| Error::InvalidState(format!("bad index: {e}")))?,
            phase: cols[1].to_string(),
            beta: parse(cols[2])?,
            x_digest: cols[3].to_string(),
            u_l1: parse(cols[4])?,
            y_norm: parse(cols[5])?,
            dx_norm: parse(cols[6])?,
            residual: parse(cols[7])?,
        });
    }
    Ok(rows)
}

/// Renders the metric series table:
/// `t moreau_grad_sq r_alpha sum_g sum_g_pos sum_h_abs comp comp_pos e_y y_norm`.
pub fn render_metrics(series: &MetricsSeries) -> String {
    let mut out = String::new();
    out.push_str("t moreau_grad_sq r_alpha sum_g sum_g_pos sum_h_abs comp comp_pos e_y y_norm\n");
    for row in &series.rows {
        out.push_str(&format!(
            "{} {} {} {} {} {} {} {} {} {}\n",
            row.t,
            row.moreau_grad_sq,
            row.r_alpha_norm,
            row.sum_g,
            row.sum_g_pos,
            row.sum_h_abs,
            row.comp,
            row.comp_pos,
            row.e_y,
            row.y_norm,
        ));
    }
    out
}

pub fn write_metrics(path: &Path, series: &MetricsSeries) -> Result<()> {
    fs::write(path, render_metrics(series))?;
    Ok(())
}

/// Renders the key-value run summary covering the run aggregates, check
/// counters, and metric averages.
pub fn render_summary(
    traj: &Trajectory,
    params: &AlgoParams,
    series: Option<&MetricsSeries>,
) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
    let s = &traj.summary;
    kv("seed", s.seed.to_string());
    kv("t_horizon", s.t_horizon.to_string());
    kv("t1", s.t1.to_string());
    kv("sigma_g", params.sigma_g.to_string());
    kv("sigma_h", params.sigma_h.to_string());
    kv("alpha", params.alpha.to_string());
    kv("tau", params.tau.to_string());
    kv("c", params.c.to_string());
    kv("beta1", params.beta1.to_string());
    kv("beta_max", params.beta_max.to_string());
    kv("final_beta", s.final_beta.to_string());
    kv("final_y_norm", s.final_y_norm.to_string());
    kv("mean_y_norm", s.mean_y_norm.to_string());
    kv("sum_dx", s.sum_dx.to_string());
    kv("sum_comp", s.sum_comp.to_string());
    kv("u_max_inf", s.u_max_inf.to_string());
    kv("max_tol", s.max_tol.to_string());
    kv("trajectory_digest", traj.digest());
    let c = &traj.checks;
    kv("check_hard_violations", c.hard_violations().to_string());
    kv("check_descent_violations", c.descent.violations.to_string());
    kv("check_increment_violations", c.increment.violations.to_string());
    kv("check_dual_growth_violations", c.dual_growth_up.violations.to_string());
    kv("check_dual_deviation_violations", c.dual_deviation.violations.to_string());
    kv("check_phase1_feedback_violations", c.phase1_feedback_cap.violations.to_string());
    kv("check_phase1_u_nonzero", c.phase1_u_nonzero.to_string());
    kv("check_phase1_mu_sum_violations", c.phase1_mu_sum_cap.violations.to_string());
    kv("check_phase2_pointwise_violations", c.phase2_pointwise.violations.to_string());
    kv("check_phase2_weighted_violations", c.phase2_weighted_sum.violations.to_string());
    kv("check_telescope_g_violations", c.telescope_g.violations.to_string());
    kv("check_telescope_h_violations", c.telescope_h.violations.to_string());
    kv("check_complementarity_violations", c.complementarity_path.violations.to_string());
    kv("check_downward_excursions", c.downward_excursions.to_string());
    if let Some(series) = series {
        let a = &series.averages;
        kv("avg_moreau_grad_sq", a.moreau_grad_sq.to_string());
        kv("avg_r_alpha", a.r_alpha_norm.to_string());
        kv("avg_sum_g", a.sum_g.to_string());
        kv("avg_sum_g_pos", a.sum_g_pos.to_string());
        kv("avg_sum_h_abs", a.sum_h_abs.to_string());
        kv("avg_comp", a.comp.to_string());
        kv("avg_comp_pos", a.comp_pos.to_string());
        kv("avg_e_y", a.e_y.to_string());
        kv("avg_y_norm", a.y_norm.to_string());
        kv("output_index", series.output_index.to_string());
        kv("output_r_alpha", series.output_kkt.residual_norm.to_string());
        kv("output_max_g_violation", series.output_kkt.max_g_violation.to_string());
        kv("output_max_abs_h", series.output_kkt.max_abs_h.to_string());
        kv("output_complementarity", series.output_kkt.complementarity.to_string());
        kv("equivalence_violations", series.equivalence_violations.to_string());
        kv("u_max_observed", series.u_max_observed.to_string());
        kv("u_max_within_bound", series.u_max_within_bound.to_string());
    }
    out
}

pub fn write_summary(
    path: &Path,
    traj: &Trajectory,
    params: &AlgoParams,
    series: Option<&MetricsSeries>,
) -> Result<()> {
    fs::write(path, render_summary(traj, params, series))?;
    Ok(())
}

pub fn read_key_values(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(map)
}

/// Renders the key-value threshold report.
pub fn render_thresholds(report: &ThresholdReport) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: f64| out.push_str(&format!("{k} = {v}\n"));
    kv("gamma", report.gamma);
    kv("gamma_u", report.gamma_u);
    kv("vartheta", report.vartheta);
    kv("psi", report.psi);
    kv("phi_tilde", report.phi_tilde);
    kv("pi", report.pi);
    kv("z_theta", report.z_theta);
    kv("beta_k", report.beta_k);
    kv("rho_b1", report.rho_b1);
    kv("rho_b2", report.rho_b2);
    kv("rho_c1", report.rho_c1);
    kv("rho_c2", report.rho_c2);
    kv("delta_avg", report.delta_avg);
    kv("delta_max", report.delta_max);
    kv("b_t", report.b_t);
    kv("c_t", report.c_t);
    kv("e_y", report.e_y);
    kv("eta", report.eta);
    kv("pi_ch_avg", report.pi_ch_avg);
    kv("pi_grad", report.pi_grad);
    out.push_str(&format!("gamma_positive = {}\n", report.gamma_positive));
    out
}

pub fn write_thresholds(path: &Path, report: &ThresholdReport) -> Result<()> {
    fs::write(path, render_thresholds(report))?;
    Ok(())
}

/// Atomic write: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
