//! Stationarity measures and the analysis threshold formulas: Lagrangian
//! gradients, the projection residual, Moreau-envelope gradients via an inner
//! proximal solve, KKT reports, and the dual-norm / increment envelopes.

use rand::Rng;

use crate::driver::{AlgoParams, DualState, Trajectory};
use crate::error::{Error, Result};
use crate::model::DerivedConstants;
use crate::problem::StochasticProgram;
use crate::rng::{keyed_rng, tag};
use crate::vecops::{dist_sq, dot, linf_norm, norm, norm_sq, plus};

/// Gradient of the Lagrangian at `(x, y)` through the deterministic oracle:
/// `grad f + sum_i lambda_i grad g_i + sum_j (mu+_j - mu-_j) grad h_j`.
pub fn lagrangian_grad(program: &StochasticProgram, x: &[f64], y: &DualState) -> Vec<f64> {
    let det = program.deterministic(x);
    let mut grad = det.grad_f;
    for i in 0..program.p {
        let w = y.lambda()[i];
        if w != 0.0 {
            for k in 0..program.n {
                grad[k] += w * det.jac_g[i][k];
            }
        }
    }
    for j in 0..program.m {
        let w = y.mu_plus()[j] - y.mu_minus()[j];
        if w != 0.0 {
            for k in 0..program.n {
                grad[k] += w * det.jac_h[j][k];
            }
        }
    }
    grad
}

/// Lagrangian value at `(x, y)`.
pub fn lagrangian_value(program: &StochasticProgram, x: &[f64], y: &DualState) -> f64 {
    let det = program.deterministic(x);
    det.f + dot(y.lambda(), &det.g)
        + (0..program.m)
            .map(|j| (y.mu_plus()[j] - y.mu_minus()[j]) * det.h[j])
            .sum::<f64>()
}

/// Proximal residual `R_alpha(x, y) = alpha (x - Pi(x - grad L / alpha))`.
pub fn prox_residual(
    program: &StochasticProgram,
    x: &[f64],
    y: &DualState,
    alpha: f64,
) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::invalid_argument(format!("alpha must be positive, got {alpha}")));
    }
    let grad = lagrangian_grad(program, x, y);
    let moved: Vec<f64> = x.iter().zip(&grad).map(|(&xi, &gi)| xi - gi / alpha).collect();
    let projected = program.set.project(&moved)?;
    Ok(x.iter()
        .zip(&projected)
        .map(|(&xi, &pi)| alpha * (xi - pi))
        .collect())
}

/// Result of one Moreau-envelope evaluation.
#[derive(Debug, Clone)]
pub struct MoreauEval {
    /// `alpha (x - xhat)`, the envelope gradient.
    pub gradient: Vec<f64>,
    /// Envelope value `L(xhat, y) + (alpha/2) |xhat - x|^2`.
    pub value: f64,
    pub inner_point: Vec<f64>,
    pub inner_iterations: usize,
}

/// Computes the Moreau envelope of `L(., y) + indicator(X0)` at `x` by
/// solving the strongly convex inner problem with accelerated projected
/// gradient. Requires `alpha > 2 * weak_modulus` so the inner problem has
/// modulus at least `alpha / 2`.
pub fn moreau(
    program: &StochasticProgram,
    x: &[f64],
    y: &DualState,
    alpha: f64,
    weak_modulus: f64,
    tol: f64,
) -> Result<MoreauEval> {
    if !(alpha > 2.0 * weak_modulus) {
        return Err(Error::precondition(format!(
            "moreau envelope requires alpha > 2*weak_modulus (alpha = {alpha}, modulus = {weak_modulus})"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid_argument("tol must be positive"));
    }
    let n = program.n;
    let mu = alpha - weak_modulus;
    let inner_val = |z: &[f64]| lagrangian_value(program, z, y) + 0.5 * alpha * dist_sq(z, x);
    let inner_grad = |z: &[f64]| -> Vec<f64> {
        let mut g = lagrangian_grad(program, z, y);
        for k in 0..n {
            g[k] += alpha * (z[k] - x[k]);
        }
        g
    };

    let mut l_est = (2.0 * alpha + weak_modulus).max(mu);
    let mut z = program.set.project(x)?;
    let mut z_prev = z.clone();
    let mut w = z.clone();
    let max_iters = 100_000;
    for iter in 1..=max_iters {
        let g_w = inner_grad(&w);
        let f_w = inner_val(&w);
        let mut z_new;
        loop {
            let moved: Vec<f64> = (0..n).map(|k| w[k] - g_w[k] / l_est).collect();
            z_new = program.set.project(&moved)?;
            let f_new = inner_val(&z_new);
            let mut quad = f_w;
            for k in 0..n {
                let d = z_new[k] - w[k];
                quad += g_w[k] * d + 0.5 * l_est * d * d;
            }
            if f_new <= quad + 1e-14 * (1.0 + f_w.abs()) || l_est > 1e280 {
                break;
            }
            l_est *= 2.0;
        }

        // Fixed-point residual of the projected-gradient map at z_new.
        let g_new = inner_grad(&z_new);
        let step = 1.0 / l_est;
        let moved: Vec<f64> = (0..n).map(|k| z_new[k] - step * g_new[k]).collect();
        let reproj = program.set.project(&moved)?;
        let mut res = 0.0;
        for k in 0..n {
            let r = (z_new[k] - reproj[k]) / step;
            res += r * r;
        }
        let res = res.sqrt();
        if res <= tol {
            let gradient: Vec<f64> = (0..n).map(|k| alpha * (x[k] - z_new[k])).collect();
            return Ok(MoreauEval {
                value: inner_val(&z_new),
                gradient,
                inner_point: z_new,
                inner_iterations: iter,
            });
        }

        let q = (mu / l_est).min(1.0);
        let theta = (1.0 - q.sqrt()) / (1.0 + q.sqrt());
        let mut restart = 0.0;
        for k in 0..n {
            restart += (w[k] - z_new[k]) * (z_new[k] - z[k]);
        }
        let momentum = if restart > 0.0 { 0.0 } else { theta };
        for k in 0..n {
            z_prev[k] = z[k];
            z[k] = z_new[k];
            w[k] = z[k] + momentum * (z[k] - z_prev[k]);
        }
        if iter == max_iters {
            return Err(Error::InnerSolveConvergence { iterations: iter, residual: res });
        }
    }
    unreachable!("loop always returns or errors")
}

/// Envelope gradient only.
pub fn moreau_grad(
    program: &StochasticProgram,
    x: &[f64],
    y: &DualState,
    alpha: f64,
    weak_modulus: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    Ok(moreau(program, x, y, alpha, weak_modulus, tol)?.gradient)
}

/// Pass/fail record of the four approximate-KKT conditions at one epsilon.
#[derive(Debug, Clone, Copy)]
pub struct KktConditions {
    pub residual_ok: bool,
    pub complementarity_ok: bool,
    pub inequality_ok: bool,
    pub equality_ok: bool,
}

impl KktConditions {
    pub fn all(&self) -> bool {
        self.residual_ok && self.complementarity_ok && self.inequality_ok && self.equality_ok
    }
}

#[derive(Debug, Clone)]
pub struct KktReport {
    pub residual_norm: f64,
    pub max_g_violation: f64,
    pub max_abs_h: f64,
    /// `-<lambda, g(x)>`; sign-free.
    pub complementarity: f64,
    pub epsilon: Option<f64>,
    pub conditions: Option<KktConditions>,
}

/// Evaluates the stationarity, feasibility, and complementarity measures at
/// `(x, y)`, optionally testing them against a given epsilon.
pub fn kkt_report(
    program: &StochasticProgram,
    x: &[f64],
    y: &DualState,
    alpha: f64,
    epsilon: Option<f64>,
) -> Result<KktReport> {
    let residual_norm = norm(&prox_residual(program, x, y, alpha)?);
    let det = program.deterministic(x);
    let max_g_violation = det.g.iter().fold(0.0f64, |acc, &gi| acc.max(plus(gi)));
    let max_abs_h = linf_norm(&det.h);
    let complementarity = -dot(y.lambda(), &det.g);
    let conditions = epsilon.map(|eps| KktConditions {
        residual_ok: residual_norm <= eps,
        complementarity_ok: complementarity >= -eps,
        inequality_ok: det.g.iter().all(|&gi| gi <= eps),
        equality_ok: det.h.iter().all(|&hj| hj.abs() <= eps),
    });
    Ok(KktReport {
        residual_norm,
        max_g_violation,
        max_abs_h,
        complementarity,
        epsilon,
        conditions,
    })
}

/// Expectation bound of the drift process: theta + t0*dmax + t0*(4 d^2/zeta) log(8 d^2/zeta^2).
pub fn stochastic_process_bound(theta: f64, t0: f64, delta_max: f64, zeta: f64) -> f64 {
    theta
        + t0 * delta_max
        + t0 * (4.0 * delta_max * delta_max / zeta)
            * (8.0 * delta_max * delta_max / (zeta * zeta)).ln()
}

/// Upper incomplete gamma function for integer order via the closed form
/// `(a-1)! e^{-x} sum_{k<a} x^k / k!`.
pub fn upper_incomplete_gamma_int(a: u32, x: f64) -> f64 {
    let mut factorial = 1.0;
    for k in 2..a {
        factorial *= k as f64;
    }
    let mut sum = 0.0;
    let mut term = 1.0; // x^k / k!
    for k in 0..a {
        if k > 0 {
            term *= x / k as f64;
        }
        sum += term;
    }
    factorial * (-x).exp() * sum
}

/// Upper incomplete gamma for arbitrary positive order by composite Simpson
/// quadrature of the tail integral.
pub fn upper_incomplete_gamma_quadrature(a: f64, x: f64) -> f64 {
    // Integrand u^{a-1} e^{-u}; the cutoff keeps the dropped tail below 1e-14
    // for the orders used here (a <= 16).
    let hi = (x + 40.0 * a.max(1.0)).max(x + 60.0);
    let steps = 40_000usize;
    let h = (hi - x) / steps as f64;
    let f = |u: f64| u.powf(a - 1.0) * (-u).exp();
    let mut acc = f(x) + f(hi);
    for k in 1..steps {
        let u = x + k as f64 * h;
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(u);
    }
    acc * h / 3.0
}

fn upper_incomplete_gamma(a: f64, x: f64) -> f64 {
    let rounded = a.round();
    if (a - rounded).abs() < 1e-9 && rounded >= 1.0 && rounded <= 170.0 {
        upper_incomplete_gamma_int(rounded as u32, x)
    } else {
        upper_incomplete_gamma_quadrature(a, x)
    }
}

/// Trajectory state a threshold report can be localized at.
#[derive(Debug, Clone)]
pub struct ThresholdState {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub duals: DualState,
    pub t: usize,
}

/// Every analysis constant and envelope evaluated at one parameter set.
/// Fields involving a state (`b_t`, `c_t`, `e_y`) are NaN when no state was
/// supplied. Non-finite values from a nonpositive Gamma are reported, not
/// raised.
#[derive(Debug, Clone)]
pub struct ThresholdReport {
    pub gamma: f64,
    pub gamma_u: f64,
    pub gamma_positive: bool,
    pub vartheta: f64,
    pub psi: f64,
    pub phi_tilde: f64,
    pub pi: f64,
    pub z_theta: f64,
    pub beta_k: f64,
    pub rho_b1: f64,
    pub rho_b2: f64,
    pub rho_c1: f64,
    pub rho_c2: f64,
    pub delta_avg: f64,
    pub delta_max: f64,
    pub b_t: f64,
    pub c_t: f64,
    pub e_y: f64,
    /// Tail parameter used for phi_tilde and delta_max, (2/3) log T.
    pub eta: f64,
    /// Time-averaged high-probability envelope for the equality violation.
    pub pi_ch_avg: f64,
    /// High-probability envelope for the mean squared envelope gradient.
    pub pi_grad: f64,
}

/// Evaluates every threshold formula at the given parameters. `b_t`, `c_t`
/// and `beta_k` use the deterministic expectations at the supplied state in
/// place of a sample draw.
pub fn thresholds(
    params: &AlgoParams,
    consts: &DerivedConstants,
    program: &StochasticProgram,
    state: Option<&ThresholdState>,
) -> ThresholdReport {
    let p = program.p;
    let m = program.m;
    let pc = &program.constants;
    let t_f = params.t_horizon as f64;
    let s_f = params.s as f64;
    let gs = consts.gamma_sigma;
    let d0 = pc.d0;

    let gamma = params.gamma(consts, p, m);
    let gamma_u = params.gamma_u();

    let vartheta = pc.eps0 * params.sigma_g * s_f / 4.0
        + gs * (s_f - 1.0)
        + 2.0 * (params.alpha + params.tau) * d0 * d0 / (pc.eps0 * s_f)
        + 4.0 * pc.kappa_f * d0 / pc.eps0
        + 2.0 * gs * gs / pc.eps0
        + 4.0 * m as f64 * params.beta_max;
    let zeta = params.sigma_g * pc.eps0 / 4.0;
    let psi = stochastic_process_bound(vartheta, s_f, gs, zeta);

    let eta = (2.0 / 3.0) * t_f.ln();
    let tail_coeff = 16.0 * gs * gs * s_f / (params.sigma_g * pc.eps0);
    let phi_tilde = psi + tail_coeff * (eta + (t_f + 1.0).ln());

    let k = state.map(|st| st.t).unwrap_or(params.t_horizon) as f64;
    let z_theta = psi + tail_coeff * k.powf(params.theta);
    let beta_k = pc.l0 + consts.l_max * ((p + 2 * m) as f64).sqrt() * k * gs;

    let theta = params.theta;
    let gamma_tail = upper_incomplete_gamma(3.0 / theta, 1.0)
        + 2.0 * upper_incomplete_gamma(2.0 / theta, 1.0)
        + upper_incomplete_gamma(1.0 / theta, 1.0);
    let ratio = gs * gs * s_f / (params.sigma_g * pc.eps0);
    let pi = psi * psi
        + 32.0 * psi * ratio * t_f.powf(theta) / (theta + 1.0)
        + 256.0 * ratio * ratio * t_f.powf(2.0 * theta) / (2.0 * theta + 1.0)
        + 2.0 * gs * (psi + 16.0 * ratio * t_f.powf(theta) / (theta + 1.0))
        + gs * gs
        + gs * gs / (t_f * theta) * gamma_tail;

    let rho_b1 = (consts.c_g * (p as f64).sqrt()).max(consts.c_h * (2.0 * m as f64).sqrt());
    let rho_b2 = p as f64 * params.sigma_g * consts.c_g * pc.nu_g
        + 2.0 * m as f64 * params.sigma_h * consts.c_h * (pc.nu_h + consts.u_max_bound);
    let rho_c1 = 1.0 / (2.0 * params.c).sqrt();
    let rho_c2 = pc.kappa_f / (2.0 * params.alpha).sqrt()
        + (m as f64).sqrt() / (2.0 * params.c).sqrt()
            * (2.0 * params.sigma_h * (pc.nu_h + consts.u_max_bound) + params.beta_max);
    let delta_avg = (rho_b1 * psi + rho_b2) / gamma + (rho_c1 * psi + rho_c2) / gamma.sqrt();
    let delta_max =
        (rho_b1 * phi_tilde + rho_b2) / gamma + (rho_c1 * phi_tilde + rho_c2) / gamma.sqrt();

    let (b_t, c_t, e_y) = match state {
        None => (f64::NAN, f64::NAN, f64::NAN),
        Some(st) => {
            let det = program.deterministic(&st.x);
            let beta_t = (params.beta1
                + (st.t.saturating_sub(1)) as f64 * 2.0 * params.sigma_h * consts.c_qh)
                .min(params.beta_max);
            let mut b_t = 0.0;
            for i in 0..p {
                b_t += consts.c_g * (st.duals.lambda()[i] + params.sigma_g * det.g[i]).abs();
            }
            let mut c_t = pc.kappa_f * pc.kappa_f / (2.0 * params.alpha);
            for j in 0..m {
                let ap = st.duals.mu_plus()[j] + params.sigma_h * (det.h[j] - st.u[j]);
                let am = st.duals.mu_minus()[j] + params.sigma_h * (-det.h[j] - st.u[j]);
                b_t += consts.c_h * (ap.abs() + am.abs());
                let w = ap.abs() + am.abs() + beta_t;
                c_t += w * w / (2.0 * params.c);
            }
            let e_y = norm_sq(st.duals.lambda()) / (2.0 * params.sigma_g)
                + (norm_sq(st.duals.mu_plus()) + norm_sq(st.duals.mu_minus()))
                    / (2.0 * params.sigma_h);
            (b_t, c_t, e_y)
        }
    };

    // High-probability envelopes at eta. The initial objective gap inside
    // pi_grad is bounded by kappa_f * D0 over the feasible set.
    let p2m = ((p + 2 * m) as f64).sqrt();
    let t34 = t_f.sqrt() * t_f.sqrt().sqrt();
    let pi_ch = eta * pc.rho_c * t_f.sqrt()
        + phi_tilde * t34 / params.c_h
        + consts.c_h * t_f * delta_max
        + params.c_h * params.c_h * consts.c_qh / (3.0 * params.c0)
            * t34
            * (1.0 + 1.0 / t_f).powi(3);
    let pi_ch_avg = pi_ch / t_f;
    let at = params.alpha + params.tau;
    let pi_grad = 4.0 * at / t_f * (pc.kappa_f * d0)
        + 4.0 * consts.nu_max * p2m * at / t_f * phi_tilde
        + 4.0 * at * consts.nu_max * p2m * gs
        + 4.0 * params.alpha * d0 * consts.gamma_delta
        + 4.0 * params.alpha / at
            * ((pc.kappa_f + consts.gamma_delta).powi(2)
                + consts.kappa_gh * consts.kappa_gh * phi_tilde * phi_tilde);

    ThresholdReport {
        gamma,
        gamma_u,
        gamma_positive: gamma > 0.0 && gamma_u > 0.0,
        vartheta,
        psi,
        phi_tilde,
        pi,
        z_theta,
        beta_k,
        rho_b1,
        rho_b2,
        rho_c1,
        rho_c2,
        delta_avg,
        delta_max,
        b_t,
        c_t,
        e_y,
        eta,
        pi_ch_avg,
        pi_grad,
    }
}

/// One logged iterate of the metrics replay.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub t: usize,
    /// Squared envelope gradient norm; NaN in cheap mode.
    pub moreau_grad_sq: f64,
    pub r_alpha_norm: f64,
    pub sum_g: f64,
    /// Sum of positive parts of the inequality constraints.
    pub sum_g_pos: f64,
    pub sum_h_abs: f64,
    pub comp: f64,
    pub comp_pos: f64,
    pub e_y: f64,
    pub y_norm: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MetricsAverages {
    pub moreau_grad_sq: f64,
    pub r_alpha_norm: f64,
    pub sum_g: f64,
    pub sum_g_pos: f64,
    pub sum_h_abs: f64,
    pub comp: f64,
    pub comp_pos: f64,
    pub e_y: f64,
    pub y_norm: f64,
}

#[derive(Debug, Clone)]
pub struct MetricsSeries {
    pub rows: Vec<MetricsRow>,
    pub averages: MetricsAverages,
    /// Uniformly random output iterate and its KKT report.
    pub output_index: usize,
    pub output_kkt: KktReport,
    /// Violations of the envelope equivalence inequality across logged rows.
    pub equivalence_violations: usize,
    pub equivalence_max_excess: f64,
    pub u_max_observed: f64,
    /// Whether the observed slack stayed under the 4*C_qH envelope.
    pub u_max_within_bound: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct MetricsOptions {
    /// Evaluate every `stride`-th iterate (1 = full replay).
    pub stride: usize,
    /// Skip the Moreau inner solves entirely.
    pub with_moreau: bool,
    pub moreau_tol: f64,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            stride: 1,
            with_moreau: true,
            moreau_tol: 1e-9,
        }
    }
}

impl MetricsOptions {
    /// Full replay up to T = 1024, every ceil(T/256)-th iterate beyond.
    pub fn auto(t: usize) -> Self {
        Self {
            stride: if t <= 1024 { 1 } else { t.div_ceil(256) },
            ..Self::default()
        }
    }
}

/// Replays a trajectory through the deterministic oracle, computing the
/// stationarity series, running averages, the random output iterate, and the
/// envelope equivalence verification.
pub fn trajectory_metrics(
    program: &StochasticProgram,
    traj: &Trajectory,
    params: &AlgoParams,
    opts: &MetricsOptions,
) -> Result<MetricsSeries> {
    if opts.stride == 0 {
        return Err(Error::invalid_argument("stride must be >= 1"));
    }
    let t_total = traj.t_horizon();
    if t_total == 0 {
        return Err(Error::invalid_argument("trajectory has no iterations"));
    }
    let consts = crate::model::derived_constants(
        program,
        params.sigma_g,
        params.sigma_h,
        program.constants.d0,
    )?;
    let p2m = ((program.p + 2 * program.m) as f64).sqrt();
    let equiv_const = 1.0 + 1.0 / 2f64.sqrt();

    let mut rows = Vec::new();
    let mut equivalence_violations = 0usize;
    let mut equivalence_max_excess = 0.0f64;
    let mut u_max_observed = 0.0f64;
    for st in &traj.states {
        u_max_observed = u_max_observed.max(linf_norm(&st.u));
    }

    let mut t = 1usize;
    while t <= t_total {
        let st = &traj.states[t - 1];
        let det = program.deterministic(&st.x);
        let sum_g: f64 = det.g.iter().sum();
        let sum_g_pos: f64 = det.g.iter().map(|&v| plus(v)).sum();
        let sum_h_abs: f64 = det.h.iter().map(|v| v.abs()).sum();
        let comp = -dot(st.duals.lambda(), &det.g);
        let e_y = norm_sq(st.duals.lambda()) / (2.0 * params.sigma_g)
            + (norm_sq(st.duals.mu_plus()) + norm_sq(st.duals.mu_minus()))
                / (2.0 * params.sigma_h);
        let y_norm = st.duals.joint_norm();

        let r_alpha = norm(&prox_residual(program, &st.x, &st.duals, params.alpha)?);
        let moreau_grad_sq = if opts.with_moreau {
            let weak_modulus = program.constants.l0 + consts.l_max * p2m * y_norm;
            let ev = moreau(
                program,
                &st.x,
                &st.duals,
                params.alpha,
                weak_modulus,
                opts.moreau_tol,
            )?;
            let grad_norm = norm(&ev.gradient);
            let excess =
                r_alpha / params.alpha - equiv_const * grad_norm - 10.0 * opts.moreau_tol;
            if excess > 0.0 {
                equivalence_violations += 1;
                equivalence_max_excess = equivalence_max_excess.max(excess);
            }
            grad_norm * grad_norm
        } else {
            f64::NAN
        };

        rows.push(MetricsRow {
            t,
            moreau_grad_sq,
            r_alpha_norm: r_alpha,
            sum_g,
            sum_g_pos,
            sum_h_abs,
            comp,
            comp_pos: plus(comp),
            e_y,
            y_norm,
        });
        t += opts.stride;
    }

    let count = rows.len() as f64;
    let mut averages = MetricsAverages::default();
    for row in &rows {
        if opts.with_moreau {
            averages.moreau_grad_sq += row.moreau_grad_sq;
        }
        averages.r_alpha_norm += row.r_alpha_norm;
        averages.sum_g += row.sum_g;
        averages.sum_g_pos += row.sum_g_pos;
        averages.sum_h_abs += row.sum_h_abs;
        averages.comp += row.comp;
        averages.comp_pos += row.comp_pos;
        averages.e_y += row.e_y;
        averages.y_norm += row.y_norm;
    }
    averages.moreau_grad_sq /= count;
    averages.r_alpha_norm /= count;
    averages.sum_g /= count;
    averages.sum_g_pos /= count;
    averages.sum_h_abs /= count;
    averages.comp /= count;
    averages.comp_pos /= count;
    averages.e_y /= count;
    averages.y_norm /= count;
    if !opts.with_moreau {
        averages.moreau_grad_sq = f64::NAN;
    }

    let mut rng = keyed_rng(traj.seed, 0, tag::OUTPUT_INDEX);
    let output_index = 1 + (rng.gen::<u64>() % t_total as u64) as usize;
    let out_state = &traj.states[output_index - 1];
    let output_kkt = kkt_report(program, &out_state.x, &out_state.duals, params.alpha, None)?;

    Ok(MetricsSeries {
        rows,
        averages,
        output_index,
        output_kkt,
        equivalence_violations,
        equivalence_max_excess,
        u_max_observed,
        u_max_within_bound: u_max_observed <= consts.u_max_bound,
    })
}
