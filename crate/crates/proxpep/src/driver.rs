//! The main iteration loop: sampling, model building, the joint proximal
//! solve, closed-form dual ascent, and the two-phase penalty schedule,
//! together with the per-iteration inequality checks the analysis provides.

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{build_models, derived_constants, DerivedConstants, QuadModelSet};
use crate::problem::StochasticProgram;
use crate::rng::{keyed_rng, mix, tag};
use crate::subproblem::{solve, SubproblemInstance};
use crate::vecops::{dist, dot, l1_norm, linf_norm, norm, norm_sq, plus};

/// Base coefficients for the power-rate parameter schedule.
#[derive(Debug, Clone, Copy)]
pub struct ScheduleCoeffs {
    pub c_g: f64,
    pub c_h: f64,
    pub tau0: f64,
    pub c0: f64,
    /// Proximal coefficient; derived from the problem constants when `None`.
    pub alpha0: Option<f64>,
}

impl Default for ScheduleCoeffs {
    fn default() -> Self {
        Self {
            c_g: 1.0,
            c_h: 1.0,
            tau0: 1.0,
            c0: 1.0,
            alpha0: None,
        }
    }
}

/// Fully resolved algorithm parameters for one horizon.
#[derive(Debug, Clone)]
pub struct AlgoParams {
    pub t_horizon: usize,
    pub c_g: f64,
    pub c_h: f64,
    pub alpha0: f64,
    pub tau0: f64,
    pub c0: f64,
    pub sigma_g: f64,
    pub sigma_h: f64,
    pub alpha: f64,
    pub tau: f64,
    pub c: f64,
    pub beta1: f64,
    pub beta_max: f64,
    /// Dual drift window length, ceil(sqrt(T)).
    pub s: usize,
    /// Free exponent of the dual threshold sequence.
    pub theta: f64,
    /// Phase transition iteration.
    pub t1: usize,
    /// Relative subproblem tolerance; the per-iteration tolerance is
    /// `tol_sub * (1 + |x^t|)`.
    pub tol_sub: f64,
    pub max_sub_iters: usize,
    /// Whether the horizon satisfies the schedule's admissibility condition.
    pub t_condition_ok: bool,
    /// Smallest horizon for which the condition holds.
    pub min_admissible_t: f64,
}

impl AlgoParams {
    /// Primal descent modulus (alpha+tau)/2 - p sigma_g C_G^2/2 - 2m sigma_h C_H^2.
    pub fn gamma(&self, consts: &DerivedConstants, p: usize, m: usize) -> f64 {
        0.5 * (self.alpha + self.tau)
            - 0.5 * p as f64 * self.sigma_g * consts.c_g * consts.c_g
            - 2.0 * m as f64 * self.sigma_h * consts.c_h * consts.c_h
    }

    /// Slack modulus alpha + c/2 - 2 sigma_h.
    pub fn gamma_u(&self) -> f64 {
        self.alpha + 0.5 * self.c - 2.0 * self.sigma_h
    }
}

/// Exact power rates of the schedule, computed through `sqrt` so that
/// power-of-two horizons evaluate without rounding.
fn schedule_powers(t: usize) -> (f64, f64, f64, f64) {
    let tf = t as f64;
    let half = tf.sqrt();
    let quarter = half.sqrt();
    let three_quarter = half * quarter;
    (tf, half, quarter, three_quarter)
}

/// Applies the power-rate schedule to the horizon and verifies the
/// feasibility gate and horizon admissibility clauses.
pub fn schedule_params(
    t: usize,
    coeffs: &ScheduleCoeffs,
    program: &StochasticProgram,
    d0: f64,
) -> Result<AlgoParams> {
    if t == 0 {
        return Err(Error::invalid_argument("horizon T must be >= 1"));
    }
    if !(coeffs.c_g > 0.0 && coeffs.c_h > 0.0 && coeffs.tau0 > 0.0 && coeffs.c0 > 0.0) {
        return Err(Error::invalid_argument("schedule coefficients must be positive"));
    }
    let (tf, half, quarter, three_quarter) = schedule_powers(t);
    let sigma_g = coeffs.c_g / three_quarter;
    let sigma_h = coeffs.c_h / three_quarter;
    let tau = coeffs.tau0 * half;
    let c = coeffs.c0 * tf * half;
    let s = half.ceil() as usize;

    let pc = &program.constants;
    let p2m = (program.p + 2 * program.m) as f64;
    let consts = derived_constants(program, sigma_g, sigma_h, d0)?;

    // Feasibility gate of the dual drift analysis.
    if p2m.sqrt() * consts.kappa_sigma * d0 * d0 > pc.eps0 {
        return Err(Error::Configuration(format!(
            "feasibility gate violated: sqrt(p+2m) kappa_sigma D0^2 = {} > eps0 = {}",
            p2m.sqrt() * consts.kappa_sigma * d0 * d0,
            pc.eps0
        )));
    }

    let c_gamma = (coeffs.c_g * coeffs.c_g * pc.nu_g * pc.nu_g
        + 2.0 * coeffs.c_h * coeffs.c_h * pc.nu_h * pc.nu_h)
        .sqrt();
    let alpha0 = match coeffs.alpha0 {
        Some(a) if a > 0.0 => a,
        Some(a) => return Err(Error::invalid_argument(format!("alpha0 must be positive, got {a}"))),
        None => 2.0 * pc.l0 + 2.0 * consts.l_max * p2m.sqrt() * c_gamma + 1.0,
    };
    let alpha = alpha0 * quarter;

    let beta1 = 2.0 * consts.c_qh * sigma_h;
    let beta_max = beta1 + 2.0 * coeffs.c_h * consts.c_qh;

    // Horizon admissibility clauses.
    let clause2 = ((program.p as f64 * coeffs.c_g * consts.c_g * consts.c_g
        + 4.0 * program.m as f64 * coeffs.c_h * consts.c_h * consts.c_h)
        / coeffs.tau0)
        .powi(4);
    let clause3 = (4.0 * coeffs.c_h / coeffs.c0).powf(4.0 / 9.0);
    let min_admissible_t = 1.0f64.max(clause2).max(clause3);
    let t_condition_ok = tf >= min_admissible_t;

    let mut params = AlgoParams {
        t_horizon: t,
        c_g: coeffs.c_g,
        c_h: coeffs.c_h,
        alpha0,
        tau0: coeffs.tau0,
        c0: coeffs.c0,
        sigma_g,
        sigma_h,
        alpha,
        tau,
        c,
        beta1,
        beta_max,
        s,
        theta: 0.25,
        t1: 0,
        tol_sub: 1e-8,
        max_sub_iters: 200_000,
        t_condition_ok,
        min_admissible_t,
    };
    params.t1 = phase_transition(&params);
    Ok(params)
}

/// Joint multiplier (lambda, mu_plus, mu_minus), componentwise nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    lambda: Vec<f64>,
    mu_plus: Vec<f64>,
    mu_minus: Vec<f64>,
}

impl DualState {
    pub fn new(lambda: Vec<f64>, mu_plus: Vec<f64>, mu_minus: Vec<f64>) -> Result<Self> {
        if mu_plus.len() != mu_minus.len() {
            return Err(Error::invalid_argument("mu_plus and mu_minus lengths differ"));
        }
        if lambda
            .iter()
            .chain(&mu_plus)
            .chain(&mu_minus)
            .any(|&v| v < 0.0 || !v.is_finite())
        {
            return Err(Error::invalid_argument("dual variables must be finite and nonnegative"));
        }
        Ok(Self {
            lambda,
            mu_plus,
            mu_minus,
        })
    }

    pub fn zeros(p: usize, m: usize) -> Self {
        Self {
            lambda: vec![0.0; p],
            mu_plus: vec![0.0; m],
            mu_minus: vec![0.0; m],
        }
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn mu_plus(&self) -> &[f64] {
        &self.mu_plus
    }

    pub fn mu_minus(&self) -> &[f64] {
        &self.mu_minus
    }

    /// Joint norm sqrt(|lambda|^2 + |mu+|^2 + |mu-|^2).
    pub fn joint_norm(&self) -> f64 {
        (norm_sq(&self.lambda) + norm_sq(&self.mu_plus) + norm_sq(&self.mu_minus)).sqrt()
    }
}

/// Closed-form dual ascent at the new primal point.
pub fn dual_update(
    models: &QuadModelSet,
    x_next: &[f64],
    u_next: &[f64],
    duals: &DualState,
    sigma_g: f64,
    sigma_h: f64,
) -> DualState {
    let lambda = (0..models.p())
        .map(|i| plus(duals.lambda[i] + sigma_g * models.q_g(i, x_next)))
        .collect();
    let mu_plus = (0..models.m())
        .map(|j| plus(duals.mu_plus[j] + sigma_h * (models.q_h_plus(j, x_next) - u_next[j])))
        .collect();
    let mu_minus = (0..models.m())
        .map(|j| plus(duals.mu_minus[j] + sigma_h * (models.q_h_minus(j, x_next) - u_next[j])))
        .collect();
    DualState {
        lambda,
        mu_plus,
        mu_minus,
    }
}

/// Two-phase penalty update: fixed increments until the cap, frozen after.
/// The last increment is capped at `beta_max` so the frozen value is reached
/// exactly even when the cap is off the increment grid.
pub fn penalty_update(beta_t: f64, sigma_h: f64, c_qh: f64, beta_max: f64) -> Result<f64> {
    if beta_t > beta_max * (1.0 + 1e-12) {
        return Err(Error::InvalidState(format!(
            "penalty {beta_t} already exceeds beta_max {beta_max}"
        )));
    }
    if beta_t < beta_max {
        Ok((beta_t + 2.0 * sigma_h * c_qh).min(beta_max))
    } else {
        Ok(beta_max)
    }
}

/// Phase transition iteration floor((beta_max - beta1) / (2 sigma_h C_qH)).
/// A one-ulp relative guard keeps grid-aligned schedules (where the ratio is
/// an exact integer) from flooring one short.
pub fn phase_transition(params: &AlgoParams) -> usize {
    // beta1 = 2 sigma_h C_qH by construction, so the denominator is beta1.
    let ratio = (params.beta_max - params.beta1) / params.beta1;
    if !ratio.is_finite() || ratio <= 0.0 {
        return 0;
    }
    (ratio + 1e-9 * (1.0 + ratio)).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    I,
    II,
}

/// Primal-dual state at the start of iteration `t`.
#[derive(Debug, Clone)]
pub struct IterState {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub duals: DualState,
    pub beta: f64,
    pub phase: Phase,
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone)]
pub struct IterDiag {
    pub t: usize,
    pub dx_norm: f64,
    pub sub_residual: f64,
    pub sub_iterations: usize,
    /// Dual feedback a_j = mu+_j + sigma_h q_{H+,j}(x^{t+1}).
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub g_sample: Vec<f64>,
    pub h_sample: Vec<f64>,
    pub f_sample: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CheckStat {
    pub violations: usize,
    pub max_excess: f64,
}

impl CheckStat {
    fn observe(&mut self, excess: f64) {
        if excess > 0.0 {
            self.violations += 1;
            if excess > self.max_excess {
                self.max_excess = excess;
            }
        }
    }
}

/// Outcome of every inequality check the analysis supplies, accumulated over
/// a run. `descent` through `complementarity_path` are hard guarantees;
/// `downward_excursions` is a logged diagnostic only.
#[derive(Debug, Clone, Default)]
pub struct CheckSummary {
    pub descent: CheckStat,
    pub increment: CheckStat,
    pub dual_growth_up: CheckStat,
    pub dual_deviation: CheckStat,
    pub phase1_feedback_cap: CheckStat,
    pub phase1_u_nonzero: usize,
    pub phase1_mu_sum_cap: CheckStat,
    pub phase2_pointwise: CheckStat,
    pub phase2_weighted_sum: CheckStat,
    pub telescope_g: CheckStat,
    pub telescope_h: CheckStat,
    pub complementarity_path: CheckStat,
    pub general_descent: CheckStat,
    pub downward_excursions: usize,
    pub max_downward_excess: f64,
}

impl CheckSummary {
    /// Total count over the guaranteed inequalities.
    pub fn hard_violations(&self) -> usize {
        self.descent.violations
            + self.increment.violations
            + self.dual_growth_up.violations
            + self.dual_deviation.violations
            + self.phase1_feedback_cap.violations
            + self.phase1_u_nonzero
            + self.phase1_mu_sum_cap.violations
            + self.phase2_pointwise.violations
            + self.phase2_weighted_sum.violations
            + self.telescope_g.violations
            + self.telescope_h.violations
            + self.complementarity_path.violations
            + self.general_descent.violations
    }
}

/// Horizon-level aggregates of one run.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub seed: u64,
    pub t_horizon: usize,
    pub t1: usize,
    pub sum_dx: f64,
    pub sum_g: Vec<f64>,
    pub sum_abs_h: Vec<f64>,
    /// -sum_t <lambda^t, G(x^t, xi_t)>.
    pub sum_comp: f64,
    pub sum_g_norm_sq: f64,
    pub sum_h_norm_sq: f64,
    pub sum_grad_f_norm_sq: f64,
    /// sum_t |u^t|^2 over t = 1..T.
    pub sum_u_norm_sq: f64,
    /// Per-j sum_t u_j^{t+1} over t = 1..T.
    pub sum_u_next: Vec<f64>,
    pub final_y_norm: f64,
    pub final_beta: f64,
    pub u_max_inf: f64,
    pub max_tol: f64,
    pub mean_y_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<IterState>,
    pub diags: Vec<IterDiag>,
    pub checks: CheckSummary,
    pub summary: RunSummary,
    pub seed: u64,
}

impl Trajectory {
    pub fn t_horizon(&self) -> usize {
        self.diags.len()
    }

    /// Content digest over all states; identical digests mean identical runs.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for st in &self.states {
            for v in st
                .x
                .iter()
                .chain(&st.u)
                .chain(st.duals.lambda())
                .chain(st.duals.mu_plus())
                .chain(st.duals.mu_minus())
            {
                hasher.update(v.to_bits().to_le_bytes());
            }
            hasher.update(st.beta.to_bits().to_le_bytes());
        }
        let out = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in out {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Starting point; defaults to the strictly feasible point.
    pub start: Option<Vec<f64>>,
    /// Evaluate the general descent inequality at random reference points.
    pub debug_checks: bool,
}

/// Runs the algorithm for `params.t_horizon` iterations.
pub fn run(program: &StochasticProgram, params: &AlgoParams, seed: u64) -> Result<Trajectory> {
    run_with_options(program, params, seed, &RunOptions::default())
}

struct Accumulators {
    sum_dx: f64,
    sum_g: Vec<f64>,
    sum_abs_h: Vec<f64>,
    sum_comp: f64,
    sum_g_norm_sq: f64,
    sum_h_norm_sq: f64,
    sum_grad_f_norm_sq: f64,
    sum_u_norm_sq: f64,
    sum_u_next: Vec<f64>,
    sum_y_norm: f64,
    u_max_inf: f64,
    max_tol: f64,
}

pub fn run_with_options(
    program: &StochasticProgram,
    params: &AlgoParams,
    seed: u64,
    opts: &RunOptions,
) -> Result<Trajectory> {
    let n = program.n;
    let p = program.p;
    let m = program.m;
    let consts = derived_constants(program, params.sigma_g, params.sigma_h, program.constants.d0)?;
    let gamma = params.gamma(&consts, p, m);
    let gamma_sigma = consts.gamma_sigma;
    let kappa = params.alpha + params.c;

    let start = match &opts.start {
        Some(x) => x.clone(),
        None => program.constants.x_tilde.clone(),
    };
    let x1 = program.set.project(&start)?;
    if x1.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x1.len() });
    }

    let phase_of = |t: usize| if t <= params.t1 { Phase::I } else { Phase::II };

    let mut states = Vec::with_capacity(params.t_horizon + 1);
    states.push(IterState {
        x: x1,
        u: vec![0.0; m],
        duals: DualState::zeros(p, m),
        beta: params.beta1,
        phase: phase_of(1),
    });
    let mut diags: Vec<IterDiag> = Vec::with_capacity(params.t_horizon);
    let mut checks = CheckSummary::default();
    let mut acc = Accumulators {
        sum_dx: 0.0,
        sum_g: vec![0.0; p],
        sum_abs_h: vec![0.0; m],
        sum_comp: 0.0,
        sum_g_norm_sq: 0.0,
        sum_h_norm_sq: 0.0,
        sum_grad_f_norm_sq: 0.0,
        sum_u_norm_sq: 0.0,
        sum_u_next: vec![0.0; m],
        sum_y_norm: 0.0,
        u_max_inf: 0.0,
        max_tol: 0.0,
    };

    let abort = |t: usize,
                 source: Error,
                 states: Vec<IterState>,
                 diags: Vec<IterDiag>,
                 checks: CheckSummary,
                 acc: &Accumulators|
     -> Error {
        let partial = finalize(
            program, params, seed, states, diags, checks, acc, /*complete=*/ false,
        );
        Error::RunAborted {
            iteration: t,
            source: Box::new(source),
            partial: Box::new(partial),
        }
    };

    for t in 1..=params.t_horizon {
        let cur = states.last().expect("state t exists").clone();
        let tol_t = params.tol_sub * (1.0 + norm(&cur.x));
        acc.max_tol = acc.max_tol.max(tol_t);
        let y_norm = cur.duals.joint_norm();
        acc.sum_y_norm += y_norm;
        let slack = 10.0 * tol_t * (1.0 + y_norm);

        let rec = match program.sample(&cur.x, mix(seed, t as u64, tag::SAMPLE)) {
            Ok(r) => r,
            Err(e) => return Err(abort(t, e, states, diags, checks, &acc)),
        };
        let models = match build_models(
            &rec,
            &cur.x,
            &program.constants.l_g,
            &program.constants.l_h,
            &cur.duals,
            params.tau,
        ) {
            Ok(mo) => mo,
            Err(e) => return Err(abort(t, e, states, diags, checks, &acc)),
        };
        let inst = match SubproblemInstance::new(
            models,
            cur.duals.clone(),
            cur.x.clone(),
            cur.u.clone(),
            params.sigma_g,
            params.sigma_h,
            params.alpha,
            params.c,
            cur.beta,
            program.set.clone(),
        ) {
            Ok(i) => i,
            Err(e) => return Err(abort(t, e, states, diags, checks, &acc)),
        };
        let sol = match solve(&inst, tol_t, params.max_sub_iters) {
            Ok(s) => s,
            Err(e) => return Err(abort(t, e, states, diags, checks, &acc)),
        };

        let (a, b) = inst.dual_feedback(&sol.x_next);
        let duals_next = dual_update(
            &inst.models,
            &sol.x_next,
            &sol.u_next,
            &cur.duals,
            params.sigma_g,
            params.sigma_h,
        );
        let beta_next = match penalty_update(cur.beta, params.sigma_h, consts.c_qh, params.beta_max)
        {
            Ok(bn) => bn,
            Err(e) => return Err(abort(t, e, states, diags, checks, &acc)),
        };

        let dx = dist(&sol.x_next, &cur.x);
        let du_sq = crate::vecops::dist_sq(&sol.u_next, &cur.u);
        let y_next_norm = duals_next.joint_norm();

        // --- One-step descent, localized form.
        {
            let mut dxv = vec![0.0; n];
            for k in 0..n {
                dxv[k] = sol.x_next[k] - cur.x[k];
            }
            let mut lhs = dot(&rec.grad_f, &dxv)
                + 0.5 * inst.models.curv0 * dx * dx
                + params.alpha * dx * dx
                + kappa * du_sq
                + norm_sq(duals_next.lambda()) / (2.0 * params.sigma_g)
                + (norm_sq(duals_next.mu_plus()) + norm_sq(duals_next.mu_minus()))
                    / (2.0 * params.sigma_h);
            for j in 0..m {
                lhs += cur.beta * (sol.u_next[j] - cur.u[j]);
            }
            let mut rhs = 0.0;
            for i in 0..p {
                let v = plus(cur.duals.lambda()[i] + params.sigma_g * rec.g[i]);
                rhs += v * v / (2.0 * params.sigma_g);
            }
            for j in 0..m {
                let vp = plus(cur.duals.mu_plus()[j] + params.sigma_h * (rec.h[j] - cur.u[j]));
                let vm = plus(cur.duals.mu_minus()[j] + params.sigma_h * (-rec.h[j] - cur.u[j]));
                rhs += (vp * vp + vm * vm) / (2.0 * params.sigma_h);
            }
            checks.descent.observe(lhs - rhs - slack);
        }

        // --- Unified increment bound.
        {
            let mut b_t = 0.0;
            for i in 0..p {
                b_t += consts.c_g * (cur.duals.lambda()[i] + params.sigma_g * rec.g[i]).abs();
            }
            let mut c_t = program.constants.kappa_f * program.constants.kappa_f
                / (2.0 * params.alpha);
            for j in 0..m {
                let ap = cur.duals.mu_plus()[j] + params.sigma_h * (rec.h[j] - cur.u[j]);
                let am = cur.duals.mu_minus()[j] + params.sigma_h * (-rec.h[j] - cur.u[j]);
                b_t += consts.c_h * (ap.abs() + am.abs());
                let w = ap.abs() + am.abs() + cur.beta;
                c_t += w * w / (2.0 * params.c);
            }
            checks
                .increment
                .observe(gamma * dx * dx - c_t - b_t * dx - slack);
        }

        // --- Dual growth: upward bound guaranteed, downward logged.
        checks
            .dual_growth_up
            .observe(y_next_norm - y_norm - gamma_sigma - 10.0 * tol_t);
        let downward = (y_norm - gamma_sigma - 10.0 * tol_t) - y_next_norm;
        if downward > 0.0 {
            checks.downward_excursions += 1;
            if downward > checks.max_downward_excess {
                checks.max_downward_excess = downward;
            }
        }

        // --- Phase-I properties.
        if t <= params.t1 {
            for i in 0..p {
                let reference = plus(cur.duals.lambda()[i] + params.sigma_g * rec.g[i]);
                checks.dual_deviation.observe(
                    (duals_next.lambda()[i] - reference).abs()
                        - params.sigma_g * consts.c_g * dx
                        - 10.0 * tol_t,
                );
            }
            for j in 0..m {
                let ref_p = plus(cur.duals.mu_plus()[j] + params.sigma_h * rec.h[j]);
                let ref_m = plus(cur.duals.mu_minus()[j] - params.sigma_h * rec.h[j]);
                checks.dual_deviation.observe(
                    (duals_next.mu_plus()[j] - ref_p).abs()
                        - params.sigma_h * consts.c_h * dx
                        - 10.0 * tol_t,
                );
                checks.dual_deviation.observe(
                    (duals_next.mu_minus()[j] - ref_m).abs()
                        - params.sigma_h * consts.c_h * dx
                        - 10.0 * tol_t,
                );
            }
            for j in 0..m {
                checks
                    .phase1_feedback_cap
                    .observe(plus(a[j]) + plus(b[j]) - cur.beta - 10.0 * tol_t);
                checks.phase1_mu_sum_cap.observe(
                    duals_next.mu_plus()[j] + duals_next.mu_minus()[j] - cur.beta - 1e-9,
                );
                if sol.u_next[j] != 0.0 {
                    checks.phase1_u_nonzero += 1;
                }
            }
        }

        // --- Optional general descent at random reference points.
        if opts.debug_checks {
            let mut rng = keyed_rng(seed, t as u64, tag::DEBUG_REFS);
            for _ in 0..5 {
                let z = program.set.sample_point(&mut rng);
                let v: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
                let mut dxv = vec![0.0; n];
                for k in 0..n {
                    dxv[k] = sol.x_next[k] - cur.x[k];
                }
                let mut lhs = dot(&rec.grad_f, &dxv)
                    + 0.5 * inst.models.curv0 * dx * dx
                    + norm_sq(duals_next.lambda()) / (2.0 * params.sigma_g)
                    + (norm_sq(duals_next.mu_plus()) + norm_sq(duals_next.mu_minus()))
                        / (2.0 * params.sigma_h)
                    + 0.5 * params.alpha * dx * dx
                    + 0.5 * kappa * du_sq;
                for j in 0..m {
                    lhs += cur.beta * sol.u_next[j];
                }
                let mut zv = vec![0.0; n];
                for k in 0..n {
                    zv[k] = z[k] - cur.x[k];
                }
                let dz_sq = norm_sq(&zv);
                let mut rhs = dot(&rec.grad_f, &zv) + 0.5 * inst.models.curv0 * dz_sq;
                for j in 0..m {
                    rhs += cur.beta * v[j];
                }
                for i in 0..p {
                    let q = inst.models.q_g(i, &z);
                    let val = plus(cur.duals.lambda()[i] + params.sigma_g * q);
                    rhs += val * val / (2.0 * params.sigma_g);
                }
                for j in 0..m {
                    let qp = inst.models.q_h_plus(j, &z);
                    let qm = inst.models.q_h_minus(j, &z);
                    let vp = plus(cur.duals.mu_plus()[j] + params.sigma_h * (qp - v[j]));
                    let vm = plus(cur.duals.mu_minus()[j] + params.sigma_h * (qm - v[j]));
                    rhs += (vp * vp + vm * vm) / (2.0 * params.sigma_h);
                }
                rhs += 0.5 * params.alpha * (dz_sq - crate::vecops::dist_sq(&z, &sol.x_next));
                rhs += 0.5
                    * kappa
                    * (crate::vecops::dist_sq(&v, &cur.u)
                        - crate::vecops::dist_sq(&v, &sol.u_next));
                checks.general_descent.observe(lhs - rhs - slack);
            }
        }

        // --- Aggregates.
        acc.sum_dx += dx;
        for i in 0..p {
            acc.sum_g[i] += rec.g[i];
        }
        for j in 0..m {
            acc.sum_abs_h[j] += rec.h[j].abs();
            acc.sum_u_next[j] += sol.u_next[j];
        }
        acc.sum_comp -= dot(cur.duals.lambda(), &rec.g);
        acc.sum_g_norm_sq += norm_sq(&rec.g);
        acc.sum_h_norm_sq += norm_sq(&rec.h);
        acc.sum_grad_f_norm_sq += norm_sq(&rec.grad_f);
        acc.sum_u_norm_sq += norm_sq(&cur.u);
        acc.u_max_inf = acc.u_max_inf.max(linf_norm(&sol.u_next));

        diags.push(IterDiag {
            t,
            dx_norm: dx,
            sub_residual: sol.prox_grad_norm,
            sub_iterations: sol.iterations,
            a,
            b,
            g_sample: rec.g,
            h_sample: rec.h,
            f_sample: rec.f,
            tol: tol_t,
        });
        states.push(IterState {
            x: sol.x_next,
            u: sol.u_next,
            duals: duals_next,
            beta: beta_next,
            phase: phase_of(t + 1),
        });
    }

    Ok(finalize(
        program, params, seed, states, diags, checks, &acc, /*complete=*/ true,
    ))
}

/// Horizon-level checks and summary assembly.
#[allow(clippy::too_many_arguments)]
fn finalize(
    program: &StochasticProgram,
    params: &AlgoParams,
    seed: u64,
    states: Vec<IterState>,
    diags: Vec<IterDiag>,
    mut checks: CheckSummary,
    acc: &Accumulators,
    complete: bool,
) -> Trajectory {
    let p = program.p;
    let m = program.m;
    let t_done = diags.len();
    let consts = derived_constants(
        program,
        params.sigma_g,
        params.sigma_h,
        program.constants.d0,
    )
    .expect("schedule already validated the step sizes");
    let final_state = states.last().expect("initial state always present");
    let kappa = params.alpha + params.c;
    let slack10 = 10.0 * acc.max_tol;

    if complete && t_done > 0 {
        // Phase-II slack trajectory bounds.
        let coeff = params.sigma_h * consts.c_qh / kappa;
        let mut weighted: Vec<f64> = vec![0.0; m];
        for (idx, st) in states.iter().enumerate() {
            let t = idx + 1;
            if t > params.t1 && t <= t_done {
                let nn = (t - params.t1) as f64;
                for j in 0..m {
                    checks
                        .phase2_pointwise
                        .observe(st.u[j] - coeff * nn * (nn + 1.0) - slack10);
                    weighted[j] += params.sigma_h * st.u[j];
                }
            }
        }
        let tt = t_done as f64;
        let sum_bound = params.c_h * params.c_h * consts.c_qh / (3.0 * params.c0)
            * (1.0 + 1.0 / tt).powi(3);
        for j in 0..m {
            checks
                .phase2_weighted_sum
                .observe(weighted[j] - sum_bound - tt * acc.max_tol);
        }

        // Telescoped constraint sums.
        let slack_t = slack10 * tt;
        for i in 0..p {
            let bound = final_state.duals.lambda()[i] / params.sigma_g + consts.c_g * acc.sum_dx;
            checks.telescope_g.observe(acc.sum_g[i] - bound - slack_t);
        }
        for j in 0..m {
            let bound = (final_state.duals.mu_plus()[j] + final_state.duals.mu_minus()[j])
                / params.sigma_h
                + consts.c_h * acc.sum_dx
                + acc.sum_u_next[j];
            checks.telescope_h.observe(acc.sum_abs_h[j] - bound - slack_t);
        }

        // Sample-path complementarity bound.
        let e_y_final = norm_sq(final_state.duals.lambda()) / (2.0 * params.sigma_g)
            + (norm_sq(final_state.duals.mu_plus()) + norm_sq(final_state.duals.mu_minus()))
                / (2.0 * params.sigma_h);
        let mut rhs = -e_y_final
            + 0.5 * params.sigma_g * acc.sum_g_norm_sq
            + params.sigma_h * acc.sum_h_norm_sq
            + acc.sum_grad_f_norm_sq / (2.0 * params.alpha)
            + params.sigma_h * acc.sum_u_norm_sq;
        for j in 0..m {
            rhs += params.beta_max
                * ((final_state.duals.mu_plus()[j] + final_state.duals.mu_minus()[j])
                    / params.sigma_h
                    + consts.c_h * acc.sum_dx
                    + acc.sum_u_next[j]);
        }
        checks
            .complementarity_path
            .observe(acc.sum_comp - rhs - tt * slack10);
    }

    let summary = RunSummary {
        seed,
        t_horizon: t_done,
        t1: params.t1,
        sum_dx: acc.sum_dx,
        sum_g: acc.sum_g.clone(),
        sum_abs_h: acc.sum_abs_h.clone(),
        sum_comp: acc.sum_comp,
        sum_g_norm_sq: acc.sum_g_norm_sq,
        sum_h_norm_sq: acc.sum_h_norm_sq,
        sum_grad_f_norm_sq: acc.sum_grad_f_norm_sq,
        sum_u_norm_sq: acc.sum_u_norm_sq,
        sum_u_next: acc.sum_u_next.clone(),
        final_y_norm: final_state.duals.joint_norm(),
        final_beta: final_state.beta,
        u_max_inf: acc.u_max_inf,
        max_tol: acc.max_tol,
        mean_y_norm: if t_done > 0 {
            acc.sum_y_norm / t_done as f64
        } else {
            0.0
        },
    };

    Trajectory {
        states,
        diags,
        checks,
        summary,
        seed,
    }
}

/// l1 norm of the slack block of a state (used by the trajectory writer).
pub fn u_l1(state: &IterState) -> f64 {
    l1_norm(&state.u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinearModel;
    use crate::problem::{
        ConvexFeasibleSet, DeterministicEval, ProblemConstants, SampleRecord, StochasticProgram,
    };
    use std::sync::Arc;

    /// Inert program carrying prescribed constants; oracles return zeros.
    fn constants_program(
        n: usize,
        p: usize,
        m: usize,
        nu_g: f64,
        nu_h: f64,
        kappa: f64,
        l0: f64,
        l_max: f64,
        eps0: f64,
        half_width: f64,
    ) -> StochasticProgram {
        let set = ConvexFeasibleSet::bounded_box(vec![-half_width; n], vec![half_width; n]).unwrap();
        let d0 = set.diameter();
        let sample: crate::problem::SampleOracle = Arc::new(move |_, seed| SampleRecord {
            f: 0.0,
            grad_f: vec![0.0; n],
            g: vec![0.0; p],
            jac_g: vec![vec![0.0; n]; p],
            h: vec![0.0; m],
            jac_h: vec![vec![0.0; n]; m],
            xi_id: seed,
        });
        let det: crate::problem::DeterministicOracle = Arc::new(move |_| DeterministicEval {
            f: 0.0,
            grad_f: vec![0.0; n],
            g: vec![-1.0; p],
            jac_g: vec![vec![0.0; n]; p],
            h: vec![0.0; m],
            jac_h: vec![vec![0.0; n]; m],
        });
        StochasticProgram::new(
            set,
            n,
            p,
            m,
            sample,
            det,
            ProblemConstants {
                nu_g,
                nu_h,
                kappa_f: kappa,
                kappa_g: kappa,
                kappa_h: kappa,
                l0,
                l_g: vec![l_max; p],
                l_h: vec![l_max; m],
                eps0,
                x_tilde: vec![0.0; n],
                rho_c: 1.0,
                d0,
            },
        )
        .unwrap()
    }

    #[test]
    fn schedule_power_rates_at_4096() {
        let program = constants_program(2, 1, 1, 1.0, 1.0, 1.0, 0.0, 0.0, 0.5, 0.25);
        let coeffs = ScheduleCoeffs::default();
        let params = schedule_params(4096, &coeffs, &program, program.constants.d0).unwrap();
        assert_eq!(params.sigma_g, 1.0 / 512.0);
        assert_eq!(params.sigma_h, 1.0 / 512.0);
        assert_eq!(params.tau, 64.0);
        assert_eq!(params.c, 262_144.0);
        assert_eq!(params.s, 64);
        assert_eq!(params.t1, 512);
        assert_eq!(params.theta, 0.25);
        assert!((params.beta_max - params.beta1 - 2.0 * 1.0 * consts_c_qh(&program, &params)).abs() < 1e-12);
    }

    fn consts_c_qh(program: &StochasticProgram, params: &AlgoParams) -> f64 {
        derived_constants(program, params.sigma_g, params.sigma_h, program.constants.d0)
            .unwrap()
            .c_qh
    }

    #[test]
    fn alpha0_rule_substitution() {
        // L0 = L_max = 1, p = m = 1, c_g = c_h = 1, nu_g = nu_h = 1:
        // c_gamma = sqrt(3), alpha0 = 2 + 2*sqrt(3)*sqrt(3) + 1 = 9.
        let program = constants_program(1, 1, 1, 1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.05);
        let params = schedule_params(16, &ScheduleCoeffs::default(), &program, program.constants.d0)
            .unwrap();
        assert!((params.alpha0 - 9.0).abs() < 1e-12, "alpha0 = {}", params.alpha0);
        assert_eq!(params.alpha, 9.0 * 2.0); // T^{1/4} = 2
    }

    #[test]
    fn horizon_condition_minimal_t() {
        // p = m = 1, c_g = c_h = tau0 = 1, C_G = C_H = 3 (kappa = 3, L = 0):
        // clause two gives (9 + 36)^4 = 45^4.
        let program = constants_program(1, 1, 1, 1.0, 1.0, 3.0, 0.0, 0.0, 0.5, 0.05);
        let params = schedule_params(64, &ScheduleCoeffs::default(), &program, program.constants.d0)
            .unwrap();
        assert!(!params.t_condition_ok);
        assert!((params.min_admissible_t - 45f64.powi(4)).abs() < 1e-3);
    }

    #[test]
    fn feasibility_gate_is_enforced() {
        // Large L_max and wide box break sqrt(p+2m) kappa_sigma D0^2 <= eps0.
        let program = constants_program(2, 1, 1, 1.0, 1.0, 1.0, 0.0, 2.0, 0.1, 1.0);
        let err = schedule_params(64, &ScheduleCoeffs::default(), &program, program.constants.d0);
        assert!(matches!(err, Err(Error::Configuration(_))));
    }

    #[test]
    fn dual_update_clamps_and_steps() {
        let models = QuadModelSet {
            anchor: vec![0.0],
            f_lin: LinearModel { value: 0.0, grad: vec![0.0] },
            g_lin: vec![LinearModel { value: -3.0, grad: vec![0.0] }],
            h_lin: vec![LinearModel { value: 1.0, grad: vec![0.0] }],
            curv_g: vec![0.0],
            curv_h: vec![0.0],
            curv0: 1.0,
        };
        let duals = DualState::new(vec![0.2], vec![0.0], vec![0.0]).unwrap();
        let next = dual_update(&models, &[0.0], &[0.0], &duals, 0.1, 0.1);
        // lambda' = [0.2 + 0.1*(-3)]_+ = 0, mu+' = [0 + 0.1*(1 - 0)]_+ = 0.1.
        assert_eq!(next.lambda()[0], 0.0);
        assert_eq!(next.mu_plus()[0], 0.1);
        // q_{H,+}(x) + q_{H,-}(x) = s_H |x-anchor|^2 = 0 here.
        assert_eq!(models.q_h_plus(0, &[0.5]) + models.q_h_minus(0, &[0.5]), 0.0);
    }

    #[test]
    fn penalty_update_rules() {
        assert_eq!(penalty_update(1.0, 0.1, 2.0, 2.0).unwrap(), 1.4);
        assert_eq!(penalty_update(2.0, 0.1, 2.0, 2.0).unwrap(), 2.0);
        // Cap: increment 0.4 from 1.9 stops at 2.0.
        assert_eq!(penalty_update(1.9, 0.1, 2.0, 2.0).unwrap(), 2.0);
        assert!(matches!(
            penalty_update(2.5, 0.1, 2.0, 2.0),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn phase_transition_examples() {
        let program = constants_program(2, 1, 1, 1.0, 1.0, 1.0, 0.0, 0.0, 0.5, 0.25);
        let coeffs = ScheduleCoeffs::default();
        let p4096 = schedule_params(4096, &coeffs, &program, program.constants.d0).unwrap();
        assert_eq!(phase_transition(&p4096), 512);
        let p10000 = schedule_params(10_000, &coeffs, &program, program.constants.d0).unwrap();
        assert_eq!(phase_transition(&p10000), 1000);

        let mut degenerate = p4096.clone();
        degenerate.beta_max = degenerate.beta1;
        assert_eq!(phase_transition(&degenerate), 0);
    }

    #[test]
    fn dual_state_rejects_negative_entries() {
        assert!(DualState::new(vec![-0.1], vec![], vec![]).is_err());
        assert!(DualState::new(vec![], vec![0.0], vec![0.0, 1.0]).is_err());
        let y = DualState::new(vec![3.0], vec![0.0, 4.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(y.joint_norm(), 5.0);
    }
}
