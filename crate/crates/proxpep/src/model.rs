//! Per-iteration quadratic approximations with scaled-identity curvature,
//! the curvature compensation scalar for the objective block, and the
//! derived analysis constants.

use crate::driver::DualState;
use crate::error::{Error, Result};
use crate::problem::{SampleRecord, StochasticProgram};
use crate::vecops::dist_sq;

/// Linearization `value + <grad, x - anchor>` of one sampled function.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl LinearModel {
    pub fn eval(&self, x: &[f64], anchor: &[f64]) -> f64 {
        let mut acc = self.value;
        for i in 0..x.len() {
            acc += self.grad[i] * (x[i] - anchor[i]);
        }
        acc
    }
}

/// One iteration's models anchored at the current primal point.
///
/// Curvature matrices are the scaled identities `s * I`; `curv_g`/`curv_h`
/// hold the scalars (always `-L_i` resp. `-L_tilde_j` here), and `curv0` is
/// the compensated objective curvature
/// `tau - sum_i lambda_i s_Gi - sum_j (mu+ + mu-)_j s_Hj >= tau`.
#[derive(Debug, Clone)]
pub struct QuadModelSet {
    pub anchor: Vec<f64>,
    pub f_lin: LinearModel,
    pub g_lin: Vec<LinearModel>,
    pub h_lin: Vec<LinearModel>,
    pub curv_g: Vec<f64>,
    pub curv_h: Vec<f64>,
    pub curv0: f64,
}

/// Values of all models at one point.
#[derive(Debug, Clone)]
pub struct ModelValues {
    pub q0: f64,
    pub q_g: Vec<f64>,
    pub q_h_plus: Vec<f64>,
    pub q_h_minus: Vec<f64>,
}

impl QuadModelSet {
    pub fn n(&self) -> usize {
        self.anchor.len()
    }

    pub fn p(&self) -> usize {
        self.g_lin.len()
    }

    pub fn m(&self) -> usize {
        self.h_lin.len()
    }

    pub fn q0(&self, x: &[f64]) -> f64 {
        self.f_lin.eval(x, &self.anchor) + 0.5 * self.curv0 * dist_sq(x, &self.anchor)
    }

    pub fn q_g(&self, i: usize, x: &[f64]) -> f64 {
        self.g_lin[i].eval(x, &self.anchor) + 0.5 * self.curv_g[i] * dist_sq(x, &self.anchor)
    }

    pub fn q_h_plus(&self, j: usize, x: &[f64]) -> f64 {
        self.h_lin[j].eval(x, &self.anchor) + 0.5 * self.curv_h[j] * dist_sq(x, &self.anchor)
    }

    pub fn q_h_minus(&self, j: usize, x: &[f64]) -> f64 {
        -self.h_lin[j].eval(x, &self.anchor) + 0.5 * self.curv_h[j] * dist_sq(x, &self.anchor)
    }

    pub fn grad_q0(&self, x: &[f64], out: &mut [f64]) {
        for k in 0..x.len() {
            out[k] = self.f_lin.grad[k] + self.curv0 * (x[k] - self.anchor[k]);
        }
    }

    pub fn grad_q_g(&self, i: usize, x: &[f64], out: &mut [f64]) {
        for k in 0..x.len() {
            out[k] = self.g_lin[i].grad[k] + self.curv_g[i] * (x[k] - self.anchor[k]);
        }
    }

    pub fn grad_q_h_plus(&self, j: usize, x: &[f64], out: &mut [f64]) {
        for k in 0..x.len() {
            out[k] = self.h_lin[j].grad[k] + self.curv_h[j] * (x[k] - self.anchor[k]);
        }
    }

    pub fn grad_q_h_minus(&self, j: usize, x: &[f64], out: &mut [f64]) {
        for k in 0..x.len() {
            out[k] = -self.h_lin[j].grad[k] + self.curv_h[j] * (x[k] - self.anchor[k]);
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<ModelValues> {
        eval_models(self, x)
    }
}

/// Builds the iteration models from one sample: linearizations at the anchor,
/// constraint curvature pinned to `-L * I`, and the compensated objective
/// curvature scalar.
pub fn build_models(
    record: &SampleRecord,
    anchor: &[f64],
    moduli_g: &[f64],
    moduli_h: &[f64],
    duals: &DualState,
    tau: f64,
) -> Result<QuadModelSet> {
    if !(tau > 0.0) {
        return Err(Error::invalid_argument(format!("tau must be > 0, got {tau}")));
    }
    let n = anchor.len();
    let p = moduli_g.len();
    let m = moduli_h.len();
    record.check_dims(n, p, m)?;
    if duals.lambda().len() != p || duals.mu_plus().len() != m {
        return Err(Error::invalid_argument("dual dimensions inconsistent with moduli"));
    }

    let curv_g: Vec<f64> = moduli_g.iter().map(|l| -l).collect();
    let curv_h: Vec<f64> = moduli_h.iter().map(|l| -l).collect();

    let mut curv0 = tau;
    for i in 0..p {
        curv0 -= duals.lambda()[i] * curv_g[i];
    }
    for j in 0..m {
        curv0 -= (duals.mu_plus()[j] + duals.mu_minus()[j]) * curv_h[j];
    }

    Ok(QuadModelSet {
        anchor: anchor.to_vec(),
        f_lin: LinearModel {
            value: record.f,
            grad: record.grad_f.clone(),
        },
        g_lin: record
            .g
            .iter()
            .zip(&record.jac_g)
            .map(|(&v, row)| LinearModel {
                value: v,
                grad: row.clone(),
            })
            .collect(),
        h_lin: record
            .h
            .iter()
            .zip(&record.jac_h)
            .map(|(&v, row)| LinearModel {
                value: v,
                grad: row.clone(),
            })
            .collect(),
        curv_g,
        curv_h,
        curv0,
    })
}

/// Evaluates all models at `x`.
pub fn eval_models(models: &QuadModelSet, x: &[f64]) -> Result<ModelValues> {
    if x.len() != models.n() {
        return Err(Error::DimensionMismatch {
            expected: models.n(),
            got: x.len(),
        });
    }
    Ok(ModelValues {
        q0: models.q0(x),
        q_g: (0..models.p()).map(|i| models.q_g(i, x)).collect(),
        q_h_plus: (0..models.m()).map(|j| models.q_h_plus(j, x)).collect(),
        q_h_minus: (0..models.m()).map(|j| models.q_h_minus(j, x)).collect(),
    })
}

/// Analysis constants derived from the program constants and dual step sizes.
#[derive(Debug, Clone, Copy)]
pub struct DerivedConstants {
    /// Uniform bound on the equality models over the feasible set.
    pub c_qh: f64,
    /// Per-constraint model-gradient deviation bounds.
    pub c_g: f64,
    pub c_h: f64,
    /// Uniform bound on the constraint curvature scalars.
    pub kappa_sigma: f64,
    pub l_max: f64,
    pub nu_max: f64,
    pub kappa_gh: f64,
    /// Single-step dual growth bound sqrt(sigma_g^2 nu_g^2 + 2 sigma_h^2 nu_h^2).
    pub gamma_sigma: f64,
    pub gamma2_g: f64,
    pub gamma2_h: f64,
    pub gamma_delta: f64,
    /// Envelope bound on the slack variables used inside gamma2_h.
    pub u_max_bound: f64,
}

/// Evaluates every derived constant from its defining formula. The slack
/// envelope inside `gamma2_h` uses the analytical bound `4 C_qH`; the
/// observed supremum is reported separately by the metrics layer.
pub fn derived_constants(
    program: &StochasticProgram,
    sigma_g: f64,
    sigma_h: f64,
    d0: f64,
) -> Result<DerivedConstants> {
    if !(sigma_g > 0.0) || !(sigma_h > 0.0) {
        return Err(Error::invalid_argument(format!(
            "dual step sizes must be positive, got sigma_g = {sigma_g}, sigma_h = {sigma_h}"
        )));
    }
    let c = &program.constants;
    let l_max = c
        .l_g
        .iter()
        .chain(c.l_h.iter())
        .fold(0.0f64, |acc, &l| acc.max(l));
    let kappa_sigma = l_max;
    let c_qh = c.nu_h + c.kappa_h * d0 + 0.5 * kappa_sigma * d0 * d0;
    let c_g = c.kappa_g + 0.5 * kappa_sigma * d0;
    let c_h = c.kappa_h + 0.5 * kappa_sigma * d0;
    let gamma_sigma = (sigma_g * sigma_g * c.nu_g * c.nu_g
        + 2.0 * sigma_h * sigma_h * c.nu_h * c.nu_h)
        .sqrt();
    let nu_max = c.nu_g.max(c.nu_h);
    let p2m = (program.p + 2 * program.m) as f64;
    let kappa_gh = p2m.sqrt() * c.kappa_g.max(c.kappa_h);
    let u_max_bound = 4.0 * c_qh;
    let gamma2_g = c.nu_g + c.kappa_g * d0 + 0.5 * kappa_sigma * d0 * d0;
    let gamma2_h = c.nu_h + c.kappa_h * d0 + 0.5 * kappa_sigma * d0 * d0 + u_max_bound;
    let gamma_delta = program.p as f64 * sigma_g * gamma2_g * (c.kappa_g + kappa_sigma * d0)
        + 2.0 * program.m as f64 * sigma_h * gamma2_h * (c.kappa_h + kappa_sigma * d0);

    Ok(DerivedConstants {
        c_qh,
        c_g,
        c_h,
        kappa_sigma,
        l_max,
        nu_max,
        kappa_gh,
        gamma_sigma,
        gamma2_g,
        gamma2_h,
        gamma_delta,
        u_max_bound,
    })
}
