//! Solver for the strongly convex joint proximal subproblem over
//! `X0 x R_+^m`.
//!
//! The slack block is separable given `x` and each coordinate has the exact
//! scalar minimizer computed by [`crate::slack::slack_prox`]; eliminating it
//! leaves a smooth convex reduced problem in `x` alone, which an accelerated
//! projected-gradient loop with backtracking solves to a certified
//! prox-gradient residual. Finishing the slack block in closed form is what
//! makes Phase-I slack variables exact zeros rather than tolerance-sized
//! values.

use crate::driver::DualState;
use crate::error::{Error, Result};
use crate::model::QuadModelSet;
use crate::problem::ConvexFeasibleSet;
use crate::slack::slack_prox;
use crate::vecops::{dist_sq, norm, norm_sq, plus};

#[derive(Debug, Clone)]
pub struct SubproblemInstance {
    pub models: QuadModelSet,
    pub duals: DualState,
    pub prev_x: Vec<f64>,
    pub prev_u: Vec<f64>,
    pub sigma_g: f64,
    pub sigma_h: f64,
    pub alpha: f64,
    pub c: f64,
    pub beta: f64,
    pub set: ConvexFeasibleSet,
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub x_next: Vec<f64>,
    pub u_next: Vec<f64>,
    pub objective: f64,
    pub prox_grad_norm: f64,
    pub iterations: usize,
}

impl SubproblemInstance {
    pub fn new(
        models: QuadModelSet,
        duals: DualState,
        prev_x: Vec<f64>,
        prev_u: Vec<f64>,
        sigma_g: f64,
        sigma_h: f64,
        alpha: f64,
        c: f64,
        beta: f64,
        set: ConvexFeasibleSet,
    ) -> Result<Self> {
        if !(sigma_g > 0.0 && sigma_h > 0.0 && alpha > 0.0 && c > 0.0 && beta > 0.0) {
            return Err(Error::invalid_argument(
                "sigma_g, sigma_h, alpha, c, beta must all be positive",
            ));
        }
        let n = models.n();
        let m = models.m();
        if prev_x.len() != n || set.dimension() != n {
            return Err(Error::DimensionMismatch { expected: n, got: prev_x.len() });
        }
        if prev_u.len() != m || duals.mu_plus().len() != m || duals.lambda().len() != models.p() {
            return Err(Error::invalid_argument("dual or slack dimensions inconsistent"));
        }
        let inst = Self {
            models,
            duals,
            prev_x,
            prev_u,
            sigma_g,
            sigma_h,
            alpha,
            c,
            beta,
            set,
        };
        if !(inst.x_strong_convexity() > 0.0) {
            return Err(Error::invalid_argument(
                "instance is not strongly convex in the x block",
            ));
        }
        Ok(inst)
    }

    pub fn n(&self) -> usize {
        self.models.n()
    }

    pub fn p(&self) -> usize {
        self.models.p()
    }

    pub fn m(&self) -> usize {
        self.models.m()
    }

    /// Curvature left after the dual-weighted constraint curvature cancels
    /// against the compensation scalar (equals tau for driver-built models).
    pub fn residual_curvature(&self) -> f64 {
        let mut tau = self.models.curv0;
        for i in 0..self.p() {
            tau += self.duals.lambda()[i] * self.models.curv_g[i];
        }
        for j in 0..self.m() {
            tau += (self.duals.mu_plus()[j] + self.duals.mu_minus()[j]) * self.models.curv_h[j];
        }
        tau
    }

    /// Strong convexity modulus of the x block, alpha + tau.
    pub fn x_strong_convexity(&self) -> f64 {
        self.alpha + self.residual_curvature()
    }

    /// Strong convexity modulus of the u block, alpha + c.
    pub fn u_strong_convexity(&self) -> f64 {
        self.alpha + self.c
    }

    /// Dual feedback terms a_j = mu+_j + sigma_h q_{H+,j}(x) and
    /// b_j = mu-_j + sigma_h q_{H-,j}(x).
    pub fn dual_feedback(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = self.m();
        let mut a = Vec::with_capacity(m);
        let mut b = Vec::with_capacity(m);
        for j in 0..m {
            a.push(self.duals.mu_plus()[j] + self.sigma_h * self.models.q_h_plus(j, x));
            b.push(self.duals.mu_minus()[j] + self.sigma_h * self.models.q_h_minus(j, x));
        }
        (a, b)
    }

    /// Exact minimizer of the u block with x frozen.
    pub fn optimal_u(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (a, b) = self.dual_feedback(x);
        let kappa = self.u_strong_convexity();
        let mut u = Vec::with_capacity(self.m());
        for j in 0..self.m() {
            let r = slack_prox(a[j], b[j], self.beta, self.sigma_h, kappa, self.prev_u[j])?;
            u.push(r.u_star);
        }
        Ok(u)
    }

    fn objective_inner(&self, x: &[f64], u: &[f64]) -> f64 {
        let mut total = self.models.q0(x) + 0.5 * self.alpha * dist_sq(x, &self.prev_x);
        for (uj, &upj) in u.iter().zip(&self.prev_u) {
            total += self.beta * uj + 0.5 * (self.alpha + self.c) * (uj - upj) * (uj - upj);
        }
        for i in 0..self.p() {
            let bracket = plus(self.duals.lambda()[i] + self.sigma_g * self.models.q_g(i, x));
            let lam = self.duals.lambda()[i];
            total += (bracket * bracket - lam * lam) / (2.0 * self.sigma_g);
        }
        for j in 0..self.m() {
            let mp = self.duals.mu_plus()[j];
            let mm = self.duals.mu_minus()[j];
            let bp = plus(mp + self.sigma_h * (self.models.q_h_plus(j, x) - u[j]));
            let bm = plus(mm + self.sigma_h * (self.models.q_h_minus(j, x) - u[j]));
            total += (bp * bp - mp * mp) / (2.0 * self.sigma_h);
            total += (bm * bm - mm * mm) / (2.0 * self.sigma_h);
        }
        total
    }

    /// Gradient of the joint objective in x at (x, u).
    fn grad_x(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        let n = self.n();
        for k in 0..n {
            out[k] = self.models.f_lin.grad[k]
                + self.models.curv0 * (x[k] - self.models.anchor[k])
                + self.alpha * (x[k] - self.prev_x[k]);
        }
        for i in 0..self.p() {
            let w = plus(self.duals.lambda()[i] + self.sigma_g * self.models.q_g(i, x));
            if w > 0.0 {
                for k in 0..n {
                    out[k] += w
                        * (self.models.g_lin[i].grad[k]
                            + self.models.curv_g[i] * (x[k] - self.models.anchor[k]));
                }
            }
        }
        for j in 0..self.m() {
            let wp = plus(self.duals.mu_plus()[j] + self.sigma_h * (self.models.q_h_plus(j, x) - u[j]));
            if wp > 0.0 {
                for k in 0..n {
                    out[k] += wp
                        * (self.models.h_lin[j].grad[k]
                            + self.models.curv_h[j] * (x[k] - self.models.anchor[k]));
                }
            }
            let wm = plus(self.duals.mu_minus()[j] + self.sigma_h * (self.models.q_h_minus(j, x) - u[j]));
            if wm > 0.0 {
                for k in 0..n {
                    out[k] += wm
                        * (-self.models.h_lin[j].grad[k]
                            + self.models.curv_h[j] * (x[k] - self.models.anchor[k]));
                }
            }
        }
    }

    /// Partial derivative of the joint objective in u_j at (x, u).
    fn grad_u_j(&self, x: &[f64], u: &[f64], j: usize) -> f64 {
        let wp = plus(self.duals.mu_plus()[j] + self.sigma_h * (self.models.q_h_plus(j, x) - u[j]));
        let wm = plus(self.duals.mu_minus()[j] + self.sigma_h * (self.models.q_h_minus(j, x) - u[j]));
        self.beta - wp - wm + (self.alpha + self.c) * (u[j] - self.prev_u[j])
    }

    /// Curvature bound of the joint objective used for residual step sizing;
    /// initialized from the model gradients at the anchor.
    pub fn lipschitz_estimate(&self) -> f64 {
        let mut l = self.models.curv0 + self.alpha;
        for i in 0..self.p() {
            l += self.sigma_g * norm_sq(&self.models.g_lin[i].grad);
        }
        for j in 0..self.m() {
            l += 2.0 * self.sigma_h * (norm_sq(&self.models.h_lin[j].grad) + 1.0);
        }
        l
    }

    fn joint_lipschitz(&self) -> f64 {
        self.lipschitz_estimate().max(self.alpha + self.c + 2.0 * self.sigma_h)
    }

    /// Scaled fixed-point residual of the projected-gradient map at (x, u).
    pub fn joint_residual(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        let step = 1.0 / self.joint_lipschitz();
        let n = self.n();
        let mut grad = vec![0.0; n];
        self.grad_x(x, u, &mut grad);
        let moved: Vec<f64> = (0..n).map(|k| x[k] - step * grad[k]).collect();
        let projected = self.set.project(&moved)?;
        let mut acc = 0.0;
        for k in 0..n {
            let r = (x[k] - projected[k]) / step;
            acc += r * r;
        }
        for j in 0..self.m() {
            let du = self.grad_u_j(x, u, j);
            let stepped = (u[j] - step * du).max(0.0);
            let r = (u[j] - stepped) / step;
            acc += r * r;
        }
        Ok(acc.sqrt())
    }
}

/// Augmented Lagrangian value plus the proximal terms at (x, u).
pub fn objective(inst: &SubproblemInstance, x: &[f64], u: &[f64]) -> Result<f64> {
    if x.len() != inst.n() {
        return Err(Error::DimensionMismatch { expected: inst.n(), got: x.len() });
    }
    if u.len() != inst.m() {
        return Err(Error::DimensionMismatch { expected: inst.m(), got: u.len() });
    }
    if u.iter().any(|&uj| uj < 0.0) {
        return Err(Error::precondition("slack variables must be nonnegative"));
    }
    Ok(inst.objective_inner(x, u))
}

/// Solves the joint subproblem to prox-gradient residual `tol`.
///
/// Certification: with z = (x_next, u_next) and residual r <= tol, strong
/// convexity gives `||z - z*|| <= tol / min(alpha + tau, alpha + c)` up to
/// the step-size constant of the gradient map. The loop drives the residual
/// a factor below `tol` so downstream inequality checks see slack well under
/// their 10*tol budgets.
pub fn solve(inst: &SubproblemInstance, tol: f64, max_iters: usize) -> Result<SubproblemSolution> {
    if !(tol > 0.0) {
        return Err(Error::invalid_argument(format!("tol must be positive, got {tol}")));
    }
    let n = inst.n();
    let mu = inst.x_strong_convexity().min(inst.u_strong_convexity());
    let target = 0.25 * tol;

    let mut l_est = inst.lipschitz_estimate().max(mu);
    let mut x = inst.set.project(&inst.prev_x)?;
    let mut x_old = x.clone();
    let mut y = x.clone();
    let mut grad = vec![0.0; n];
    let mut best: Option<(f64, SubproblemSolution)> = None;

    for iter in 1..=max_iters {
        let u_y = inst.optimal_u(&y)?;
        let f_y = inst.objective_inner(&y, &u_y);
        inst.grad_x(&y, &u_y, &mut grad);

        // Backtracking projected-gradient step from the extrapolated point.
        let mut x_new;
        loop {
            let moved: Vec<f64> = (0..n).map(|k| y[k] - grad[k] / l_est).collect();
            x_new = inst.set.project(&moved)?;
            let u_new = inst.optimal_u(&x_new)?;
            let f_new = inst.objective_inner(&x_new, &u_new);
            let mut quad = f_y;
            for k in 0..n {
                let d = x_new[k] - y[k];
                quad += grad[k] * d + 0.5 * l_est * d * d;
            }
            if f_new <= quad + 1e-14 * (1.0 + f_y.abs()) || l_est > 1e280 {
                break;
            }
            l_est *= 2.0;
        }

        let u_new = inst.optimal_u(&x_new)?;
        let residual = inst.joint_residual(&x_new, &u_new)?;
        if best.as_ref().map(|(r, _)| residual < *r).unwrap_or(true) {
            best = Some((
                residual,
                SubproblemSolution {
                    x_next: x_new.clone(),
                    u_next: u_new.clone(),
                    objective: inst.objective_inner(&x_new, &u_new),
                    prox_grad_norm: residual,
                    iterations: iter,
                },
            ));
        }
        if residual <= target || (residual <= tol && iter == max_iters) {
            let (_, mut sol) = best.unwrap();
            sol.iterations = iter;
            return Ok(sol);
        }

        // Strongly convex momentum with gradient-based adaptive restart.
        let q = (mu / l_est).min(1.0);
        let theta = (1.0 - q.sqrt()) / (1.0 + q.sqrt());
        let mut restart = 0.0;
        for k in 0..n {
            restart += (y[k] - x_new[k]) * (x_new[k] - x[k]);
        }
        let momentum = if restart > 0.0 { 0.0 } else { theta };
        for k in 0..n {
            x_old[k] = x[k];
            x[k] = x_new[k];
            y[k] = x[k] + momentum * (x[k] - x_old[k]);
        }
    }

    let (residual, sol) = best.expect("at least one iterate was evaluated");
    if residual <= tol {
        return Ok(sol);
    }
    Err(Error::SubproblemConvergence {
        iterations: max_iters,
        residual,
        tol,
        best: Box::new(sol),
    })
}

/// Exhaustive multi-level grid minimization for tiny instances (n <= 2,
/// m <= 1). The refinement window around each level's grid argmin is sized
/// from the condition number so the continuous minimizer of the strongly
/// convex objective cannot escape it; windows hitting the search boundary are
/// re-centered without shrinking.
pub fn brute_force(inst: &SubproblemInstance, grid_step: f64) -> Result<SubproblemSolution> {
    if inst.n() > 2 || inst.m() > 1 {
        return Err(Error::UnsupportedSize(format!(
            "brute force supports n <= 2, m <= 1 (got n = {}, m = {})",
            inst.n(),
            inst.m()
        )));
    }
    if !(grid_step > 0.0) {
        return Err(Error::invalid_argument("grid_step must be positive"));
    }

    let n = inst.n();
    let m = inst.m();
    let dims = n + m;

    // Bounding box of the x search region.
    let (mut lo, mut hi) = match inst.set.kind() {
        crate::problem::SetKind::Box { lower, upper } => (lower.clone(), upper.clone()),
        crate::problem::SetKind::Ball { center, radius } => (
            center.iter().map(|c| c - radius).collect(),
            center.iter().map(|c| c + radius).collect(),
        ),
    };

    // Slack cap: the stationarity condition bounds the optimal slack by
    // u_prev + (beta + duals + 2*sigma_h*Qmax)/(alpha+c) with Qmax a bound on
    // |q_{H,+-}| over the region.
    if m == 1 {
        let d = inst.set.diameter()
            + crate::vecops::dist(&inst.set.project(&inst.models.anchor)?, &inst.models.anchor);
        let q_max = inst.models.h_lin[0].value.abs()
            + norm(&inst.models.h_lin[0].grad) * d
            + 0.5 * inst.models.curv_h[0].abs() * d * d;
        let duals = inst.duals.mu_plus()[0] + inst.duals.mu_minus()[0];
        let cap = inst.prev_u[0]
            + (inst.beta + duals + 2.0 * inst.sigma_h * q_max) / (inst.alpha + inst.c)
            + 1.0;
        lo.push(0.0);
        hi.push(cap);
    }

    let kappa_est = (inst.joint_lipschitz()
        / inst.x_strong_convexity().min(inst.u_strong_convexity()))
    .max(1.0);
    let halfwin = (kappa_est.sqrt() * (dims as f64).sqrt() / 2.0).ceil() as usize + 2;
    let points = (4 * halfwin + 1).max(33);

    let eval = |z: &[f64]| -> Result<(Vec<f64>, f64, f64)> {
        let x = inst.set.project(&z[..n])?;
        let u = &z[n..];
        Ok((x.clone(), inst.objective_inner(&x, u), 0.0))
    };

    let mut evals = 0usize;
    let mut best_z = vec![0.0; dims];
    let mut best_val = f64::INFINITY;
    for level in 0..400 {
        let steps: Vec<f64> = (0..dims).map(|d| (hi[d] - lo[d]) / (points - 1) as f64).collect();
        let mut idx = vec![0usize; dims];
        let mut level_best = f64::INFINITY;
        let mut level_best_idx = vec![0usize; dims];
        loop {
            let z: Vec<f64> = (0..dims).map(|d| lo[d] + idx[d] as f64 * steps[d]).collect();
            let (_, val, _) = eval(&z)?;
            evals += 1;
            if val < level_best {
                level_best = val;
                level_best_idx = idx.clone();
            }
            // odometer increment
            let mut d = 0;
            loop {
                if d == dims {
                    break;
                }
                idx[d] += 1;
                if idx[d] < points {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == dims {
                break;
            }
        }
        let z_best: Vec<f64> = (0..dims)
            .map(|d| lo[d] + level_best_idx[d] as f64 * steps[d])
            .collect();
        if level_best < best_val {
            best_val = level_best;
            best_z = z_best.clone();
        }
        let max_step = steps.iter().fold(0.0f64, |a, &s| a.max(s));
        let on_edge = (0..dims)
            .any(|d| level_best_idx[d] == 0 || level_best_idx[d] == points - 1);
        if max_step <= grid_step && !on_edge {
            break;
        }
        // Shrink (or re-center, if pinned to an edge) around the argmin.
        for d in 0..dims {
            let half = halfwin as f64 * steps[d];
            let center = z_best[d];
            let width = if on_edge { 2.0 * half * 2.0 } else { 2.0 * half };
            lo[d] = center - 0.5 * width;
            hi[d] = center + 0.5 * width;
            if d >= n {
                lo[d] = lo[d].max(0.0);
                hi[d] = hi[d].max(lo[d] + grid_step);
            }
        }
        if level == 399 {
            return Err(Error::InnerSolveConvergence { iterations: evals, residual: max_step });
        }
    }

    let x = inst.set.project(&best_z[..n])?;
    let u = best_z[n..].to_vec();
    let residual = inst.joint_residual(&x, &u)?;
    Ok(SubproblemSolution {
        objective: inst.objective_inner(&x, &u),
        x_next: x,
        u_next: u,
        prox_grad_norm: residual,
        iterations: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::DualState;
    use crate::model::{LinearModel, QuadModelSet};
    use crate::problem::ConvexFeasibleSet;
    use crate::rng::{keyed_rng, tag, uniform_sym};
    use rand::Rng;

    fn interval(lo: f64, hi: f64) -> ConvexFeasibleSet {
        ConvexFeasibleSet::bounded_box(vec![lo], vec![hi]).unwrap()
    }

    fn plain_instance_1d(grad_f: f64, alpha: f64, s0: f64) -> SubproblemInstance {
        // No constraints; q0 = grad_f * x + s0/2 x^2 anchored at 0.
        let models = QuadModelSet {
            anchor: vec![0.0],
            f_lin: LinearModel { value: 0.0, grad: vec![grad_f] },
            g_lin: vec![],
            h_lin: vec![],
            curv_g: vec![],
            curv_h: vec![],
            curv0: s0,
        };
        SubproblemInstance::new(
            models,
            DualState::zeros(0, 0),
            vec![0.0],
            vec![],
            1.0,
            1.0,
            alpha,
            1.0,
            1.0,
            interval(-10.0, 10.0),
        )
        .unwrap()
    }

    #[test]
    fn unconstrained_prox_step_closed_form() {
        // grad F = 1, alpha = 1, s0 = 1, x^t = 0 -> x_next = -1/2.
        let inst = plain_instance_1d(1.0, 1.0, 1.0);
        let sol = solve(&inst, 1e-10, 10_000).unwrap();
        assert!((sol.x_next[0] + 0.5).abs() < 1e-8, "x = {}", sol.x_next[0]);
        assert!(sol.u_next.is_empty());
        assert!(sol.prox_grad_norm <= 1e-10);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let inst = plain_instance_1d(0.0, 1.0, 1.0);
        let sol = solve(&inst, 1e-12, 10_000).unwrap();
        assert!(sol.x_next[0].abs() < 1e-12);
    }

    fn random_tiny_instance(rng: &mut rand_chacha::ChaCha8Rng, with_u: bool) -> SubproblemInstance {
        let n = 1 + (rng.gen::<u64>() % 2) as usize;
        let m = usize::from(with_u);
        let p = (rng.gen::<u64>() % 2) as usize;
        let anchor: Vec<f64> = (0..n).map(|_| 0.5 * uniform_sym(rng)).collect();
        let l_g: Vec<f64> = (0..p).map(|_| rng.gen::<f64>()).collect();
        let l_h: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
        let lambda: Vec<f64> = (0..p).map(|_| rng.gen::<f64>()).collect();
        let mu_plus: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
        let mu_minus: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
        let duals = DualState::new(lambda.clone(), mu_plus, mu_minus).unwrap();
        let tau = 0.5 + rng.gen::<f64>();
        let mut curv0 = tau;
        for i in 0..p {
            curv0 += lambda[i] * l_g[i];
        }
        for j in 0..m {
            curv0 += (duals.mu_plus()[j] + duals.mu_minus()[j]) * l_h[j];
        }
        let models = QuadModelSet {
            anchor: anchor.clone(),
            f_lin: LinearModel {
                value: uniform_sym(rng),
                grad: (0..n).map(|_| 2.0 * uniform_sym(rng)).collect(),
            },
            g_lin: (0..p)
                .map(|_| LinearModel {
                    value: uniform_sym(rng),
                    grad: (0..n).map(|_| uniform_sym(rng)).collect(),
                })
                .collect(),
            h_lin: (0..m)
                .map(|_| LinearModel {
                    value: uniform_sym(rng),
                    grad: (0..n).map(|_| uniform_sym(rng)).collect(),
                })
                .collect(),
            curv_g: l_g.iter().map(|l| -l).collect(),
            curv_h: l_h.iter().map(|l| -l).collect(),
            curv0,
        };
        let set = if n == 1 {
            interval(-1.5, 1.5)
        } else {
            ConvexFeasibleSet::bounded_box(vec![-1.5, -1.5], vec![1.5, 1.5]).unwrap()
        };
        SubproblemInstance::new(
            models,
            duals,
            (0..n).map(|_| 0.5 * uniform_sym(rng)).collect(),
            (0..m).map(|_| 0.5 * rng.gen::<f64>()).collect(),
            0.2 + rng.gen::<f64>(),
            0.2 + rng.gen::<f64>(),
            0.5 + 2.0 * rng.gen::<f64>(),
            0.5 + 4.0 * rng.gen::<f64>(),
            0.2 + rng.gen::<f64>(),
            set,
        )
        .unwrap()
    }

    /// Independent transcription of the augmented Lagrangian, written
    /// directly from the penalty-difference formula.
    fn objective_oracle(inst: &SubproblemInstance, x: &[f64], u: &[f64]) -> f64 {
        let q_at = |lin: &LinearModel, curv: f64, sign: f64| -> f64 {
            let mut lin_val = sign * lin.value;
            for k in 0..x.len() {
                lin_val += sign * lin.grad[k] * (x[k] - inst.models.anchor[k]);
            }
            let mut sq = 0.0;
            for k in 0..x.len() {
                let d = x[k] - inst.models.anchor[k];
                sq += d * d;
            }
            lin_val + 0.5 * curv * sq
        };
        let mut val = q_at(&inst.models.f_lin, inst.models.curv0, 1.0);
        for (j, uj) in u.iter().enumerate() {
            val += inst.beta * uj;
            let ap = inst.duals.mu_plus()[j]
                + inst.sigma_h * (q_at(&inst.models.h_lin[j], inst.models.curv_h[j], 1.0) - uj);
            let am = inst.duals.mu_minus()[j]
                + inst.sigma_h * (q_at(&inst.models.h_lin[j], inst.models.curv_h[j], -1.0) - uj);
            val += (ap.max(0.0).powi(2) - inst.duals.mu_plus()[j].powi(2)) / (2.0 * inst.sigma_h);
            val += (am.max(0.0).powi(2) - inst.duals.mu_minus()[j].powi(2)) / (2.0 * inst.sigma_h);
        }
        for i in 0..inst.p() {
            let a = inst.duals.lambda()[i]
                + inst.sigma_g * q_at(&inst.models.g_lin[i], inst.models.curv_g[i], 1.0);
            val += (a.max(0.0).powi(2) - inst.duals.lambda()[i].powi(2)) / (2.0 * inst.sigma_g);
        }
        let mut px = 0.0;
        for k in 0..x.len() {
            px += (x[k] - inst.prev_x[k]).powi(2);
        }
        let mut pu = 0.0;
        for (uj, upj) in u.iter().zip(&inst.prev_u) {
            pu += (uj - upj).powi(2);
        }
        val + 0.5 * inst.alpha * px + 0.5 * (inst.alpha + inst.c) * pu
    }

    #[test]
    fn objective_trivial_cases() {
        // All duals zero, x = x^t, u = u^t, every bracket clamped: value = F.
        let inst = plain_instance_1d(1.0, 1.0, 1.0);
        let val = objective(&inst, &[0.0], &[]).unwrap();
        assert_eq!(val, 0.0); // F(x^t, xi_t) was set to 0 in the fixture

        // m=0, p=1, lambda=1, sigma_g=1, q_G(x) = -2: penalty = ([1-2]_+^2 - 1)/2.
        let models = QuadModelSet {
            anchor: vec![0.0],
            f_lin: LinearModel { value: 0.0, grad: vec![0.0] },
            g_lin: vec![LinearModel { value: -2.0, grad: vec![0.0] }],
            h_lin: vec![],
            curv_g: vec![0.0],
            curv_h: vec![],
            curv0: 1.0,
        };
        let inst = SubproblemInstance::new(
            models,
            DualState::new(vec![1.0], vec![], vec![]).unwrap(),
            vec![0.0],
            vec![],
            1.0,
            1.0,
            1.0,
            1.0,
            1.0,
            interval(-10.0, 10.0),
        )
        .unwrap();
        let val = objective(&inst, &[0.0], &[]).unwrap();
        assert_eq!(val, -0.5);
    }

    #[test]
    fn objective_matches_independent_transcription() {
        let mut rng = keyed_rng(41, 0, tag::TEST);
        for _ in 0..200 {
            let inst = random_tiny_instance(&mut rng, true);
            let x: Vec<f64> = (0..inst.n()).map(|_| 1.4 * uniform_sym(&mut rng)).collect();
            let u: Vec<f64> = (0..inst.m()).map(|_| rng.gen::<f64>()).collect();
            let ours = objective(&inst, &x, &u).unwrap();
            let oracle = objective_oracle(&inst, &x, &u);
            assert!(
                (ours - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()),
                "{ours} vs {oracle}"
            );
        }
    }

    #[test]
    fn objective_rejects_negative_slack() {
        let mut rng = keyed_rng(43, 0, tag::TEST);
        let inst = random_tiny_instance(&mut rng, true);
        let x = vec![0.0; inst.n()];
        assert!(objective(&inst, &x, &[-0.1]).is_err());
    }

    #[test]
    fn objective_is_convex_along_segments() {
        let mut rng = keyed_rng(47, 0, tag::TEST);
        for _ in 0..100 {
            let inst = random_tiny_instance(&mut rng, true);
            let za: Vec<f64> = (0..inst.n()).map(|_| 1.4 * uniform_sym(&mut rng)).collect();
            let zb: Vec<f64> = (0..inst.n()).map(|_| 1.4 * uniform_sym(&mut rng)).collect();
            let ua: Vec<f64> = (0..inst.m()).map(|_| 2.0 * rng.gen::<f64>()).collect();
            let ub: Vec<f64> = (0..inst.m()).map(|_| 2.0 * rng.gen::<f64>()).collect();
            let at = |t: f64| -> f64 {
                let x: Vec<f64> = za.iter().zip(&zb).map(|(a, b)| a + t * (b - a)).collect();
                let u: Vec<f64> = ua.iter().zip(&ub).map(|(a, b)| a + t * (b - a)).collect();
                inst.objective_inner(&x, &u)
            };
            // Second differences along the segment must be nonnegative.
            let h = 0.1;
            for k in 1..9 {
                let t = k as f64 * h;
                let second = at(t + h) - 2.0 * at(t) + at(t - h);
                assert!(second >= -1e-9, "nonconvex segment: {second}");
            }
        }
    }

    #[test]
    fn solve_matches_brute_force_on_tiny_instances() {
        let mut rng = keyed_rng(53, 0, tag::TEST);
        for trial in 0..25 {
            let inst = random_tiny_instance(&mut rng, trial % 2 == 0);
            let sol = solve(&inst, 1e-9, 20_000).unwrap();
            let bf = brute_force(&inst, 1e-4).unwrap();
            assert!(
                sol.objective <= bf.objective + 1e-6,
                "solver worse than grid: {} vs {}",
                sol.objective,
                bf.objective
            );
            let mut d2 = 0.0;
            for k in 0..inst.n() {
                d2 += (sol.x_next[k] - bf.x_next[k]).powi(2);
            }
            for j in 0..inst.m() {
                d2 += (sol.u_next[j] - bf.u_next[j]).powi(2);
            }
            assert!(d2.sqrt() <= 5e-4, "argmin distance {}", d2.sqrt());
        }
    }

    #[test]
    fn brute_force_finds_parabola_vertex() {
        // Convex 1-D parabola with vertex at 0.3.
        let inst = plain_instance_1d(-0.6, 1.0, 1.0);
        // objective = -0.6x + 0.5 x^2 + 0.5 x^2 -> vertex at 0.3
        let bf = brute_force(&inst, 1e-4).unwrap();
        assert!((bf.x_next[0] - 0.3).abs() <= 1e-4, "x = {}", bf.x_next[0]);
        // Grid refinement: a 10x smaller step shrinks the drift.
        let bf_fine = brute_force(&inst, 1e-5).unwrap();
        assert!((bf_fine.x_next[0] - 0.3).abs() <= (bf.x_next[0] - 0.3).abs() + 1e-12);
    }

    #[test]
    fn brute_force_rejects_large_instances() {
        let models = QuadModelSet {
            anchor: vec![0.0; 3],
            f_lin: LinearModel { value: 0.0, grad: vec![0.0; 3] },
            g_lin: vec![],
            h_lin: vec![],
            curv_g: vec![],
            curv_h: vec![],
            curv0: 1.0,
        };
        let inst = SubproblemInstance::new(
            models,
            DualState::zeros(0, 0),
            vec![0.0; 3],
            vec![],
            1.0,
            1.0,
            1.0,
            1.0,
            1.0,
            ConvexFeasibleSet::bounded_box(vec![-1.0; 3], vec![1.0; 3]).unwrap(),
        )
        .unwrap();
        assert!(matches!(brute_force(&inst, 1e-3), Err(Error::UnsupportedSize(_))));
    }

    #[test]
    fn solution_u_block_matches_scalar_prox() {
        let mut rng = keyed_rng(59, 0, tag::TEST);
        for _ in 0..20 {
            let inst = random_tiny_instance(&mut rng, true);
            let sol = solve(&inst, 1e-10, 20_000).unwrap();
            let (a, b) = inst.dual_feedback(&sol.x_next);
            for j in 0..inst.m() {
                let r = slack_prox(
                    a[j],
                    b[j],
                    inst.beta,
                    inst.sigma_h,
                    inst.alpha + inst.c,
                    inst.prev_u[j],
                )
                .unwrap();
                assert!(
                    (sol.u_next[j] - r.u_star).abs() <= 1e-10,
                    "u block inconsistent: {} vs {}",
                    sol.u_next[j],
                    r.u_star
                );
            }
        }
    }

    #[test]
    fn max_iters_failure_carries_best_iterate() {
        let inst = plain_instance_1d(1.0, 1.0, 1.0);
        match solve(&inst, 1e-14, 1) {
            Err(Error::SubproblemConvergence { best, residual, .. }) => {
                assert!(best.x_next[0].is_finite());
                assert!(residual > 1e-14);
            }
            Ok(sol) => {
                // A single step may already be exact for this instance; the
                // contract only requires the residual certificate.
                assert!(sol.prox_grad_norm <= 1e-14);
            }
            Err(other) => panic!("unexpected error {other:?}"),
        }
    }
}
