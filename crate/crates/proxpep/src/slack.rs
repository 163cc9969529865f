//! Closed-form solver for the scalar slack minimization
//!
//! ```text
//! min_{u >= 0}  beta*u + [a - sigma*u]_+^2 / (2 sigma)
//!             + [b - sigma*u]_+^2 / (2 sigma) + kappa*(u - v)^2 / 2
//! ```
//!
//! The objective is strongly convex and C^1; its derivative is piecewise
//! linear with breakpoints at `a/sigma` and `b/sigma`. The minimizer is found
//! by solving the stationarity equation on each linear piece, clamping the
//! candidate into its piece, and taking the candidate with the least
//! objective value. Ties at breakpoints are resolved by that objective
//! comparison rather than by assuming generic position.

use crate::error::{Error, Result};
use crate::vecops::plus;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveRegion {
    /// Both hinge terms positive at the minimizer.
    BothReluActive,
    /// Exactly one hinge term positive at the minimizer.
    OneActive,
    /// Both hinge terms clamped to zero at the minimizer.
    NoneActive,
    /// Minimizer pinned at the boundary u = 0.
    Boundary,
}

#[derive(Debug, Clone, Copy)]
pub struct SlackProxResult {
    /// Unique minimizer over u >= 0.
    pub u_star: f64,
    /// Descent amount v - u_star.
    pub descent: f64,
    pub active_region: ActiveRegion,
}

#[derive(Debug, Clone, Copy)]
pub struct ShrinkageBounds {
    /// Lower bound on the descent; only defined under |a| + |b| <= beta.
    pub lower: Option<f64>,
    /// Upper bound on the descent, min(v, beta/kappa).
    pub upper: f64,
    /// Upper bound on u_star itself: v + delta/kappa with
    /// delta = max(0, |a| + |b| - beta). Follows from the stationarity
    /// condition and monotonicity of the hinge; in particular u_star <= v
    /// whenever |a| + |b| <= beta.
    pub refined_upper: f64,
}

fn check_params(beta: f64, sigma: f64, kappa: f64, v: f64) -> Result<()> {
    if !(beta > 0.0) || !(sigma > 0.0) || !(kappa > 0.0) {
        return Err(Error::invalid_argument(format!(
            "slack prox requires beta, sigma, kappa > 0 (got {beta}, {sigma}, {kappa})"
        )));
    }
    if !(v >= 0.0) {
        return Err(Error::invalid_argument(format!(
            "slack prox requires v >= 0 (got {v})"
        )));
    }
    Ok(())
}

/// Objective value at `u` (exposed so test oracles can evaluate it directly).
pub fn slack_objective(a: f64, b: f64, beta: f64, sigma: f64, kappa: f64, v: f64, u: f64) -> f64 {
    let ra = plus(a - sigma * u);
    let rb = plus(b - sigma * u);
    beta * u + ra * ra / (2.0 * sigma) + rb * rb / (2.0 * sigma) + kappa * (u - v) * (u - v) / 2.0
}

/// One-sided derivative of the objective at `u` ([x]_+ at 0 contributes 0).
pub fn slack_derivative(a: f64, b: f64, beta: f64, sigma: f64, kappa: f64, v: f64, u: f64) -> f64 {
    beta - plus(a - sigma * u) - plus(b - sigma * u) + kappa * (u - v)
}

/// Exact minimizer of the scalar slack problem.
pub fn slack_prox(
    a: f64,
    b: f64,
    beta: f64,
    sigma: f64,
    kappa: f64,
    v: f64,
) -> Result<SlackProxResult> {
    check_params(beta, sigma, kappa, v)?;

    // Boundary test first: derivative >= 0 at u = 0 pins the minimizer at
    // exactly 0 (strong convexity), which keeps Phase-I slack variables
    // bit-exact zeros.
    if slack_derivative(a, b, beta, sigma, kappa, v, 0.0) >= 0.0 {
        return Ok(SlackProxResult {
            u_star: 0.0,
            descent: v,
            active_region: ActiveRegion::Boundary,
        });
    }

    let lo_bp = a.min(b) / sigma;
    let hi_bp = a.max(b) / sigma;

    // Stationary point of each linear piece of the derivative, clamped into
    // the piece intersected with [0, inf).
    let mut candidates: [f64; 3] = [f64::NAN; 3];
    let mut count = 0;

    // Piece 1: u <= lo_bp, both hinges active.
    if lo_bp > 0.0 {
        let root = (kappa * v + a + b - beta) / (kappa + 2.0 * sigma);
        candidates[count] = root.clamp(0.0, lo_bp);
        count += 1;
    }
    // Piece 2: lo_bp <= u <= hi_bp, only the larger-threshold hinge active.
    if hi_bp > 0.0 {
        let m = a.max(b);
        let root = (kappa * v + m - beta) / (kappa + sigma);
        candidates[count] = root.clamp(lo_bp.max(0.0), hi_bp);
        count += 1;
    }
    // Piece 3: u >= hi_bp, no hinge active.
    {
        let root = v - beta / kappa;
        candidates[count] = root.max(hi_bp.max(0.0));
        count += 1;
    }

    let mut u_star = 0.0;
    let mut best = slack_objective(a, b, beta, sigma, kappa, v, 0.0);
    for &u in &candidates[..count] {
        let val = slack_objective(a, b, beta, sigma, kappa, v, u);
        if val < best {
            best = val;
            u_star = u;
        }
    }

    let region = if u_star == 0.0 {
        ActiveRegion::Boundary
    } else {
        let ra = a - sigma * u_star > 0.0;
        let rb = b - sigma * u_star > 0.0;
        match (ra, rb) {
            (true, true) => ActiveRegion::BothReluActive,
            (false, false) => ActiveRegion::NoneActive,
            _ => ActiveRegion::OneActive,
        }
    };

    Ok(SlackProxResult {
        u_star,
        descent: v - u_star,
        active_region: region,
    })
}

/// Descent bounds and the refined upper bound on the minimizer.
pub fn shrinkage_bounds(
    a: f64,
    b: f64,
    beta: f64,
    sigma: f64,
    kappa: f64,
    v: f64,
) -> Result<ShrinkageBounds> {
    check_params(beta, sigma, kappa, v)?;
    let abs_sum = a.abs() + b.abs();
    let lower = if abs_sum <= beta {
        Some(v.min((beta - abs_sum) / kappa))
    } else {
        None
    };
    let upper = v.min(beta / kappa);
    let delta = plus(abs_sum - beta);
    let refined_upper = v + delta / kappa;
    Ok(ShrinkageBounds {
        lower,
        upper,
        refined_upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{keyed_rng, tag, uniform_sym};
    use rand::Rng;

    /// Grid-search oracle: coarse scan of the provably bracketing range
    /// [0, v + beta/kappa + (|a|+|b|)/sigma + 1], then golden-section
    /// refinement of the bracketing cell. Uses objective values only.
    pub(crate) fn grid_oracle(a: f64, b: f64, beta: f64, sigma: f64, kappa: f64, v: f64) -> f64 {
        let hi = v + beta / kappa + (a.abs() + b.abs()) / sigma + 1.0;
        let steps = 2048usize;
        let hstep = hi / steps as f64;
        let mut best_k = 0usize;
        let mut best = f64::INFINITY;
        for k in 0..=steps {
            let u = k as f64 * hstep;
            let val = slack_objective(a, b, beta, sigma, kappa, v, u);
            if val < best {
                best = val;
                best_k = k;
            }
        }
        let mut lo = (best_k.saturating_sub(1)) as f64 * hstep;
        let mut up = ((best_k + 1).min(steps)) as f64 * hstep;
        // Golden-section search; convexity makes the bracket valid.
        let inv_phi = 0.618_033_988_749_894_9;
        let mut x1 = up - inv_phi * (up - lo);
        let mut x2 = lo + inv_phi * (up - lo);
        let mut f1 = slack_objective(a, b, beta, sigma, kappa, v, x1);
        let mut f2 = slack_objective(a, b, beta, sigma, kappa, v, x2);
        while up - lo > 1e-12 {
            if f1 <= f2 {
                up = x2;
                x2 = x1;
                f2 = f1;
                x1 = up - inv_phi * (up - lo);
                f1 = slack_objective(a, b, beta, sigma, kappa, v, x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + inv_phi * (up - lo);
                f2 = slack_objective(a, b, beta, sigma, kappa, v, x2);
            }
        }
        let mid = 0.5 * (lo + up);
        if mid < 1e-12 {
            // Distinguish exact boundary solutions from tiny interior ones.
            if slack_objective(a, b, beta, sigma, kappa, v, 0.0) <= best {
                return 0.0;
            }
        }
        mid
    }

    pub(crate) fn random_tuple(rng: &mut rand_chacha::ChaCha8Rng) -> (f64, f64, f64, f64, f64, f64) {
        let a = 4.0 * uniform_sym(rng);
        let b = 4.0 * uniform_sym(rng);
        let beta = 0.05 + 4.0 * rng.gen::<f64>();
        let sigma = 0.05 + 3.0 * rng.gen::<f64>();
        let kappa = 0.05 + 5.0 * rng.gen::<f64>();
        let v = 3.0 * rng.gen::<f64>();
        (a, b, beta, sigma, kappa, v)
    }

    #[test]
    fn relu_inactive_reduces_to_shifted_prox() {
        // a,b < 0 keeps both hinges off for u >= 0: u* = max(0, v - beta/kappa).
        let r = slack_prox(-1.0, -2.0, 2.0, 1.0, 4.0, 1.0).unwrap();
        assert_eq!(r.u_star, 0.5);
        assert_eq!(r.descent, 0.5);
        assert_eq!(r.active_region, ActiveRegion::NoneActive);
    }

    #[test]
    fn boundary_case_returns_exact_zero() {
        // psi'(0) = beta - [a]_+ - [b]_+ - kappa*v = 1 - 0.8 >= 0.
        let r = slack_prox(0.5, 0.3, 1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(r.u_star, 0.0);
        assert_eq!(r.active_region, ActiveRegion::Boundary);
    }

    #[test]
    fn one_active_region_matches_grid_oracle() {
        let r = slack_prox(2.0, 1.0, 1.0, 1.0, 1.0, 2.0).unwrap();
        assert!((r.u_star - 1.5).abs() < 1e-12);
        let oracle = grid_oracle(2.0, 1.0, 1.0, 1.0, 1.0, 2.0);
        assert!((r.u_star - oracle).abs() < 1e-6);
        assert_eq!(r.active_region, ActiveRegion::OneActive);
    }

    #[test]
    fn kkt_condition_at_minimizer() {
        let mut rng = keyed_rng(11, 0, tag::TEST);
        for _ in 0..2000 {
            let (a, b, beta, sigma, kappa, v) = random_tuple(&mut rng);
            let r = slack_prox(a, b, beta, sigma, kappa, v).unwrap();
            let d = slack_derivative(a, b, beta, sigma, kappa, v, r.u_star);
            assert!(r.u_star >= 0.0);
            if r.u_star > 0.0 {
                assert!(d.abs() <= 1e-9 * (1.0 + kappa + sigma), "d = {d}");
            } else {
                assert!(d >= -1e-12, "d = {d}");
            }
        }
    }

    #[test]
    fn descent_bounds_hold_when_stable() {
        // Bounds pinch: descent forced to v and u* = 0.
        let bounds = shrinkage_bounds(0.5, 0.3, 2.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(bounds.lower, Some(1.0));
        assert_eq!(bounds.upper, 1.0);
        let r = slack_prox(0.5, 0.3, 2.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(r.u_star, 0.0);
        assert_eq!(r.descent, 1.0);
    }

    #[test]
    fn refined_upper_bound_substitution() {
        // delta = |a|+|b|-beta = 1, v = 0: u* <= v + delta/kappa = 1.
        let bounds = shrinkage_bounds(2.0, 1.0, 2.0, 1.0, 1.0, 0.0).unwrap();
        assert!((bounds.refined_upper - 1.0).abs() < 1e-15);
        let r = slack_prox(2.0, 1.0, 2.0, 1.0, 1.0, 0.0).unwrap();
        assert!(r.u_star <= bounds.refined_upper + 1e-15);
        // On this instance the minimizer also stays below v.
        for kappa in [0.5, 1.0, 4.0] {
            let r = slack_prox(1.5, 1.0, 2.0, 1.0, kappa, 0.5).unwrap();
            assert!(r.u_star <= 0.5 + 1e-15);
        }
    }

    #[test]
    fn scaled_denominator_variant_is_falsifiable() {
        // The tighter (kappa + 2 sigma) denominator fails here: the true
        // minimizer is 0.55 while that expression evaluates to 11/30.
        let (a, b, beta, sigma, kappa, v) = (1.1, 0.0, 1.0, 1.0, 1.0, 1.0);
        let r = slack_prox(a, b, beta, sigma, kappa, v).unwrap();
        assert!((r.u_star - 0.55).abs() < 1e-12);
        let delta = a.abs() + b.abs() - beta;
        let scaled = v + (delta - 2.0 * sigma * v) / (kappa + 2.0 * sigma);
        assert!(r.u_star > scaled);
        let bounds = shrinkage_bounds(a, b, beta, sigma, kappa, v).unwrap();
        assert!(r.u_star <= bounds.refined_upper + 1e-15);
    }

    #[test]
    fn bounds_and_oracle_on_random_tuples() {
        let mut rng = keyed_rng(23, 0, tag::TEST);
        for _ in 0..2000 {
            let (a, b, beta, sigma, kappa, v) = random_tuple(&mut rng);
            let r = slack_prox(a, b, beta, sigma, kappa, v).unwrap();
            let oracle = grid_oracle(a, b, beta, sigma, kappa, v);
            assert!(
                (r.u_star - oracle).abs() <= 1e-6,
                "closed form {} vs oracle {} on ({a},{b},{beta},{sigma},{kappa},{v})",
                r.u_star,
                oracle
            );
            let bounds = shrinkage_bounds(a, b, beta, sigma, kappa, v).unwrap();
            if let Some(lower) = bounds.lower {
                assert!(r.descent >= lower - 1e-12);
                assert!(r.descent <= bounds.upper + 1e-12);
            }
            assert!(r.u_star <= bounds.refined_upper + 1e-12);
        }
    }

    #[test]
    fn monotone_in_beta_and_v() {
        let mut rng = keyed_rng(37, 0, tag::TEST);
        for _ in 0..1000 {
            let (a, b, beta, sigma, kappa, v) = random_tuple(&mut rng);
            let bigger_beta = beta + rng.gen::<f64>();
            let r1 = slack_prox(a, b, beta, sigma, kappa, v).unwrap();
            let r2 = slack_prox(a, b, bigger_beta, sigma, kappa, v).unwrap();
            assert!(r2.u_star <= r1.u_star + 1e-12, "u* must not grow with beta");

            let bigger_v = v + rng.gen::<f64>();
            let r3 = slack_prox(a, b, beta, sigma, kappa, bigger_v).unwrap();
            assert!(r3.u_star >= r1.u_star - 1e-12, "u* must not shrink with v");
        }
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(slack_prox(0.0, 0.0, 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(slack_prox(0.0, 0.0, 1.0, -1.0, 1.0, 0.0).is_err());
        assert!(slack_prox(0.0, 0.0, 1.0, 1.0, 0.0, 0.0).is_err());
        assert!(slack_prox(0.0, 0.0, 1.0, 1.0, 1.0, -0.5).is_err());
        assert!(shrinkage_bounds(0.0, 0.0, 1.0, 1.0, 0.0, 0.0).is_err());
    }
}
