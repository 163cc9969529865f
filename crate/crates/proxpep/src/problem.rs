//! Stochastic constrained programs: feasible sets with exact projections,
//! sampling and expectation oracles, and validation of the standing
//! assumptions (bounded constraint values and gradients, strict feasibility,
//! weak convexity).

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{keyed_rng, tag, uniform_sym};
use crate::vecops::{dist, linf_norm, norm};

/// Membership tolerance for "x lies in the set" preconditions.
pub const MEMBERSHIP_TOL: f64 = 1e-10;
/// Inflation applied to the feasible set when sampling validation points,
/// standing in for the open neighborhood the assumptions are stated on.
pub const NEIGHBORHOOD_INFLATION: f64 = 1e-6;

#[derive(Debug, Clone)]
pub enum SetKind {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

/// Closed convex feasible set with a closed-form Euclidean projection.
#[derive(Debug, Clone)]
pub struct ConvexFeasibleSet {
    kind: SetKind,
    dim: usize,
}

impl ConvexFeasibleSet {
    pub fn bounded_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::invalid_argument("box bounds must match and be nonempty"));
        }
        for (l, u) in lower.iter().zip(&upper) {
            if !(l <= u) {
                return Err(Error::invalid_argument(format!(
                    "box requires lower <= upper, got [{l}, {u}]"
                )));
            }
        }
        let dim = lower.len();
        Ok(Self {
            kind: SetKind::Box { lower, upper },
            dim,
        })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid_argument("ball center must be nonempty"));
        }
        if !(radius > 0.0) {
            return Err(Error::invalid_argument(format!("ball radius must be > 0, got {radius}")));
        }
        let dim = center.len();
        Ok(Self {
            kind: SetKind::Ball { center, radius },
            dim,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    /// Euclidean diameter of the set.
    pub fn diameter(&self) -> f64 {
        match &self.kind {
            SetKind::Box { lower, upper } => dist(upper, lower),
            SetKind::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: z.len(),
            });
        }
        Ok(match &self.kind {
            SetKind::Box { lower, upper } => z
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(&zi, (&l, &u))| zi.clamp(l, u))
                .collect(),
            SetKind::Ball { center, radius } => {
                let r = dist(z, center);
                if r <= *radius {
                    z.to_vec()
                } else {
                    let scale = radius / r;
                    z.iter()
                        .zip(center)
                        .map(|(&zi, &ci)| ci + scale * (zi - ci))
                        .collect()
                }
            }
        })
    }

    /// Whether `x` is within `tol` of the set.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self.project(x) {
            Ok(p) => dist(x, &p) <= tol,
            Err(_) => false,
        }
    }

    /// Uniform-ish random point of the set (used by validation and tests).
    pub fn sample_point(&self, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
        match &self.kind {
            SetKind::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(&l, &u)| l + rng.gen::<f64>() * (u - l))
                .collect(),
            SetKind::Ball { center, radius } => {
                // Direction times radius scaled by u^(1/n).
                let mut dir: Vec<f64> = (0..self.dim).map(|_| uniform_sym(rng)).collect();
                let n = norm(&dir);
                if n == 0.0 {
                    return center.clone();
                }
                let r = radius * rng.gen::<f64>().powf(1.0 / self.dim as f64);
                for d in dir.iter_mut() {
                    *d *= r / n;
                }
                dir.iter().zip(center).map(|(d, c)| c + d).collect()
            }
        }
    }

    /// Same set inflated by `eps` (box bounds widened, ball radius grown).
    pub fn inflate(&self, eps: f64) -> Self {
        match &self.kind {
            SetKind::Box { lower, upper } => Self {
                kind: SetKind::Box {
                    lower: lower.iter().map(|l| l - eps).collect(),
                    upper: upper.iter().map(|u| u + eps).collect(),
                },
                dim: self.dim,
            },
            SetKind::Ball { center, radius } => Self {
                kind: SetKind::Ball {
                    center: center.clone(),
                    radius: radius + eps,
                },
                dim: self.dim,
            },
        }
    }
}

/// One stochastic oracle draw at a point.
#[derive(Debug, Clone)]
pub struct SampleRecord {
    pub f: f64,
    pub grad_f: Vec<f64>,
    pub g: Vec<f64>,
    pub jac_g: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub jac_h: Vec<Vec<f64>>,
    /// Sample tag (the seed the draw was keyed by).
    pub xi_id: u64,
}

impl SampleRecord {
    pub fn check_dims(&self, n: usize, p: usize, m: usize) -> Result<()> {
        let ok = self.grad_f.len() == n
            && self.g.len() == p
            && self.h.len() == m
            && self.jac_g.len() == p
            && self.jac_h.len() == m
            && self.jac_g.iter().all(|r| r.len() == n)
            && self.jac_h.iter().all(|r| r.len() == n);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid_argument("sample record dimensions inconsistent"))
        }
    }
}

/// Exact expectations and their gradients at a point.
#[derive(Debug, Clone)]
pub struct DeterministicEval {
    pub f: f64,
    pub grad_f: Vec<f64>,
    pub g: Vec<f64>,
    pub jac_g: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub jac_h: Vec<Vec<f64>>,
}

/// Declared assumption constants of a program.
#[derive(Debug, Clone)]
pub struct ProblemConstants {
    /// Bound on the sampled inequality constraint vector norm.
    pub nu_g: f64,
    /// Bound on the sampled equality constraint vector norm.
    pub nu_h: f64,
    pub kappa_f: f64,
    pub kappa_g: f64,
    pub kappa_h: f64,
    /// Weak-convexity modulus of the sampled objective.
    pub l0: f64,
    /// Weak-convexity moduli of the sampled inequality constraints.
    pub l_g: Vec<f64>,
    /// Two-sided curvature bounds of the sampled equality constraints.
    pub l_h: Vec<f64>,
    /// Strict feasibility margin.
    pub eps0: f64,
    /// Strictly feasible point.
    pub x_tilde: Vec<f64>,
    /// Light-tail scale of the constraint value noise.
    pub rho_c: f64,
    /// Declared diameter bound of the feasible set.
    pub d0: f64,
}

pub type SampleOracle = Arc<dyn Fn(&[f64], u64) -> SampleRecord + Send + Sync>;
pub type DeterministicOracle = Arc<dyn Fn(&[f64]) -> DeterministicEval + Send + Sync>;

/// A stochastic program with expectation inequality and equality constraints
/// over a closed convex set. Immutable after construction; oracles are pure.
#[derive(Clone)]
pub struct StochasticProgram {
    pub set: ConvexFeasibleSet,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    sample_oracle: SampleOracle,
    deterministic_oracle: DeterministicOracle,
    pub constants: ProblemConstants,
}

impl std::fmt::Debug for StochasticProgram {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StochasticProgram")
            .field("n", &self.n)
            .field("p", &self.p)
            .field("m", &self.m)
            .field("set", &self.set)
            .field("constants", &self.constants)
            .finish()
    }
}

impl StochasticProgram {
    pub fn new(
        set: ConvexFeasibleSet,
        n: usize,
        p: usize,
        m: usize,
        sample_oracle: SampleOracle,
        deterministic_oracle: DeterministicOracle,
        constants: ProblemConstants,
    ) -> Result<Self> {
        if set.dimension() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: set.dimension(),
            });
        }
        if constants.x_tilde.len() != n {
            return Err(Error::invalid_argument("x_tilde dimension mismatch"));
        }
        if constants.l_g.len() != p || constants.l_h.len() != m {
            return Err(Error::invalid_argument("weak-convexity moduli dimensions mismatch"));
        }
        if !(constants.eps0 > 0.0) {
            return Err(Error::invalid_argument("eps0 must be positive"));
        }
        if set.diameter() > constants.d0 * (1.0 + 1e-12) {
            return Err(Error::invalid_argument(format!(
                "set diameter {} exceeds declared D0 {}",
                set.diameter(),
                constants.d0
            )));
        }
        if !set.contains(&constants.x_tilde, MEMBERSHIP_TOL) {
            return Err(Error::invalid_argument("x_tilde lies outside the feasible set"));
        }
        Ok(Self {
            set,
            n,
            p,
            m,
            sample_oracle,
            deterministic_oracle,
            constants,
        })
    }

    /// Draws the stochastic oracle at `x` with sample key `seed`.
    /// Deterministic in `(x, seed)`.
    pub fn sample(&self, x: &[f64], seed: u64) -> Result<SampleRecord> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        if !self.set.contains(x, MEMBERSHIP_TOL) {
            return Err(Error::precondition(format!(
                "sample point is outside the feasible set beyond tolerance {MEMBERSHIP_TOL:e}"
            )));
        }
        let rec = (self.sample_oracle)(x, seed);
        rec.check_dims(self.n, self.p, self.m)?;
        Ok(rec)
    }

    /// Oracle draw without the membership precondition; used for validation
    /// sampling on the inflated neighborhood.
    pub fn sample_unchecked(&self, x: &[f64], seed: u64) -> SampleRecord {
        (self.sample_oracle)(x, seed)
    }

    /// Exact expectations at `x`.
    pub fn deterministic(&self, x: &[f64]) -> DeterministicEval {
        (self.deterministic_oracle)(x)
    }

    /// Samples random points and seeds, then reports the observed maxima
    /// against the declared constants, strict feasibility at `x_tilde`, and
    /// midpoint weak-convexity spot checks.
    pub fn validate_assumptions(&self, trials: usize) -> Result<ValidationReport> {
        if trials == 0 {
            return Err(Error::invalid_argument("validation requires trials >= 1"));
        }
        let region = self.set.inflate(NEIGHBORHOOD_INFLATION);
        let mut rng = keyed_rng(trials as u64, 0, tag::VALIDATE);
        let mut report = ValidationReport::new(trials);

        for trial in 0..trials {
            let x = region.sample_point(&mut rng);
            let seed = rng.gen::<u64>();
            let rec = self.sample_unchecked(&x, seed);
            for (i, &gi) in rec.g.iter().enumerate() {
                report.max_abs_g = report.max_abs_g.max(gi.abs());
                if gi.abs() > self.constants.nu_g {
                    report.flag(format!("|G_{i}| = {} exceeds nu_g = {} (trial {trial})", gi.abs(), self.constants.nu_g));
                }
            }
            for (j, &hj) in rec.h.iter().enumerate() {
                report.max_abs_h = report.max_abs_h.max(hj.abs());
                if hj.abs() > self.constants.nu_h {
                    report.flag(format!("|H_{j}| = {} exceeds nu_h = {} (trial {trial})", hj.abs(), self.constants.nu_h));
                }
            }
            let gf = norm(&rec.grad_f);
            report.max_grad_f = report.max_grad_f.max(gf);
            if gf > self.constants.kappa_f {
                report.flag(format!("|grad F| = {gf} exceeds kappa_f = {}", self.constants.kappa_f));
            }
            for row in &rec.jac_g {
                let gg = norm(row);
                report.max_grad_g = report.max_grad_g.max(gg);
                if gg > self.constants.kappa_g {
                    report.flag(format!("|grad G| = {gg} exceeds kappa_g = {}", self.constants.kappa_g));
                }
            }
            for row in &rec.jac_h {
                let gh = norm(row);
                report.max_grad_h = report.max_grad_h.max(gh);
                if gh > self.constants.kappa_h {
                    report.flag(format!("|grad H| = {gh} exceeds kappa_h = {}", self.constants.kappa_h));
                }
            }
        }

        // Strict feasibility at the declared point.
        let det = self.deterministic(&self.constants.x_tilde);
        report.g_at_x_tilde = det.g.clone();
        report.h_at_x_tilde_inf = linf_norm(&det.h);
        for (i, &gi) in det.g.iter().enumerate() {
            if !(gi <= -self.constants.eps0) {
                report.strict_feasibility_ok = false;
                report.flag(format!(
                    "g_{i}(x_tilde) = {gi} violates the declared margin -eps0 = {}",
                    -self.constants.eps0
                ));
            }
        }
        if report.h_at_x_tilde_inf > 1e-12 {
            report.strict_feasibility_ok = false;
            report.flag(format!(
                "|h(x_tilde)|_inf = {} exceeds 1e-12",
                report.h_at_x_tilde_inf
            ));
        }

        // Midpoint convexity of the weak-convexity-compensated samples along
        // random segments.
        let segments = 100;
        for _ in 0..segments {
            let x1 = region.sample_point(&mut rng);
            let x2 = region.sample_point(&mut rng);
            let mid: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 0.5 * (a + b)).collect();
            let seed = rng.gen::<u64>();
            let r1 = self.sample_unchecked(&x1, seed);
            let r2 = self.sample_unchecked(&x2, seed);
            let rm = self.sample_unchecked(&mid, seed);

            let reg = |l: f64, x: &[f64]| 0.5 * l * crate::vecops::norm_sq(x);
            let check = |fm: f64, f1: f64, f2: f64, l: f64, label: &str, report: &mut ValidationReport| {
                let lhs = fm + reg(l, &mid);
                let rhs = 0.5 * (f1 + reg(l, &x1) + f2 + reg(l, &x2));
                if lhs > rhs + 1e-9 {
                    report.weak_convexity_failures += 1;
                    report.flag(format!("midpoint convexity failed for {label}: {lhs} > {rhs}"));
                }
            };
            check(rm.f, r1.f, r2.f, self.constants.l0, "F", &mut report);
            for i in 0..self.p {
                check(rm.g[i], r1.g[i], r2.g[i], self.constants.l_g[i], "G", &mut report);
            }
            for j in 0..self.m {
                let l = self.constants.l_h[j];
                check(rm.h[j], r1.h[j], r2.h[j], l, "H", &mut report);
                check(-rm.h[j], -r1.h[j], -r2.h[j], l, "-H", &mut report);
            }
        }

        Ok(report)
    }
}

/// Observed assumption diagnostics; failures are carried, not raised.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub trials: usize,
    pub max_abs_g: f64,
    pub max_abs_h: f64,
    pub max_grad_f: f64,
    pub max_grad_g: f64,
    pub max_grad_h: f64,
    pub g_at_x_tilde: Vec<f64>,
    pub h_at_x_tilde_inf: f64,
    pub strict_feasibility_ok: bool,
    pub weak_convexity_failures: usize,
    pub violations: Vec<String>,
}

impl ValidationReport {
    fn new(trials: usize) -> Self {
        Self {
            trials,
            max_abs_g: 0.0,
            max_abs_h: 0.0,
            max_grad_f: 0.0,
            max_grad_g: 0.0,
            max_grad_h: 0.0,
            g_at_x_tilde: Vec::new(),
            h_at_x_tilde_inf: 0.0,
            strict_feasibility_ok: true,
            weak_convexity_failures: 0,
            violations: Vec::new(),
        }
    }

    fn flag(&mut self, msg: String) {
        self.violations.push(msg);
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{keyed_rng, tag};

    #[test]
    fn box_projection_clamps_coordinatewise() {
        let set = ConvexFeasibleSet::bounded_box(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(set.project(&[2.0, 0.5]).unwrap(), vec![1.0, 0.5]);
        assert_eq!(set.project(&[0.1, 0.1]).unwrap(), vec![0.1, 0.1]);
    }

    #[test]
    fn ball_projection_scales_radially() {
        let set = ConvexFeasibleSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        let p = set.project(&[3.0, 4.0]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15);
        assert!((p[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn projection_dimension_mismatch_is_rejected() {
        let set = ConvexFeasibleSet::bounded_box(vec![-1.0], vec![1.0]).unwrap();
        assert!(set.project(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn projection_idempotent_and_nonexpansive() {
        let sets = [
            ConvexFeasibleSet::bounded_box(vec![-1.0, -0.5, 0.0], vec![1.0, 2.0, 0.25]).unwrap(),
            ConvexFeasibleSet::ball(vec![0.3, -0.2, 0.1], 1.5).unwrap(),
        ];
        let mut rng = keyed_rng(5, 0, tag::TEST);
        for set in &sets {
            for _ in 0..10_000 {
                let a: Vec<f64> = (0..3).map(|_| 6.0 * crate::rng::uniform_sym(&mut rng)).collect();
                let b: Vec<f64> = (0..3).map(|_| 6.0 * crate::rng::uniform_sym(&mut rng)).collect();
                let pa = set.project(&a).unwrap();
                let pb = set.project(&b).unwrap();
                let ppa = set.project(&pa).unwrap();
                assert!(dist(&pa, &ppa) <= 1e-14, "projection not idempotent");
                assert!(
                    dist(&pa, &pb) <= dist(&a, &b) + 1e-12,
                    "projection not nonexpansive"
                );
                assert!(set.contains(&pa, 1e-12));
            }
        }
    }

    #[test]
    fn diameter_matches_geometry() {
        let set = ConvexFeasibleSet::bounded_box(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        assert!((set.diameter() - 8.0f64.sqrt()).abs() < 1e-15);
        let ball = ConvexFeasibleSet::ball(vec![0.0], 2.0).unwrap();
        assert_eq!(ball.diameter(), 4.0);
    }
}
