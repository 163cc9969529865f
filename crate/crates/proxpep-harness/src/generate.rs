//! Synthetic problem families with analytically derived assumption
//! constants: every bound (nu, kappa, weak-convexity moduli, light-tail
//! scale) is computed from the construction, not measured.
//!
//! Family `quad-trig`: weakly convex objective (quadratic plus cosine
//! ripple), convex quadratic inequality constraints with a built-in strict
//! feasibility margin, and near-affine equality constraints with a small
//! sine ripple. Bounded uniform noise enters values and gradients affinely,
//! so sampled functions keep the deterministic curvature moduli.
//!
//! Family `affine-eq`: smooth convex quadratic objective and exactly affine
//! equality constraints; with zero noise and m = 0 the solver reduces to
//! projected proximal gradient with a known minimizer.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use proxpep::error::{Error, Result};
use proxpep::problem::{
    ConvexFeasibleSet, DeterministicEval, ProblemConstants, SampleRecord, StochasticProgram,
};
use proxpep::rng::{keyed_rng, tag, uniform_sym, ChaCha8Rng};
use proxpep::vecops::norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    QuadTrig,
    AffineEq,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::QuadTrig => write!(f, "quad-trig"),
            Family::AffineEq => write!(f, "affine-eq"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quad-trig" => Ok(Family::QuadTrig),
            "affine-eq" => Ok(Family::AffineEq),
            other => Err(Error::invalid_argument(format!("unknown problem family '{other}'"))),
        }
    }
}

/// Generator inputs; everything else is derived deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub family: Family,
    pub n: usize,
    #[serde(default)]
    pub p: usize,
    #[serde(default)]
    pub m: usize,
    #[serde(default)]
    pub noise_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            family: Family::QuadTrig,
            n: 5,
            p: 2,
            m: 2,
            noise_scale: 0.05,
            seed: 42,
        }
    }
}

/// Shared data of one generated quad-trig instance.
struct QuadTrigData {
    n: usize,
    p: usize,
    m: usize,
    /// Quadratic coefficient of the objective.
    s_f: f64,
    /// Linear coefficient vector of the objective.
    q: Vec<f64>,
    /// Cosine ripple amplitude and frequency.
    eps_f: f64,
    omega: f64,
    /// Ball centers and squared radii of the inequality constraints.
    g_centers: Vec<Vec<f64>>,
    g_radius_sq: Vec<f64>,
    /// Equality normals, ripple directions, ripple amplitude.
    h_a: Vec<Vec<f64>>,
    h_w: Vec<Vec<f64>>,
    eps_h: f64,
    /// Value and per-coordinate gradient noise amplitudes.
    noise_value: f64,
    noise_grad: f64,
}

impl QuadTrigData {
    fn deterministic(&self, x: &[f64]) -> DeterministicEval {
        let n = self.n;
        let mut f = 0.0;
        let mut grad_f = vec![0.0; n];
        for k in 0..n {
            f += 0.5 * self.s_f * x[k] * x[k]
                + self.q[k] * x[k]
                + self.eps_f * libm::cos(self.omega * x[k]);
            grad_f[k] =
                self.s_f * x[k] + self.q[k] - self.eps_f * self.omega * libm::sin(self.omega * x[k]);
        }
        let mut g = Vec::with_capacity(self.p);
        let mut jac_g = Vec::with_capacity(self.p);
        for i in 0..self.p {
            let mut sq = 0.0;
            let mut row = vec![0.0; n];
            for k in 0..n {
                let d = x[k] - self.g_centers[i][k];
                sq += d * d;
                row[k] = d;
            }
            g.push(0.5 * (sq - self.g_radius_sq[i]));
            jac_g.push(row);
        }
        let mut h = Vec::with_capacity(self.m);
        let mut jac_h = Vec::with_capacity(self.m);
        for j in 0..self.m {
            let inner = proxpep::vecops::dot(&self.h_w[j], x);
            let mut val = self.eps_h * libm::sin(inner);
            let cosw = self.eps_h * libm::cos(inner);
            let mut row = vec![0.0; n];
            for k in 0..n {
                val += self.h_a[j][k] * x[k];
                row[k] = self.h_a[j][k] + cosw * self.h_w[j][k];
            }
            h.push(val);
            jac_h.push(row);
        }
        DeterministicEval { f, grad_f, g, jac_g, h, jac_h }
    }

    /// Adds the affine noise of draw `seed` onto a deterministic evaluation.
    fn add_noise(&self, eval: DeterministicEval, x: &[f64], seed: u64) -> SampleRecord {
        let mut rec = SampleRecord {
            f: eval.f,
            grad_f: eval.grad_f,
            g: eval.g,
            jac_g: eval.jac_g,
            h: eval.h,
            jac_h: eval.jac_h,
            xi_id: seed,
        };
        if self.noise_value == 0.0 && self.noise_grad == 0.0 {
            return rec;
        }
        let mut rng = keyed_rng(seed, 0, tag::NOISE);
        let mut perturb = |value: &mut f64, grad: &mut [f64]| {
            *value += self.noise_value * uniform_sym(&mut rng);
            for k in 0..self.n {
                let d = self.noise_grad * uniform_sym(&mut rng);
                grad[k] += d;
                *value += d * x[k];
            }
        };
        perturb(&mut rec.f, &mut rec.grad_f);
        for i in 0..self.p {
            let (g, jac) = (&mut rec.g[i], &mut rec.jac_g[i]);
            perturb(g, jac);
        }
        for j in 0..self.m {
            let (h, jac) = (&mut rec.h[j], &mut rec.jac_h[j]);
            perturb(h, jac);
        }
        rec
    }
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| uniform_sym(rng)).collect();
        let len = norm(&v);
        if len > 1e-3 {
            return v.into_iter().map(|c| c / len).collect();
        }
    }
}

/// Strict feasibility margin built into every inequality constraint.
const EPS0: f64 = 0.5;

/// Builds a program of the requested family. All assumption constants are
/// computed from the construction.
pub fn generate_problem(
    family: Family,
    n: usize,
    p: usize,
    m: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<StochasticProgram> {
    if n == 0 {
        return Err(Error::Generation("dimension n must be >= 1".into()));
    }
    if !(noise_scale >= 0.0) {
        return Err(Error::Generation(format!("noise scale must be >= 0, got {noise_scale}")));
    }
    match family {
        Family::QuadTrig => generate_quad_trig(n, p, m, noise_scale, seed),
        Family::AffineEq => generate_affine_eq(n, p, m, noise_scale, seed),
    }
}

pub fn generate_from_config(cfg: &ProblemConfig) -> Result<StochasticProgram> {
    generate_problem(cfg.family, cfg.n, cfg.p, cfg.m, cfg.noise_scale, cfg.seed)
}

fn generate_quad_trig(
    n: usize,
    p: usize,
    m: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<StochasticProgram> {
    if m > n {
        return Err(Error::Generation(format!(
            "quad-trig needs m <= n independent equality normals (m = {m}, n = {n})"
        )));
    }
    let mut rng = keyed_rng(seed, 0, tag::GENERATOR);
    let nf = n as f64;
    let d0 = 2.0 * nf.sqrt();
    let p2m = ((p + 2 * m) as f64).sqrt();

    // Equality normals: orthonormalized random directions so the feasible
    // manifold through the origin is well conditioned.
    let mut h_a: Vec<Vec<f64>> = Vec::with_capacity(m);
    while h_a.len() < m {
        let mut v = random_unit(&mut rng, n);
        for prev in &h_a {
            let proj = proxpep::vecops::dot(&v, prev);
            for k in 0..n {
                v[k] -= proj * prev[k];
            }
        }
        let len = norm(&v);
        if len > 1e-3 {
            for c in v.iter_mut() {
                *c /= len;
            }
            h_a.push(v);
        }
    }
    let h_w: Vec<Vec<f64>> = (0..m).map(|_| random_unit(&mut rng, n)).collect();

    // Ripple amplitude sized so the feasibility gate holds with 20% margin
    // (kappa_sigma = eps_h when m >= 1).
    let eps_h = if m > 0 { 0.8 * EPS0 / (p2m * d0 * d0) } else { 0.0 };

    // Objective pull: toward a point of length 1.8 in the tangent space of
    // the equality manifold, so the first ball constraint binds at the
    // solution (its radius is sqrt(1.6) < 1.8).
    let s_f = 0.5;
    let eps_f = 0.1;
    let omega = 3.0;
    let pull = {
        let mut v = random_unit(&mut rng, n);
        for a in &h_a {
            let proj = proxpep::vecops::dot(&v, a);
            for k in 0..n {
                v[k] -= proj * a[k];
            }
        }
        let len = norm(&v);
        if len < 1e-6 {
            return Err(Error::Generation("degenerate pull direction".into()));
        }
        v.into_iter().map(|c| 1.8 * c / len).collect::<Vec<f64>>()
    };
    let q: Vec<f64> = pull.iter().map(|&c| -s_f * c).collect();

    // Inequality constraints: balls with strict feasibility at the origin,
    // first one centered so it binds under the pull.
    let mut g_centers = Vec::with_capacity(p);
    let mut g_radius_sq = Vec::with_capacity(p);
    for i in 0..p {
        if i == 0 {
            g_centers.push(vec![0.0; n]);
            g_radius_sq.push(2.0 * (EPS0 + 0.3));
        } else {
            let dir = random_unit(&mut rng, n);
            let center: Vec<f64> = dir.into_iter().map(|c| 0.3 * c).collect();
            let norm_c_sq = proxpep::vecops::norm_sq(&center);
            g_centers.push(center);
            g_radius_sq.push(norm_c_sq + 2.0 * (EPS0 + 0.5));
        }
    }

    let noise_value = noise_scale;
    let noise_grad = if n > 0 { noise_scale / (2.0 * nf.sqrt()) } else { 0.0 };

    let data = Arc::new(QuadTrigData {
        n,
        p,
        m,
        s_f,
        q,
        eps_f,
        omega,
        g_centers,
        g_radius_sq,
        h_a,
        h_w,
        eps_h,
        noise_value,
        noise_grad,
    });

    // Analytic bounds over the box [-1, 1]^n (sum |x_k| <= n, |x|^2 <= n).
    let value_noise_bound = noise_value + noise_grad * nf;
    let grad_noise_bound = noise_grad * nf.sqrt();
    let mut sup_g_sq = 0.0;
    let mut kappa_g: f64 = 0.0;
    for i in 0..p {
        let mut s_hi = 0.0;
        for k in 0..n {
            let c = data.g_centers[i][k];
            let lo = (-1.0 - c) * (-1.0 - c);
            let hi = (1.0 - c) * (1.0 - c);
            s_hi += lo.max(hi);
        }
        let sup_abs =
            (0.5 * data.g_radius_sq[i]).max(0.5 * (s_hi - data.g_radius_sq[i]).abs());
        sup_g_sq += (sup_abs + value_noise_bound) * (sup_abs + value_noise_bound);
        kappa_g = kappa_g.max(s_hi.sqrt() + grad_noise_bound);
    }
    let nu_g = sup_g_sq.sqrt();
    let mut sup_h_sq = 0.0;
    let mut kappa_h: f64 = 0.0;
    for j in 0..m {
        let l1: f64 = data.h_a[j].iter().map(|c| c.abs()).sum();
        let sup_abs = l1 + eps_h;
        sup_h_sq += (sup_abs + value_noise_bound) * (sup_abs + value_noise_bound);
        kappa_h = kappa_h.max(norm(&data.h_a[j]) + eps_h + grad_noise_bound);
    }
    let nu_h = sup_h_sq.sqrt();
    let kappa_f = s_f * nf.sqrt() + norm(&data.q) + eps_f * omega * nf.sqrt() + grad_noise_bound;
    let l0 = (eps_f * omega * omega - s_f).max(0.0);

    let set = ConvexFeasibleSet::bounded_box(vec![-1.0; n], vec![1.0; n])?;
    let constants = ProblemConstants {
        nu_g,
        nu_h,
        kappa_f,
        kappa_g,
        kappa_h,
        l0,
        l_g: vec![0.0; p],
        l_h: vec![eps_h; m],
        eps0: EPS0,
        x_tilde: vec![0.0; n],
        rho_c: value_noise_bound.max(1e-12),
        d0,
    };

    let sample_data = Arc::clone(&data);
    let sample: proxpep::problem::SampleOracle = Arc::new(move |x, s| {
        let eval = sample_data.deterministic(x);
        sample_data.add_noise(eval, x, s)
    });
    let det_data = Arc::clone(&data);
    let det: proxpep::problem::DeterministicOracle = Arc::new(move |x| det_data.deterministic(x));

    let program = StochasticProgram::new(set, n, p, m, sample, det, constants)?;
    // The construction pins g_i(0) = -(eps0 + margin) and h_j(0) = 0; verify.
    let at_center = program.deterministic(&program.constants.x_tilde);
    for &gi in &at_center.g {
        if !(gi <= -EPS0) {
            return Err(Error::Generation(format!(
                "strict feasibility margin violated at the interior point: g = {gi}"
            )));
        }
    }
    for &hj in &at_center.h {
        if hj.abs() > 1e-12 {
            return Err(Error::Generation(format!("equality not centered: h = {hj}")));
        }
    }
    Ok(program)
}

fn generate_affine_eq(
    n: usize,
    p: usize,
    m: usize,
    noise_scale: f64,
    seed: u64,
) -> Result<StochasticProgram> {
    if p != 0 {
        return Err(Error::Generation("affine-eq has no inequality constraints (p must be 0)".into()));
    }
    if m > n {
        return Err(Error::Generation(format!("affine-eq needs m <= n (m = {m}, n = {n})")));
    }
    let mut rng = keyed_rng(seed, 0, tag::GENERATOR);
    let nf = n as f64;
    let target: Vec<f64> = random_unit(&mut rng, n).into_iter().map(|c| 0.4 * c).collect();
    let mut h_a: Vec<Vec<f64>> = Vec::with_capacity(m);
    while h_a.len() < m {
        let mut v = random_unit(&mut rng, n);
        for prev in &h_a {
            let proj = proxpep::vecops::dot(&v, prev);
            for k in 0..n {
                v[k] -= proj * prev[k];
            }
        }
        let len = norm(&v);
        if len > 1e-3 {
            for c in v.iter_mut() {
                *c /= len;
            }
            h_a.push(v);
        }
    }

    let data = Arc::new(QuadTrigData {
        n,
        p: 0,
        m,
        s_f: 1.0,
        q: target.iter().map(|&c| -c).collect(),
        eps_f: 0.0,
        omega: 1.0,
        g_centers: vec![],
        g_radius_sq: vec![],
        h_a,
        h_w: (0..m).map(|_| vec![0.0; n]).collect(),
        eps_h: 0.0,
        noise_value: noise_scale,
        noise_grad: if n > 0 { noise_scale / (2.0 * nf.sqrt()) } else { 0.0 },
    });

    let value_noise_bound = data.noise_value + data.noise_grad * nf;
    let grad_noise_bound = data.noise_grad * nf.sqrt();
    let mut sup_h_sq = 0.0;
    let mut kappa_h: f64 = 1e-12;
    for j in 0..m {
        let l1: f64 = data.h_a[j].iter().map(|c| c.abs()).sum();
        sup_h_sq += (l1 + value_noise_bound) * (l1 + value_noise_bound);
        kappa_h = kappa_h.max(norm(&data.h_a[j]) + grad_noise_bound);
    }

    let set = ConvexFeasibleSet::bounded_box(vec![-1.0; n], vec![1.0; n])?;
    let constants = ProblemConstants {
        nu_g: 1e-12,
        nu_h: sup_h_sq.sqrt().max(1e-12),
        kappa_f: nf.sqrt() + norm(&data.q) + grad_noise_bound,
        kappa_g: 1e-12,
        kappa_h,
        l0: 0.0,
        l_g: vec![],
        l_h: vec![0.0; m],
        eps0: 1.0,
        x_tilde: vec![0.0; n],
        rho_c: value_noise_bound.max(1e-12),
        d0: set.diameter(),
    };

    let sample_data = Arc::clone(&data);
    let sample: proxpep::problem::SampleOracle = Arc::new(move |x, s| {
        let eval = sample_data.deterministic(x);
        sample_data.add_noise(eval, x, s)
    });
    let det_data = Arc::clone(&data);
    let det: proxpep::problem::DeterministicOracle = Arc::new(move |x| det_data.deterministic(x));
    StochasticProgram::new(set, n, 0, m, sample, det, constants)
}

/// Known unconstrained minimizer of the affine-eq objective (exact for
/// m = 0 and zero noise).
pub fn affine_eq_minimizer(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = keyed_rng(seed, 0, tag::GENERATOR);
    random_unit(&mut rng, n).into_iter().map(|c| 0.4 * c).collect()
}

/// Full problem-config document: generator inputs plus the derived set and
/// constants for reference.
#[derive(Debug, Serialize, Deserialize)]
struct ProblemFile {
    problem: ProblemConfig,
    set: Option<SetDoc>,
    constants: Option<ConstantsDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SetDoc {
    kind: String,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ConstantsDoc {
    nu_g: f64,
    nu_h: f64,
    kappa_f: f64,
    kappa_g: f64,
    kappa_h: f64,
    l0: f64,
    l_g: Vec<f64>,
    l_h: Vec<f64>,
    eps0: f64,
    rho_c: f64,
    d0: f64,
}

/// Writes the instance as a structured text config (generator inputs plus
/// the derived bounds for documentation).
pub fn write_problem_config(
    path: &Path,
    cfg: &ProblemConfig,
    program: &StochasticProgram,
) -> Result<()> {
    let (lower, upper) = match program.set.kind() {
        proxpep::problem::SetKind::Box { lower, upper } => (lower.clone(), upper.clone()),
        proxpep::problem::SetKind::Ball { center, radius } => (
            center.iter().map(|c| c - radius).collect(),
            center.iter().map(|c| c + radius).collect(),
        ),
    };
    let c = &program.constants;
    let doc = ProblemFile {
        problem: cfg.clone(),
        set: Some(SetDoc { kind: "box".into(), lower, upper }),
        constants: Some(ConstantsDoc {
            nu_g: c.nu_g,
            nu_h: c.nu_h,
            kappa_f: c.kappa_f,
            kappa_g: c.kappa_g,
            kappa_h: c.kappa_h,
            l0: c.l0,
            l_g: c.l_g.clone(),
            l_h: c.l_h.clone(),
            eps0: c.eps0,
            rho_c: c.rho_c,
            d0: c.d0,
        }),
    };
    let text = toml::to_string_pretty(&doc)
        .map_err(|e| Error::InvalidState(format!("config serialization failed: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Loads a problem config and regenerates the instance; declared constants in
/// the file (if present) must match the regenerated ones exactly.
pub fn load_problem_config(path: &Path) -> Result<(ProblemConfig, StochasticProgram)> {
    let text = std::fs::read_to_string(path)?;
    let doc: ProblemFile = toml::from_str(&text)
        .map_err(|e| Error::invalid_argument(format!("bad problem config: {e}")))?;
    let program = generate_from_config(&doc.problem)?;
    if let Some(cd) = &doc.constants {
        let c = &program.constants;
        let same = cd.nu_g == c.nu_g
            && cd.nu_h == c.nu_h
            && cd.kappa_f == c.kappa_f
            && cd.kappa_g == c.kappa_g
            && cd.kappa_h == c.kappa_h
            && cd.l0 == c.l0
            && cd.eps0 == c.eps0
            && cd.d0 == c.d0;
        if !same {
            return Err(Error::invalid_argument(
                "problem config constants do not match the regenerated instance",
            ));
        }
    }
    Ok((doc.problem, program))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_eq_zero_noise_matches_deterministic_oracle() {
        let program = generate_problem(Family::AffineEq, 3, 0, 1, 0.0, 7).unwrap();
        let x = [0.2, -0.1, 0.05];
        let det = program.deterministic(&x);
        let rec = program.sample(&x, 99).unwrap();
        assert_eq!(rec.f, det.f);
        assert_eq!(rec.h, det.h);
        assert_eq!(rec.jac_h, det.jac_h);
        let report = program.validate_assumptions(200).unwrap();
        assert!(report.passed(), "violations: {:?}", report.violations);
    }

    #[test]
    fn quad_trig_strict_feasibility_by_construction() {
        let program = generate_problem(Family::QuadTrig, 5, 2, 2, 0.05, 3).unwrap();
        let det = program.deterministic(&program.constants.x_tilde);
        for &gi in &det.g {
            assert!(gi <= -program.constants.eps0);
        }
        for &hj in &det.h {
            assert!(hj.abs() <= 1e-12);
        }
    }

    #[test]
    fn quad_trig_passes_validation() {
        let program = generate_problem(Family::QuadTrig, 5, 2, 2, 0.05, 11).unwrap();
        let report = program.validate_assumptions(500).unwrap();
        assert!(report.passed(), "violations: {:?}", report.violations);
        assert_eq!(report.weak_convexity_failures, 0);
    }

    #[test]
    fn sampling_is_pure_in_x_and_seed() {
        let program = generate_problem(Family::QuadTrig, 4, 1, 1, 0.1, 5).unwrap();
        let x = [0.1, -0.2, 0.3, 0.0];
        let a = program.sample(&x, 123).unwrap();
        let b = program.sample(&x, 123).unwrap();
        assert_eq!(a.f.to_bits(), b.f.to_bits());
        assert_eq!(a.g, b.g);
        assert_eq!(a.jac_h, b.jac_h);
        let c = program.sample(&x, 124).unwrap();
        assert_ne!(a.f.to_bits(), c.f.to_bits());
    }

    #[test]
    fn sample_mean_converges_to_deterministic_values() {
        // Monte-Carlo unbiasedness: |mean_N(G_i) - g_i(x)| <= 4 nu_g / sqrt(N).
        let program = generate_problem(Family::QuadTrig, 3, 2, 1, 0.1, 17).unwrap();
        let mut rng = keyed_rng(99, 0, tag::TEST);
        let n_draws = 100_000usize;
        for _ in 0..20 {
            let x = program.set.sample_point(&mut rng);
            let det = program.deterministic(&x);
            let mut mean_g = vec![0.0; program.p];
            let mut mean_h = vec![0.0; program.m];
            for s in 0..n_draws {
                let rec = program.sample(&x, s as u64).unwrap();
                for i in 0..program.p {
                    mean_g[i] += rec.g[i];
                }
                for j in 0..program.m {
                    mean_h[j] += rec.h[j];
                }
            }
            let tol_g = 4.0 * program.constants.nu_g / (n_draws as f64).sqrt();
            let tol_h = 4.0 * program.constants.nu_h / (n_draws as f64).sqrt();
            for i in 0..program.p {
                assert!(
                    (mean_g[i] / n_draws as f64 - det.g[i]).abs() <= tol_g,
                    "biased G_{i}"
                );
            }
            for j in 0..program.m {
                assert!(
                    (mean_h[j] / n_draws as f64 - det.h[j]).abs() <= tol_h,
                    "biased H_{j}"
                );
            }
        }
    }

    #[test]
    fn empirical_h_bound_stays_below_declared_nu() {
        let program = generate_problem(Family::QuadTrig, 4, 2, 2, 0.08, 23).unwrap();
        let mut rng = keyed_rng(55, 0, tag::TEST);
        let mut max_h: f64 = 0.0;
        for s in 0..100_000u64 {
            if s % 1000 == 0 {
                // fresh random point every block
                let x = program.set.sample_point(&mut rng);
                let rec = program.sample(&x, s).unwrap();
                for &hj in &rec.h {
                    max_h = max_h.max(hj.abs());
                }
            }
        }
        assert!(max_h <= program.constants.nu_h);
    }

    #[test]
    fn generation_errors() {
        assert!(generate_problem(Family::AffineEq, 3, 1, 0, 0.0, 1).is_err());
        assert!(generate_problem(Family::QuadTrig, 2, 1, 3, 0.0, 1).is_err());
        assert!(generate_problem(Family::QuadTrig, 0, 0, 0, 0.0, 1).is_err());
        assert!(generate_problem(Family::QuadTrig, 3, 1, 1, -0.5, 1).is_err());
    }

    #[test]
    fn problem_config_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("problem.toml");
        let cfg = ProblemConfig::default();
        let program = generate_from_config(&cfg).unwrap();
        write_problem_config(&path, &cfg, &program).unwrap();
        let (loaded_cfg, loaded) = load_problem_config(&path).unwrap();
        assert_eq!(loaded_cfg, cfg);
        assert_eq!(loaded.constants.nu_g, program.constants.nu_g);
        assert_eq!(loaded.constants.d0, program.constants.d0);
    }
}
