//! Small dense-vector helpers used throughout the solver.
//!
//! All loops are plain scalar IEEE f64 arithmetic in a fixed order so that
//! results (and therefore trajectory digests) are reproducible across
//! machines.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

pub fn l1_norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

pub fn linf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Positive part `[x]_+`.
#[inline]
pub fn plus(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_and_norms() {
        let a = [3.0, 4.0];
        assert_eq!(dot(&a, &a), 25.0);
        assert_eq!(norm(&a), 5.0);
        assert_eq!(l1_norm(&a), 7.0);
        assert_eq!(linf_norm(&[-3.0, 2.0]), 3.0);
        assert_eq!(dist(&[1.0, 0.0], &[0.0, 0.0]), 1.0);
    }

    #[test]
    fn plus_clamps_at_zero() {
        assert_eq!(plus(-2.0), 0.0);
        assert_eq!(plus(0.0), 0.0);
        assert_eq!(plus(1.5), 1.5);
    }
}
