//! Quadrature helpers built on `gauss-quad`.

use gauss_quad::GaussLegendre;
use std::num::NonZeroUsize;

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("at least one node"));
    let mut pairs: Vec<(f64, f64)> = rule.iter().map(|(x, w)| (*x, *w)).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Nodes and weights mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(w.iter()).map(|(xi, wi)| (c + h * xi, h * wi)).collect()
}

pub fn integrate(n: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    gauss_legendre_on(n, a, b).iter().map(|&(x, w)| w * f(x)).sum()
}

/// Adaptive Gauss-Legendre: bisect until a 10-point and a 20-point rule agree
/// to a tolerance proportional to the subinterval length.
/// Returns `None` if the recursion depth is exhausted.
pub fn integrate_adaptive(a: f64, b: f64, tol: f64, f: &dyn Fn(f64) -> f64) -> Option<f64> {
    fn rec(a: f64, b: f64, tol: f64, f: &dyn Fn(f64) -> f64, depth: usize) -> Option<f64> {
        let lo = integrate(10, a, b, f);
        let hi = integrate(20, a, b, f);
        if (lo - hi).abs() <= tol.max(1e-15 * hi.abs()) {
            return Some(hi);
        }
        if depth == 0 {
            return None;
        }
        let m = 0.5 * (a + b);
        Some(rec(a, m, 0.5 * tol, f, depth - 1)? + rec(m, b, 0.5 * tol, f, depth - 1)?)
    }
    if a == b {
        return Some(0.0);
    }
    rec(a, b, tol, f, 60)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials() {
        let v = integrate(4, 0.0, 2.0, |x| x.powi(7));
        assert!((v - 2f64.powi(8) / 8.0).abs() < 1e-11);
    }

    #[test]
    fn adaptive_handles_kink() {
        let v = integrate_adaptive(-1.0, 2.0, 1e-12, &|x: f64| x.abs()).unwrap();
        assert!((v - 2.5).abs() < 1e-10);
    }
}
