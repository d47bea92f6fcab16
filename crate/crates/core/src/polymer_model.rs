//! Spring laws, Maxwellians, physical constants, cutoff functions and
//! entropy densities.

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::quad::integrate_adaptive;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpringKind {
    Hookean,
    /// Hookean potential restricted to the ball of radius `sqrt(b)`.
    TannerLocked,
    Fene,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpringLaw {
    pub kind: SpringKind,
    /// Extensibility; ignored for Hookean springs.
    pub b: f64,
    /// Number of springs in the chain.
    pub chain: usize,
    /// Dimension of each spring vector.
    pub dim: usize,
}

impl Default for SpringLaw {
    fn default() -> Self {
        SpringLaw { kind: SpringKind::Fene, b: 10.0, chain: 1, dim: 2 }
    }
}

impl SpringLaw {
    pub fn new(kind: SpringKind, b: f64, chain: usize, dim: usize) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::Config(format!("spring dimension must be 2 or 3, got {dim}")));
        }
        if chain == 0 {
            return Err(Error::Config("chain needs at least one spring".into()));
        }
        if kind != SpringKind::Hookean && !(b > 0.0 && b.is_finite()) {
            return Err(Error::Config(format!("extensibility must be positive, got {b}")));
        }
        Ok(SpringLaw { kind, b, chain, dim })
    }

    /// Radius of the configuration ball, `None` for the whole space.
    pub fn radius(&self) -> Option<f64> {
        match self.kind {
            SpringKind::Hookean => None,
            _ => Some(self.b.sqrt()),
        }
    }

    /// Potential `U(s)` with `s = |q|^2 / 2`.
    pub fn potential(&self, s: f64) -> f64 {
        match self.kind {
            SpringKind::Hookean | SpringKind::TannerLocked => s,
            SpringKind::Fene => -0.5 * self.b * (1.0 - 2.0 * s / self.b).ln(),
        }
    }

    /// `U'(s)`.
    pub fn potential_slope(&self, s: f64) -> f64 {
        match self.kind {
            SpringKind::Hookean | SpringKind::TannerLocked => 1.0,
            SpringKind::Fene => 1.0 / (1.0 - 2.0 * s / self.b),
        }
    }

    pub fn inside(&self, q: &[f64]) -> bool {
        match self.radius() {
            None => true,
            Some(_) => q.iter().map(|x| x * x).sum::<f64>() < self.b,
        }
    }

    /// Spring force `U'(|q|^2/2) q`.
    pub fn spring_force(&self, q: &[f64]) -> Result<Vec<f64>> {
        let r2: f64 = q.iter().map(|x| x * x).sum();
        if !self.inside(q) {
            return Err(Error::OutOfDomain(format!("|q|^2 = {r2} outside the ball of radius^2 {}", self.b)));
        }
        let u = self.potential_slope(0.5 * r2);
        Ok(q.iter().map(|x| u * x).collect())
    }

    /// Unnormalized single-spring Maxwellian `exp(-U(r^2/2))` as a function of `r = |q|`.
    pub fn weight(&self, r: f64) -> f64 {
        match self.kind {
            SpringKind::Hookean => (-0.5 * r * r).exp(),
            SpringKind::TannerLocked => {
                if r * r < self.b {
                    (-0.5 * r * r).exp()
                } else {
                    0.0
                }
            }
            SpringKind::Fene => {
                let x = 1.0 - r * r / self.b;
                if x <= 0.0 {
                    0.0
                } else {
                    x.powf(0.5 * self.b)
                }
            }
        }
    }
}

/// Surface measure of the unit sphere in `R^d`.
pub fn sphere_measure(d: usize) -> f64 {
    match d {
        2 => std::f64::consts::TAU,
        3 => 4.0 * std::f64::consts::PI,
        _ => unreachable!("dimension checked at construction"),
    }
}

/// Normalized Maxwellian, optionally floored by `1/m`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxwellianTable {
    pub law: SpringLaw,
    /// Single-spring normalization constant `Z`.
    pub norm: f64,
    /// Approximation index; `None` is the exact Maxwellian.
    pub m: Option<f64>,
}

/// Builds the normalized Maxwellian. The radial integral is computed in the
/// variable `r = R (1 - (1 - t)^2)`, which clusters nodes at the ball edge
/// where the FENE weight degenerates.
pub fn maxwellian(law: SpringLaw, m: Option<f64>) -> Result<MaxwellianTable> {
    let d = law.dim as i32;
    let z = match law.radius() {
        Some(rad) => {
            let f = |t: f64| {
                let r = rad * (1.0 - (1.0 - t) * (1.0 - t));
                let jac = 2.0 * rad * (1.0 - t);
                law.weight(r) * r.powi(d - 1) * jac
            };
            integrate_adaptive(0.0, 1.0, 1e-14, &f)
        }
        None => integrate_adaptive(0.0, 40.0, 1e-14, &|r: f64| law.weight(r) * r.powi(d - 1)),
    };
    let z = z.map(|v| v * sphere_measure(law.dim));
    match z {
        Some(v) if v.is_finite() && v > 0.0 => {}
        _ => return Err(Error::Quadrature("Maxwellian normalization did not converge".into())),
    }
    if let Some(mm) = m {
        if !(mm > 0.0) {
            return Err(Error::Config("Maxwellian approximation index must be positive".into()));
        }
    }
    Ok(MaxwellianTable { law, norm: z.unwrap(), m })
}

impl MaxwellianTable {
    /// `M_i` at radius `r`.
    pub fn radial(&self, r: f64) -> f64 {
        self.law.weight(r) / self.norm
    }

    /// `M_i(q)` for a single spring.
    pub fn spring(&self, q: &[f64]) -> f64 {
        self.radial(q.iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    /// Product Maxwellian over the chain; `q` holds the springs back to back.
    pub fn total(&self, q: &[f64]) -> f64 {
        q.chunks(self.law.dim).map(|qi| self.spring(qi)).product()
    }

    /// Floored weight `M + 1/m`, or `M` when exact.
    pub fn floored(&self, q: &[f64]) -> f64 {
        let m = self.total(q).max(0.0);
        match self.m {
            Some(mm) => m + 1.0 / mm,
            None => m,
        }
    }

    /// Text header for the flat binary table format.
    pub fn header(&self, samples: usize) -> String {
        format!(
            "dims={} chain={} law={:?} b={} norm={:.17e} m={} samples={}\n",
            self.law.dim,
            self.law.chain,
            self.law.kind,
            self.law.b,
            self.norm,
            self.m.map(|x| x.to_string()).unwrap_or_else(|| "inf".into()),
            samples
        )
    }

    /// Radial samples of `M_i` on `samples` equispaced radii in `[0, R]`.
    pub fn radial_samples(&self, samples: usize) -> Vec<f64> {
        let rad = self.law.radius().unwrap_or(8.0);
        (0..samples).map(|k| self.radial(rad * k as f64 / (samples.max(2) - 1) as f64)).collect()
    }
}

/// Physical constants of the fluid and the polymer solute.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalParams {
    pub viscosity: f64,
    pub eps: f64,
    pub deborah: f64,
    pub k: f64,
    /// Quadratic number-density coefficient.
    pub eth: f64,
    pub rouse: Vec<Vec<f64>>,
    /// Smallest eigenvalue of the Rouse matrix.
    pub a0: f64,
}

impl PhysicalParams {
    pub fn new(viscosity: f64, eps: f64, deborah: f64, k: f64, eth: f64, rouse: Vec<Vec<f64>>) -> Result<Self> {
        for (name, v) in [("viscosity", viscosity), ("eps", eps), ("deborah", deborah), ("k", k)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(eth >= 0.0) {
            return Err(Error::Config("eth must be nonnegative".into()));
        }
        let n = rouse.len();
        if n == 0 || rouse.iter().any(|r| r.len() != n) {
            return Err(Error::Config("Rouse matrix must be square and nonempty".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if (rouse[i][j] - rouse[j][i]).abs() > 1e-14 * (1.0 + rouse[i][j].abs()) {
                    return Err(Error::Config("Rouse matrix must be symmetric".into()));
                }
            }
        }
        let a0 = symmetric_eigenvalues(&rouse)[0];
        if !(a0 > 0.0) {
            return Err(Error::Config(format!("Rouse matrix not positive definite (min eigenvalue {a0})")));
        }
        Ok(PhysicalParams { viscosity, eps, deborah, k, eth, rouse, a0 })
    }

    /// Rouse matrix of a linear chain with `springs` springs: tridiagonal (-1, 2, -1).
    pub fn rouse_chain(springs: usize) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; springs]; springs];
        for i in 0..springs {
            a[i][i] = 2.0;
            if i + 1 < springs {
                a[i][i + 1] = -1.0;
                a[i + 1][i] = -1.0;
            }
        }
        a
    }
}

/// Spring law, Maxwellian and constants together.
#[derive(Clone, Debug, PartialEq)]
pub struct PolymerModel {
    pub law: SpringLaw,
    pub maxwellian: MaxwellianTable,
    pub params: PhysicalParams,
}

impl PolymerModel {
    pub fn new(law: SpringLaw, m: Option<f64>, params: PhysicalParams) -> Result<Self> {
        if params.rouse.len() != law.chain {
            return Err(Error::Config("Rouse matrix size must equal the chain length".into()));
        }
        Ok(PolymerModel { law, maxwellian: maxwellian(law, m)?, params })
    }
}

fn smootherstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Cutoff `Gamma`: 1 on `[-1, 1]`, 0 outside `(-2, 2)`, C2 quintic in between.
pub fn cutoff_gamma(s: f64) -> f64 {
    1.0 - smootherstep(s.abs() - 1.0)
}

/// `Gamma_l(s) = Gamma(s / l)`.
pub fn cutoff_gamma_l(ell: f64, s: f64) -> f64 {
    cutoff_gamma(s / ell)
}

/// `T_l(s) = int_0^s Gamma_l`, in closed form.
pub fn cutoff_t(ell: f64, s: f64) -> f64 {
    if s <= ell {
        return s;
    }
    let t = ((s - ell) / ell).min(1.0);
    let prim = t.powi(6) - 3.0 * t.powi(5) + 2.5 * t.powi(4);
    ell + ell * (t - prim)
}

/// `Lambda_l(s) = s Gamma_l(s)`.
pub fn cutoff_lambda(ell: f64, s: f64) -> f64 {
    s * cutoff_gamma_l(ell, s)
}

/// `T_{delta,l}(s) = int_0^s r Gamma_l(r) / (r + delta) dr`.
pub fn cutoff_t_delta(delta: f64, ell: f64, s: f64) -> f64 {
    let closed = |x: f64| x - delta * ((x + delta) / delta).ln();
    if s <= ell {
        return closed(s);
    }
    let top = s.min(2.0 * ell);
    let f = |r: f64| r * cutoff_gamma_l(ell, r) / (r + delta);
    closed(ell) + integrate_adaptive(ell, top, 1e-14, &f).expect("smooth integrand on a bounded interval")
}

/// Entropy density `F(s) = s ln s + 1/e`, with `F(0) = 1/e`.
pub fn entropy(s: f64) -> f64 {
    let e1 = (-1.0f64).exp();
    if s <= 0.0 {
        e1
    } else {
        s * s.ln() + e1
    }
}

pub fn entropy_slope(s: f64) -> f64 {
    s.ln() + 1.0
}

/// `F_delta(s) = (s + delta) ln(s + delta) + 1/e`.
pub fn entropy_delta(delta: f64, s: f64) -> f64 {
    let x = s + delta;
    x * x.ln() + (-1.0f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn force_examples() {
        let h = SpringLaw::new(SpringKind::Hookean, 0.0, 1, 3).unwrap();
        assert_eq!(h.spring_force(&[1.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        let f = SpringLaw::new(SpringKind::Fene, 4.0, 1, 3).unwrap();
        let v = f.spring_force(&[2f64.sqrt(), 0.0, 0.0]).unwrap();
        assert!((v[0] - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(f.spring_force(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0; 3]);
        assert!(matches!(f.spring_force(&[2.0, 0.0, 0.0]), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn maxwellian_normalization() {
        let f = maxwellian(SpringLaw::default(), None).unwrap();
        // d = 2: Z = 2 pi b / (b + 2)
        let b = 10.0;
        assert!((f.norm - std::f64::consts::TAU * b / (b + 2.0)).abs() < 1e-12);
        let h = maxwellian(SpringLaw::new(SpringKind::Hookean, 0.0, 1, 3).unwrap(), None).unwrap();
        let q = [0.3, -0.4, 1.1];
        let r2: f64 = q.iter().map(|x| x * x).sum();
        let exact = (std::f64::consts::TAU).powf(-1.5) * (-0.5 * r2).exp();
        assert!((h.spring(&q) - exact).abs() < 1e-14);
        let fl = maxwellian(SpringLaw::default(), Some(100.0)).unwrap();
        assert!((fl.floored(&[3.16, 0.0]) - fl.spring(&[3.16, 0.0]) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn fene_weight_vanishes_at_edge() {
        let t = maxwellian(SpringLaw::default(), None).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..8 {
            let r = 10f64.sqrt() * (1.0 - 10f64.powi(-k));
            let v = t.radial(r);
            assert!(v < last);
            last = v;
        }
        assert!(last < 1e-30);
    }

    #[test]
    fn rouse_eigenvalue() {
        let p = PhysicalParams::new(1.0, 0.1, 1.0, 1.0, 0.0, PhysicalParams::rouse_chain(2)).unwrap();
        assert!((p.a0 - 1.0).abs() < 1e-13);
        assert!(PhysicalParams::new(1.0, 0.1, 1.0, 1.0, 0.0, vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(cutoff_t(1.0, 0.5), 0.5);
        assert_eq!(cutoff_lambda(1.0, 0.5), 0.5);
        assert_eq!(cutoff_lambda(2.0, 4.0), 0.0);
        assert_eq!(cutoff_t(2.0, 4.0), cutoff_t(2.0, 9.0));
        assert!((cutoff_t(2.0, 4.0) - 3.0).abs() < 1e-15);
        // T_l is the primitive of Gamma_l
        for &s in &[1.2, 1.5, 1.9] {
            let q = integrate_adaptive(0.0, s, 1e-14, &|r| cutoff_gamma(r)).unwrap();
            assert!((cutoff_t(1.0, s) - q).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_examples() {
        let e1 = (-1.0f64).exp();
        assert_eq!(entropy(1.0), e1);
        assert!(entropy(e1).abs() < 1e-16);
        assert_eq!(entropy(0.0), e1);
        assert!((entropy_delta(0.01, 0.0) - (0.01 * 0.01f64.ln() + e1)).abs() < 1e-16);
    }
}
