//! Polar finite-volume grid on the 2D configuration ball.
//!
//! Cell 0 is the central disk `r < r_1`. Ring `i` (1..nr) sector `j` is cell
//! `1 + (i - 1) n_theta + j`. Radii follow `r_i = R (1 - (1 - i/nr)^2)`, which
//! refines toward the ball edge where the FENE weight degenerates.

use crate::error::{Error, Result};
use crate::polymer_model::{MaxwellianTable, SpringKind};
use crate::quad::gauss_legendre_on;

/// Truncation radius used for Hookean springs.
pub const HOOKEAN_RADIUS: f64 = 8.0;

const RADIAL_NODES: usize = 16;

/// Interior face between cells `lo` and `hi` with unit normal pointing from
/// `lo` to `hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QFace {
    pub lo: usize,
    pub hi: usize,
    /// Two-point diffusion weight `int_f M dS / distance`.
    pub trans: f64,
    /// Drag moment `int_f M n (x) q dS`; the drag flux is `kappa : moment`.
    pub moment: [[f64; 2]; 2],
}

#[derive(Clone, Debug)]
pub struct QGrid {
    pub nr: usize,
    pub ntheta: usize,
    pub radius: f64,
    pub radii: Vec<f64>,
    /// `int_cell M dq` (with the 1/m floor if configured).
    pub mass: Vec<f64>,
    /// `int_cell M F (x) q dq`, the force-law stress moment.
    pub force_moment: Vec<[[f64; 2]; 2]>,
    /// `int_cell M q (x) q dq`.
    pub second_moment: Vec<[[f64; 2]; 2]>,
    pub faces: Vec<QFace>,
    /// Radial extent and angular sector per cell (center disk: full circle).
    pub cells: Vec<([f64; 2], [f64; 2])>,
}

/// `int_{a}^{b} e_r (x) e_r dtheta`.
pub fn angular_rr(a: f64, b: f64) -> [[f64; 2]; 2] {
    let cc = |t: f64| 0.5 * t + 0.25 * (2.0 * t).sin();
    let ss = |t: f64| 0.5 * t - 0.25 * (2.0 * t).sin();
    let cs = |t: f64| 0.5 * t.sin() * t.sin();
    [[cc(b) - cc(a), cs(b) - cs(a)], [cs(b) - cs(a), ss(b) - ss(a)]]
}

fn scale2(m: [[f64; 2]; 2], s: f64) -> [[f64; 2]; 2] {
    [[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]]
}

impl QGrid {
    pub fn new(table: &MaxwellianTable, nr: usize, ntheta: usize) -> Result<Self> {
        if table.law.dim != 2 || table.law.chain != 1 {
            return Err(Error::Config("the configuration grid supports a single 2D spring".into()));
        }
        if nr < 2 || ntheta < 3 {
            return Err(Error::Config("configuration grid needs nr >= 2 and ntheta >= 3".into()));
        }
        let radius = match table.law.kind {
            SpringKind::Hookean => HOOKEAN_RADIUS,
            _ => table.law.b.sqrt(),
        };
        let floor = table.m.map(|m| 1.0 / m).unwrap_or(0.0);
        let law = table.law;
        let m_exact = |r: f64| table.radial(r);
        let m_w = |r: f64| table.radial(r) + floor;
        let mf = |r: f64| table.radial(r) * law.potential_slope(0.5 * r * r);
        let radii: Vec<f64> = (0..=nr)
            .map(|i| {
                let s = 1.0 - i as f64 / nr as f64;
                radius * (1.0 - s * s)
            })
            .collect();
        let rint = |a: f64, b: f64, g: &dyn Fn(f64) -> f64| -> f64 { gauss_legendre_on(RADIAL_NODES, a, b).iter().map(|&(x, w)| w * g(x)).sum() };
        let dth = std::f64::consts::TAU / ntheta as f64;
        let ncell = 1 + (nr - 1) * ntheta;
        let mut mass = vec![0.0; ncell];
        let mut force_moment = vec![[[0.0; 2]; 2]; ncell];
        let mut second_moment = vec![[[0.0; 2]; 2]; ncell];
        let mut cells = vec![([0.0; 2], [0.0; 2]); ncell];

        // center disk
        let r1 = radii[1];
        let tau = std::f64::consts::TAU;
        mass[0] = tau * rint(0.0, r1, &|r| m_w(r) * r);
        let pi = std::f64::consts::PI;
        let iso = [[pi, 0.0], [0.0, pi]];
        force_moment[0] = scale2(iso, rint(0.0, r1, &|r| mf(r) * r * r * r));
        second_moment[0] = scale2(iso, rint(0.0, r1, &|r| m_exact(r) * r * r * r));
        cells[0] = ([0.0, r1], [0.0, tau]);
        for i in 1..nr {
            let (a, b) = (radii[i], radii[i + 1]);
            let mr = rint(a, b, &|r| m_w(r) * r);
            let fr = rint(a, b, &|r| mf(r) * r * r * r);
            let sr = rint(a, b, &|r| m_exact(r) * r * r * r);
            for j in 0..ntheta {
                let c = 1 + (i - 1) * ntheta + j;
                let (t0, t1) = (j as f64 * dth, (j + 1) as f64 * dth);
                mass[c] = mr * dth;
                let e = angular_rr(t0, t1);
                force_moment[c] = scale2(e, fr);
                second_moment[c] = scale2(e, sr);
                cells[c] = ([a, b], [t0, t1]);
            }
        }

        let center = |i: usize| if i == 0 { 0.0 } else { 0.5 * (radii[i] + radii[i + 1]) };
        let mut faces = Vec::new();
        // radial faces at r_{i+1}, between ring i (or the disk) and ring i+1
        for i in 0..nr - 1 {
            let rf = radii[i + 1];
            let dist = center(i + 1) - center(i);
            let w = m_w(rf) * rf * dth / dist;
            for j in 0..ntheta {
                let lo = if i == 0 { 0 } else { 1 + (i - 1) * ntheta + j };
                let hi = 1 + i * ntheta + j;
                let (t0, t1) = (j as f64 * dth, (j + 1) as f64 * dth);
                let moment = scale2(angular_rr(t0, t1), m_exact(rf) * rf * rf);
                faces.push(QFace { lo, hi, trans: w, moment });
            }
        }
        // angular faces at theta_{j+1} within each ring
        for i in 1..nr {
            let (a, b) = (radii[i], radii[i + 1]);
            let w = rint(a, b, &|r| m_w(r) / r) / dth;
            let mr = rint(a, b, &|r| m_exact(r) * r);
            for j in 0..ntheta {
                let lo = 1 + (i - 1) * ntheta + j;
                let hi = 1 + (i - 1) * ntheta + (j + 1) % ntheta;
                let t = (j + 1) as f64 * dth;
                let (s, c) = t.sin_cos();
                // n = e_theta = (-s, c), q direction e_r = (c, s)
                let moment = [[-s * c * mr, -s * s * mr], [c * c * mr, c * s * mr]];
                faces.push(QFace { lo, hi, trans: w, moment });
            }
        }
        Ok(QGrid { nr, ntheta, radius, radii, mass, force_moment, second_moment, faces, cells })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Representative point of a cell (polar centroid of the sector).
    pub fn centroid(&self, c: usize) -> [f64; 2] {
        let ([a, b], [t0, t1]) = self.cells[c];
        if c == 0 {
            return [0.0, 0.0];
        }
        let r = 0.5 * (a + b);
        let t = 0.5 * (t0 + t1);
        [r * t.cos(), r * t.sin()]
    }

    /// Cell average of a function of `q`, by tensor Gauss quadrature in polar coordinates.
    pub fn cell_average(&self, c: usize, f: &dyn Fn([f64; 2]) -> f64) -> f64 {
        let ([a, b], [t0, t1]) = self.cells[c];
        let rn = gauss_legendre_on(12, a, b);
        let tn = gauss_legendre_on(if c == 0 { 24 } else { 12 }, t0, t1);
        let mut num = 0.0;
        let mut den = 0.0;
        for &(r, wr) in &rn {
            for &(t, wt) in &tn {
                let w = wr * wt * r;
                num += w * f([r * t.cos(), r * t.sin()]);
                den += w;
            }
        }
        num / den
    }

    /// Gradient-form stress moment `sum_f moment_f (g_hi - g_lo)` for cell values `g`.
    pub fn gradient_moment(&self, g: &[f64]) -> [[f64; 2]; 2] {
        let mut s = [[0.0; 2]; 2];
        for f in &self.faces {
            let d = g[f.hi] - g[f.lo];
            for a in 0..2 {
                for b in 0..2 {
                    s[a][b] += f.moment[a][b] * d;
                }
            }
        }
        s
    }

    /// Force-law stress moment `sum_c force_moment_c g_c`.
    pub fn force_law_moment(&self, g: &[f64]) -> [[f64; 2]; 2] {
        let mut s = [[0.0; 2]; 2];
        for (m, &v) in self.force_moment.iter().zip(g.iter()) {
            for a in 0..2 {
                for b in 0..2 {
                    s[a][b] += m[a][b] * v;
                }
            }
        }
        s
    }

    /// Marginal `sum_c mass_c g_c`.
    pub fn marginal(&self, g: &[f64]) -> f64 {
        self.mass.iter().zip(g.iter()).map(|(m, v)| m * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymer_model::{maxwellian, SpringLaw};

    #[test]
    fn masses_sum_to_one() {
        let t = maxwellian(SpringLaw::default(), None).unwrap();
        let g = QGrid::new(&t, 12, 16).unwrap();
        assert!((g.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(g.len(), 1 + 11 * 16);
        assert!(g.mass.iter().all(|&m| m > 0.0));
    }

    #[test]
    fn divergence_theorem_per_cell() {
        // sum of outward face moments = -int_cell d_a(M q_b) = force moment - mass I
        let t = maxwellian(SpringLaw::default(), None).unwrap();
        let g = QGrid::new(&t, 10, 12).unwrap();
        let mut out = vec![[[0.0; 2]; 2]; g.len()];
        for f in &g.faces {
            for a in 0..2 {
                for b in 0..2 {
                    out[f.lo][a][b] += f.moment[a][b];
                    out[f.hi][a][b] -= f.moment[a][b];
                }
            }
        }
        for c in 0..g.len() {
            for a in 0..2 {
                for b in 0..2 {
                    let id = if a == b { g.mass[c] } else { 0.0 };
                    let rhs = -(g.force_moment[c][a][b] - id);
                    assert!((out[c][a][b] - rhs).abs() < 1e-12, "cell {c}: {} vs {rhs}", out[c][a][b]);
                }
            }
        }
    }

    #[test]
    fn hookean_second_moment_is_identity() {
        let law = SpringLaw::new(SpringKind::Hookean, 0.0, 1, 2).unwrap();
        let t = maxwellian(law, None).unwrap();
        let g = QGrid::new(&t, 24, 8).unwrap();
        let mut s = [[0.0; 2]; 2];
        for m in &g.second_moment {
            for a in 0..2 {
                for b in 0..2 {
                    s[a][b] += m[a][b];
                }
            }
        }
        assert!((s[0][0] - 1.0).abs() < 1e-8 && (s[1][1] - 1.0).abs() < 1e-8 && s[0][1].abs() < 1e-12);
    }
}
