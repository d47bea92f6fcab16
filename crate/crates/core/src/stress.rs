//! Kramers elastic stress in force-law, gradient and truncated forms, and
//! the drag power.

use crate::fokker_planck::qgrid::QGrid;
use crate::fokker_planck::{ConfigDensity, FokkerPlanck};
use crate::polymer_model::{cutoff_t, MaxwellianTable, SpringLaw};
use crate::quad::gauss_legendre_on;

pub type Mat2 = [[f64; 2]; 2];

pub fn add(a: &Mat2, b: &Mat2) -> Mat2 {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

pub fn scale(a: &Mat2, s: f64) -> Mat2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

pub fn contract(a: &Mat2, b: &Mat2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

pub fn deviatoric(a: &Mat2) -> Mat2 {
    let h = 0.5 * (a[0][0] + a[1][1]);
    [[a[0][0] - h, a[0][1]], [a[1][0], a[1][1] - h]]
}

pub fn frobenius(a: &Mat2) -> f64 {
    contract(a, a).sqrt()
}

/// Per-cell stress tensors with their decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct StressField {
    /// Total stress per cell.
    pub total: Vec<Mat2>,
    /// Spring part `int psi_hat M F (x) q` per cell (without `k`).
    pub spring: Vec<Mat2>,
    /// `-k (K + 1) Xi` per cell (coefficient of the identity).
    pub iso_linear: Vec<f64>,
    /// `-eth Xi^2` per cell.
    pub iso_quadratic: Vec<f64>,
}

fn assemble(fp: &FokkerPlanck, spring: Vec<Mat2>, xi: &[f64]) -> StressField {
    let p = &fp.model.params;
    let chain = fp.model.law.chain as f64;
    let iso_linear: Vec<f64> = xi.iter().map(|x| -p.k * (chain + 1.0) * x).collect();
    let iso_quadratic: Vec<f64> = xi.iter().map(|x| -p.eth * x * x).collect();
    let total = spring
        .iter()
        .zip(iso_linear.iter().zip(iso_quadratic.iter()))
        .map(|(s, (a, b))| {
            let mut t = scale(s, p.k);
            t[0][0] += a + b;
            t[1][1] += a + b;
            t
        })
        .collect();
    StressField { total, spring, iso_linear, iso_quadratic }
}

/// Stress from the force-law form `k int psi_hat M F (x) q - k(K+1) Xi I - eth Xi^2 I`.
pub fn kramers_stress(state: &ConfigDensity, xi: &[f64], fp: &FokkerPlanck) -> StressField {
    let spring = (0..state.ncells).map(|c| fp.grid.force_law_moment(state.cell(c))).collect();
    assemble(fp, spring, xi)
}

/// The same stress with the spring part in gradient form
/// `int M grad psi_hat (x) q + Xi I`.
pub fn kramers_stress_gradient_form(state: &ConfigDensity, xi: &[f64], fp: &FokkerPlanck) -> StressField {
    let spring = (0..state.ncells)
        .map(|c| {
            let mut s = fp.grid.gradient_moment(state.cell(c));
            let m = fp.grid.marginal(state.cell(c));
            s[0][0] += m;
            s[1][1] += m;
            s
        })
        .collect();
    assemble(fp, spring, xi)
}

/// Constant in `sup |T_l| <= C l` for the FENE dumbbell (b = 10) on the
/// 8 x 16 configuration grid, measured once on densities with isolated
/// spikes of every height (worst case 0.0578) and frozen.
pub const TRUNCATION_CONSTANT: f64 = 0.058;

/// Per-cell truncated spring parts `int M grad T_l(psi_hat) (x) q` (gradient form).
pub fn truncated_spring_parts(state: &ConfigDensity, grid: &QGrid, ell: f64) -> Vec<Mat2> {
    (0..state.ncells)
        .map(|c| {
            let t: Vec<f64> = state.cell(c).iter().map(|&s| cutoff_t(ell, s)).collect();
            grid.gradient_moment(&t)
        })
        .collect()
}

/// Truncated stress: the gradient form with `psi_hat` replaced by `T_l(psi_hat)`.
pub fn truncated_stress(state: &ConfigDensity, xi: &[f64], fp: &FokkerPlanck, ell: f64) -> StressField {
    let spring = truncated_spring_parts(state, &fp.grid, ell)
        .into_iter()
        .zip(xi.iter())
        .map(|(mut s, x)| {
            s[0][0] += x;
            s[1][1] += x;
            s
        })
        .collect();
    assemble(fp, spring, xi)
}

/// `sum_x A_x T_x : grad v_x`.
pub fn drag_power(t: &[Mat2], grad_v: &[Mat2], areas: &[f64]) -> f64 {
    t.iter().zip(grad_v.iter()).zip(areas.iter()).map(|((a, g), w)| w * contract(a, g)).sum()
}

/// Continuous force-law and gradient-form spring moments of a smooth
/// `psi_hat` over the whole ball, by Gauss-Legendre in `r` and the periodic
/// trapezoid rule in `theta`. Independent of any configuration grid.
pub fn continuous_forms(
    table: &MaxwellianTable,
    psi: &dyn Fn([f64; 2]) -> f64,
    grad: &dyn Fn([f64; 2]) -> [f64; 2],
    nr: usize,
    ntheta: usize,
) -> (Mat2, Mat2, f64) {
    let law: SpringLaw = table.law;
    let rad = law.radius().unwrap_or(crate::fokker_planck::qgrid::HOOKEAN_RADIUS);
    let mut fl = [[0.0; 2]; 2];
    let mut gr = [[0.0; 2]; 2];
    let mut mass = 0.0;
    let dth = std::f64::consts::TAU / ntheta as f64;
    // split the radial interval so nodes cluster toward the edge
    let breaks = [0.0, 0.5 * rad, 0.8 * rad, 0.95 * rad, rad];
    for w in breaks.windows(2) {
        for (r, wr) in gauss_legendre_on(nr, w[0], w[1]) {
            let m = table.radial(r);
            let u = law.potential_slope(0.5 * r * r);
            for k in 0..ntheta {
                let t = (k as f64 + 0.5) * dth;
                let q = [r * t.cos(), r * t.sin()];
                let wgt = wr * dth * r * m;
                let p = psi(q);
                let g = grad(q);
                mass += wgt * p;
                for a in 0..2 {
                    for b in 0..2 {
                        fl[a][b] += wgt * p * u * q[a] * q[b];
                        gr[a][b] += wgt * g[a] * q[b];
                    }
                }
            }
        }
    }
    (fl, gr, mass)
}
