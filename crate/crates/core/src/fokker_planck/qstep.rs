//! Backward-Euler step in configuration space for one spatial cell.

use super::qgrid::QGrid;
use crate::error::Result;
use crate::linalg::TripletBuilder;
use crate::polymer_model::cutoff_gamma_l;

/// Drag flux coefficient `kappa : moment` of a face (flux from `lo` to `hi`).
#[inline]
pub fn drag_coefficient(kappa: &[[f64; 2]; 2], moment: &[[f64; 2]; 2]) -> f64 {
    kappa[0][0] * moment[0][0] + kappa[0][1] * moment[0][1] + kappa[1][0] * moment[1][0] + kappa[1][1] * moment[1][1]
}

/// Cutoff factor of the upwind cell, evaluated on the lagged state.
#[inline]
fn upwind_gamma(a: f64, ell: f64, lo: f64, hi: f64) -> f64 {
    if !ell.is_finite() {
        return 1.0;
    }
    let up = if a >= 0.0 { lo } else { hi };
    cutoff_gamma_l(ell, up)
}

/// Assembles `m psi' + dt [drag + diff * TPFA] psi' = m psi`.
pub fn assemble(grid: &QGrid, kappa: &[[f64; 2]; 2], lagged: &[f64], ell: f64, diff: f64, dt: f64) -> TripletBuilder {
    let n = grid.len();
    let mut b = TripletBuilder::square(n);
    for (k, &m) in grid.mass.iter().enumerate() {
        b.add(k, k, m);
    }
    for f in &grid.faces {
        let a = drag_coefficient(kappa, &f.moment);
        let g = upwind_gamma(a, ell, lagged[f.lo], lagged[f.hi]);
        let (ap, am) = (dt * a.max(0.0) * g, dt * (-a).max(0.0) * g);
        b.add(f.lo, f.lo, ap);
        b.add(f.lo, f.hi, -am);
        b.add(f.hi, f.lo, -ap);
        b.add(f.hi, f.hi, am);
        let w = dt * diff * f.trans;
        b.add(f.lo, f.lo, w);
        b.add(f.lo, f.hi, -w);
        b.add(f.hi, f.lo, -w);
        b.add(f.hi, f.hi, w);
    }
    b
}

/// Result of a configuration step in one spatial cell.
#[derive(Clone, Debug)]
pub struct QStepOut {
    pub psi: Vec<f64>,
    /// Truncated gradient-form moment `sum_f moment_f Gamma_up (psi_hi - psi_lo)`.
    pub stress: [[f64; 2]; 2],
    /// `sum_f trans_f (sqrt psi_hi - sqrt psi_lo)^2`.
    pub fisher: f64,
}

pub fn step(grid: &QGrid, kappa: &[[f64; 2]; 2], psi: &[f64], ell: f64, diff: f64, dt: f64) -> Result<QStepOut> {
    let b = assemble(grid, kappa, psi, ell, diff, dt);
    let rhs: Vec<f64> = grid.mass.iter().zip(psi.iter()).map(|(m, p)| m * p).collect();
    let new = b.factor()?.solve(&rhs);
    Ok(QStepOut { stress: truncated_moment(grid, kappa, psi, &new, ell), fisher: fisher(grid, &new), psi: new })
}

/// Truncated gradient-form moment with the cutoff of the upwind cell of `lagged`.
pub fn truncated_moment(grid: &QGrid, kappa: &[[f64; 2]; 2], lagged: &[f64], psi: &[f64], ell: f64) -> [[f64; 2]; 2] {
    let mut s = [[0.0; 2]; 2];
    for f in &grid.faces {
        let a = drag_coefficient(kappa, &f.moment);
        let g = upwind_gamma(a, ell, lagged[f.lo], lagged[f.hi]);
        let d = g * (psi[f.hi] - psi[f.lo]);
        for x in 0..2 {
            for y in 0..2 {
                s[x][y] += f.moment[x][y] * d;
            }
        }
    }
    s
}

pub fn fisher(grid: &QGrid, psi: &[f64]) -> f64 {
    grid.faces
        .iter()
        .map(|f| {
            let d = psi[f.hi].max(0.0).sqrt() - psi[f.lo].max(0.0).sqrt();
            f.trans * d * d
        })
        .sum()
}
