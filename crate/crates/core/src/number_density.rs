//! Polymer number density: marginal of the configuration density and an
//! independent transport-diffusion solver with renormalized checks.

use crate::error::{Error, Result};
use crate::fokker_planck::xstep::{transmissibility, Fluxes, TransportStep};
use crate::fokker_planck::{ConfigDensity, FokkerPlanck};
use crate::geometry::ColumnMesh;

/// Tolerance of the L-infinity bound.
pub const TOL_MAX: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct NumberDensity {
    pub xi: Vec<f64>,
    pub t: f64,
}

impl NumberDensity {
    pub fn constant(n: usize, c: f64) -> Self {
        NumberDensity { xi: vec![c; n], t: 0.0 }
    }

    pub fn sup(&self) -> f64 {
        self.xi.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn min(&self) -> f64 {
        self.xi.iter().fold(f64::INFINITY, |m, &x| m.min(x))
    }

    pub fn mass(&self, mesh: &ColumnMesh) -> f64 {
        self.xi.iter().zip(mesh.areas().iter()).map(|(x, a)| x * a).sum()
    }

    pub fn l2_sq(&self, mesh: &ColumnMesh) -> f64 {
        self.xi.iter().zip(mesh.areas().iter()).map(|(x, a)| a * x * x).sum()
    }

    /// Discrete `||grad Xi||^2` from the two-point transmissibilities.
    pub fn grad_sq(&self, mesh: &ColumnMesh) -> f64 {
        transmissibility(mesh).dirichlet_form(mesh.nx, mesh.nz, &self.xi, &self.xi)
    }
}

pub fn marginalize(state: &ConfigDensity, fp: &FokkerPlanck) -> NumberDensity {
    NumberDensity { xi: fp.marginal(state), t: state.t }
}

/// Parameters of one step.
pub struct XiStep<'a> {
    pub old: &'a ColumnMesh,
    pub new: &'a ColumnMesh,
    pub fluxes: &'a Fluxes,
    pub eps: f64,
    /// Diffusion theta (1 = backward Euler, 1/2 = midpoint).
    pub theta: f64,
    pub dt: f64,
    /// Optional volumetric source, already averaged over the step.
    pub source: Option<&'a [f64]>,
}

pub fn step_xi(xi: &NumberDensity, s: &XiStep) -> Result<NumberDensity> {
    if !(s.theta >= 0.5 && s.theta <= 1.0) {
        return Err(Error::Config(format!("theta must lie in [1/2, 1], got {}", s.theta)));
    }
    let ts = TransportStep::new(s.old, s.new, s.fluxes, s.eps, s.theta, s.dt)?;
    let out = match s.source {
        Some(src) => ts.apply_with_source(&xi.xi, src),
        None => ts.apply(&xi.xi),
    };
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::Diverged("non-finite number density".into()));
    }
    Ok(NumberDensity { xi: out, t: xi.t + s.dt })
}

/// Asserts `||Xi(t)||_inf <= ||Xi_0||_inf (1 + TOL_MAX)` and `Xi >= -1e-10`.
pub fn check_max_principle(initial_sup: f64, xi: &NumberDensity) -> Result<()> {
    let sup = xi.sup();
    if sup > initial_sup * (1.0 + TOL_MAX) {
        return Err(Error::Inequality(format!("number density maximum principle violated at t = {}: {sup:.12e} > {initial_sup:.12e}", xi.t)));
    }
    if xi.min() < -1e-10 {
        return Err(Error::Inequality(format!("negative number density {:.3e} at t = {}", xi.min(), xi.t)));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenormReport {
    /// `int theta(Xi(t))` per snapshot.
    pub values: Vec<f64>,
    /// Largest `int theta(Xi(t)) - int theta(Xi_0)`, relative to the initial value.
    pub worst: f64,
}

/// Checks `int theta(Xi(t)) <= int theta(Xi_0) + slack` over a sequence of
/// `(cell areas, Xi)` snapshots.
pub fn renormalized_check(snapshots: &[(Vec<f64>, Vec<f64>)], theta: &dyn Fn(f64) -> f64, slack: f64) -> Result<RenormReport> {
    let values: Vec<f64> = snapshots.iter().map(|(a, x)| a.iter().zip(x.iter()).map(|(ai, xi)| ai * theta(*xi)).sum()).collect();
    let v0 = values.first().copied().unwrap_or(0.0);
    let scale = v0.abs().max(1e-300);
    let mut worst = f64::NEG_INFINITY;
    for (n, v) in values.iter().enumerate() {
        let rel = (v - v0) / scale;
        worst = worst.max(rel);
        if rel > slack {
            return Err(Error::Inequality(format!("renormalized bound violated at snapshot {n}: relative excess {rel:.3e}")));
        }
    }
    Ok(RenormReport { values, worst })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stays_constant() {
        let m = ColumnMesh::flat(5, 4, 1.0, 1.0, 0.5);
        let f = Fluxes::zero(5, 4);
        let s = XiStep { old: &m, new: &m, fluxes: &f, eps: 0.1, theta: 1.0, dt: 0.1, source: None };
        let x = step_xi(&NumberDensity::constant(20, 0.7), &s).unwrap();
        assert!(x.xi.iter().all(|v| (v - 0.7).abs() < 1e-14));
    }

    #[test]
    fn linear_renormalization_is_mass() {
        let a = vec![0.5, 0.25, 0.25];
        let snaps = vec![(a.clone(), vec![1.0, 2.0, 3.0]), (a.clone(), vec![2.0, 1.5, 1.5])];
        let r = renormalized_check(&snaps, &|s| s, 1e-12).unwrap();
        assert!((r.values[0] - r.values[1]).abs() < 1e-15);
    }
}
