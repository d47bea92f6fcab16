//! Energy-conserving time stepping of `eta_tt + K'(eta) + rho L'(eta) = g + F.nu`.
//!
//! Implicit midpoint in `(eta, eta_t)` with the averaged-vector-field
//! gradient of `K` and the midpoint gradient of the quadratic `L`. Without
//! forcing and damping the discrete energy is conserved up to the solver
//! tolerance. The nonlinear system is solved by a spectrally preconditioned
//! fixed-point iteration.

use super::koiter::KoiterModel;
use super::regularizer::Regularizer;
use crate::error::{Error, Result};
use crate::geometry::{check_admissible, ShellState};
use crate::linalg::max_abs;

/// Normal load on the shell nodes, split into the prescribed load and the
/// fluid traction.
#[derive(Clone, Debug, PartialEq)]
pub struct ShellForce {
    pub load: Vec<f64>,
    pub coupling: Vec<f64>,
}

impl ShellForce {
    pub fn zero(n: usize) -> Self {
        ShellForce { load: vec![0.0; n], coupling: vec![0.0; n] }
    }

    pub fn total(&self) -> Vec<f64> {
        self.load.iter().zip(self.coupling.iter()).map(|(a, b)| a + b).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.load.iter().chain(self.coupling.iter()).all(|x| x.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellEnergy {
    pub kinetic: f64,
    pub elastic: f64,
    /// `rho L(eta)`.
    pub regularizer: f64,
}

impl ShellEnergy {
    pub fn total(&self) -> f64 {
        self.kinetic + self.elastic + self.regularizer
    }
}

pub fn shell_energy(model: &KoiterModel, reg: &Regularizer, rho: f64, state: &ShellState) -> ShellEnergy {
    ShellEnergy {
        kinetic: 0.5 * model.inner(&state.eta_t, &state.eta_t),
        elastic: model.energy_unchecked(&state.eta),
        regularizer: rho * reg.energy(&state.eta),
    }
}

/// Shell dynamics parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellParams {
    pub rho: f64,
    /// Linear velocity damping (zero for the physical model).
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ShellParams {
    fn default() -> Self {
        ShellParams { rho: 1e-3, damping: 0.0, tol: 1e-13, max_iter: 200 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub iterations: usize,
    /// Size of the last fixed-point correction.
    pub update: f64,
}

/// Regularizer gradient with respect to the model's inner product.
pub fn regularizer_gradient(model: &KoiterModel, reg: &Regularizer, eta: &[f64], rho: f64) -> Vec<f64> {
    let n = eta.len() as f64;
    reg.gradient(eta, rho).into_iter().zip(model.weights.iter()).map(|(g, w)| g / (n * w)).collect()
}

/// Advances one step with the force already averaged over the step.
pub fn step_shell(
    state: &ShellState,
    force: &ShellForce,
    model: &KoiterModel,
    reg: &Regularizer,
    p: &ShellParams,
    dt: f64,
) -> Result<(ShellState, StepInfo)> {
    if !force.is_finite() {
        return Err(Error::Diverged("non-finite shell force".into()));
    }
    let f = force.total();
    let eta0 = &state.eta;
    let v0 = &state.eta_t;
    let c = p.damping;
    let residual = |delta: &[f64]| -> Vec<f64> {
        let eta1: Vec<f64> = eta0.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
        let mid: Vec<f64> = eta0.iter().zip(delta.iter()).map(|(a, d)| a + 0.5 * d).collect();
        let k = model.avf_gradient(eta0, &eta1);
        let l = regularizer_gradient(model, reg, &mid, p.rho);
        (0..delta.len()).map(|i| (2.0 / (dt * dt) + c / dt) * delta[i] - 2.0 / dt * v0[i] + k[i] + l[i] - f[i]).collect()
    };
    let shift = 2.0 / (dt * dt) + c / dt;
    let precond = |k1: f64, k2: f64| shift + 0.5 * model.bending_symbol(k1, k2) + p.rho * reg.symbol(k1, k2);
    let mut delta: Vec<f64> = v0.iter().map(|v| dt * v).collect();
    let mut iterations = 0;
    let mut update = f64::INFINITY;
    while iterations < p.max_iter {
        iterations += 1;
        let r = residual(&delta);
        let corr = reg.solve_diagonal(&r, precond);
        for (d, e) in delta.iter_mut().zip(corr.iter()) {
            *d -= e;
        }
        update = max_abs(&corr);
        if !update.is_finite() {
            return Err(Error::Diverged(format!("shell step at t = {} produced non-finite values", state.t)));
        }
        if update <= p.tol * (1.0 + max_abs(&delta)) {
            break;
        }
    }
    if max_abs(&residual(&delta)) * dt * dt > 1e3 * p.tol * (1.0 + max_abs(&delta)) {
        return Err(Error::NoConvergence(format!("shell step at t = {} stalled after {iterations} iterations (update {update:.3e})", state.t)));
    }
    let eta: Vec<f64> = eta0.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
    let eta_t: Vec<f64> = delta.iter().zip(v0.iter()).map(|(d, v)| 2.0 * d / dt - v).collect();
    let rep = check_admissible(&model.shell, &eta);
    if let Some(reason) = rep.reason {
        return Err(Error::Admissibility(format!("at t = {}: {reason}", state.t + dt)));
    }
    Ok((ShellState { eta, eta_t, t: state.t + dt }, StepInfo { iterations, update }))
}

/// Static equilibrium `K'(eta) + rho L'(eta) = g`. For shells whose energy is
/// invariant under constant shifts the mean of `g` must vanish and the
/// returned `eta` has zero mean.
pub fn solve_static(model: &KoiterModel, reg: &Regularizer, rho: f64, g: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = g.len();
    let shift_free = model.shell.surface.is_flat();
    let mut eta = vec![0.0; n];
    let precond = |k1: f64, k2: f64| {
        let s = model.bending_symbol(k1, k2) + 2.0 * rho * reg.symbol(k1, k2);
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };
    for _ in 0..max_iter {
        let k = model.gradient_unchecked(&eta);
        let l = regularizer_gradient(model, reg, &eta, rho);
        let r: Vec<f64> = (0..n).map(|i| k[i] + l[i] - g[i]).collect();
        if max_abs(&r) <= tol {
            return Ok(eta);
        }
        let corr = reg.solve_diagonal(&r, precond);
        for (e, c) in eta.iter_mut().zip(corr.iter()) {
            *e -= c;
        }
        if shift_free {
            let mean = eta.iter().sum::<f64>() / n as f64;
            eta.iter_mut().for_each(|e| *e -= mean);
        }
        if eta.iter().any(|e| !e.is_finite()) {
            return Err(Error::Diverged("static shell solve".into()));
        }
    }
    Err(Error::NoConvergence(format!("static shell solve did not reach residual {tol:.1e}")))
}
