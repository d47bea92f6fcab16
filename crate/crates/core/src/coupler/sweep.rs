//! Refinement in the regularization parameter: the same data run at a
//! decreasing sequence of `rho`, compared level to level.

use super::fixed_point::{fixed_point_solve, RunOptions, Trajectory};
use super::{CoupledProblem, CoupledState};
use crate::error::{Error, Result};
use crate::linalg::TripletBuilder;
use crate::shell_dynamics::regularizer_gradient;
use rayon::prelude::*;
use std::f64::consts::TAU;

#[derive(Debug)]
pub struct SweepLevel {
    pub rho: f64,
    /// `sup_t rho L(eta(t))`.
    pub regularizer_sup: f64,
    pub trajectory: Trajectory,
}

#[derive(Debug)]
pub struct SweepReport {
    pub levels: Vec<SweepLevel>,
    /// `L2(I; L2)` differences of `(u, eta, Xi)` between consecutive levels.
    pub cauchy: Vec<[f64; 3]>,
    /// Ratios `sup rho L` of a level to the next.
    pub regularizer_ratios: Vec<f64>,
    pub monotone: bool,
}

impl SweepReport {
    pub fn all_completed(&self) -> bool {
        self.levels.iter().all(|l| l.trajectory.stopped.is_none())
    }
}

fn difference(p: &CoupledProblem, a: &Trajectory, b: &Trajectory) -> [f64; 3] {
    let dt = p.dt;
    let hxz = p.period() / p.nx() as f64 * p.height / p.nz as f64;
    let w = p.model.weights[0];
    let mut d = [0.0; 3];
    for (sa, sb) in a.samples.iter().zip(b.samples.iter()).skip(1) {
        let dv: Vec<f64> = sa.v.iter().zip(sb.v.iter()).map(|(x, y)| x - y).collect();
        d[0] += dt * 2.0 * p.norm_ops.kinetic_energy(&dv);
        d[1] += dt * w * sa.eta.iter().zip(sb.eta.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        d[2] += dt * hxz * sa.xi.iter().zip(sb.xi.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    }
    d.map(f64::sqrt)
}

/// Runs `build(rho)` to `opts.t_end` for every level (concurrently) and
/// compares consecutive levels. The builder owns the data schedule, in
/// particular the per-level mollification of the initial shell.
pub fn rho_refinement_study<F>(rhos: &[f64], build: F, opts: &RunOptions) -> Result<SweepReport>
where
    F: Fn(f64) -> Result<(CoupledProblem, CoupledState)> + Sync,
{
    let runs: Vec<Result<(CoupledProblem, SweepLevel)>> = rhos
        .par_iter()
        .map(|&rho| {
            let (p, init) = build(rho)?;
            let trajectory = fixed_point_solve(&p, init, opts)?;
            let regularizer_sup = trajectory.records.iter().fold(trajectory.initial.regularizer, |m, r| m.max(r.breakdown.regularizer));
            Ok((p, SweepLevel { rho, regularizer_sup, trajectory }))
        })
        .collect();
    let mut problems = Vec::new();
    let mut levels = Vec::new();
    for r in runs {
        let (p, l) = r?;
        problems.push(p);
        levels.push(l);
    }
    let cauchy: Vec<[f64; 3]> = levels.windows(2).zip(problems.iter()).map(|(l, p)| difference(p, &l[0].trajectory, &l[1].trajectory)).collect();
    let regularizer_ratios: Vec<f64> = levels.windows(2).map(|l| l[0].regularizer_sup / l[1].regularizer_sup).collect();
    let monotone = cauchy.windows(2).all(|c| (0..3).all(|k| c[1][k] < c[0][k]));
    Ok(SweepReport { levels, cauchy, regularizer_ratios, monotone })
}

/// Initial data on the time-periodic orbit of the linearized fluid-shell
/// system (flat mesh, Stokes flow, polymers left out) under the shell load
/// `amplitude cos(2 pi m x / P) sin(omega t)`. Returns `(eta0, eta1, v0)`.
///
/// Started from rest, a forced run carries a free oscillation whose
/// amplitude over any finite time shrinks as the shell stiffens; on the
/// periodic orbit the response is set by the forcing alone.
pub fn periodic_breathing_data(p: &CoupledProblem, amplitude: f64, mode: usize, omega: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if !(omega > 0.0) {
        return Err(Error::Config(format!("forcing frequency must be positive, got {omega}")));
    }
    let ops = &p.norm_ops;
    let lay = p.layout;
    let (n, nc, nx) = (lay.len(), lay.ncells(), lay.nx);
    let mass = ops.mass_matrix();
    let visc = ops.t.transpose().matmul(&ops.lap.matmul(&ops.t));
    let mu = p.mu();
    let w = p.model.weights[0];
    // linearized shell stiffness, column by column
    let h = 1e-6;
    let mut ks = vec![vec![0.0; nx]; nx];
    let mut e = vec![0.0; nx];
    for j in 0..nx {
        e[j] = h;
        let gp = p.model.gradient_unchecked(&e);
        e[j] = -h;
        let gm = p.model.gradient_unchecked(&e);
        e[j] = 1.0;
        let gl = regularizer_gradient(&p.model, &p.reg, &e, p.kernel.rho);
        e[j] = 0.0;
        for i in 0..nx {
            ks[i][j] = (gp[i] - gm[i]) / (2.0 * h) + gl[i];
        }
    }
    // unknowns [Vr, Vi, pr, pi]; time dependence Im(X exp(i omega t))
    let dim = 2 * n + 2 * nc;
    let mut b = TripletBuilder::square(dim);
    for (i, j, x) in mass.to_triplets() {
        b.add(i, n + j, -omega * x);
        b.add(n + i, j, omega * x);
    }
    for (i, j, x) in visc.to_triplets() {
        b.add(i, j, mu * x);
        b.add(n + i, n + j, mu * x);
    }
    for (c, j, x) in ops.div.to_triplets() {
        b.add(j, 2 * n + c, -x);
        b.add(n + j, 2 * n + nc + c, -x);
        b.add(2 * n + c, j, x);
        b.add(2 * n + nc + c, n + j, x);
    }
    // shell rows: w (i omega sigma + Ks sigma / (i omega)) = w g
    for i in 0..nx {
        let k = lay.top(i);
        b.add(k, n + k, -w * omega);
        b.add(n + k, k, w * omega);
        for j in 0..nx {
            let kj = lay.top(j);
            b.add(k, n + kj, w * ks[i][j] / omega);
            b.add(n + k, kj, -w * ks[i][j] / omega);
        }
    }
    let mut rhs = vec![0.0; dim];
    for i in 0..nx {
        rhs[lay.top(i)] = w * amplitude * (TAU * mode as f64 * i as f64 / nx as f64).cos();
    }
    let sol = b.factor()?.solve(&rhs);
    if sol.iter().any(|x| !x.is_finite()) {
        return Err(Error::Diverged("periodic response solve produced non-finite values".into()));
    }
    let v0 = sol[n..2 * n].to_vec();
    let eta1 = lay.shell_velocity(&v0).to_vec();
    let eta0: Vec<f64> = (0..nx).map(|i| -sol[lay.top(i)] / omega).collect();
    Ok((eta0, eta1, v0))
}
