//! Windowed damped Picard iteration for the regularized coupled system.
//!
//! On a window of `N` steps the iterate is a shell trajectory `xi_n` and a
//! fluid trajectory `v_n`. One sweep
//!   1. mollifies the midpoint velocities of `v` in time and space,
//!   2. moves the polymer mesh with the mollified shell velocity and
//!      advances the configuration density with the mollified flow,
//!   3. advances fluid and shell together with the shell's elastic force
//!      evaluated on `xi` and the polymer stress acting through the adjoint
//!      of the mollifier.
//!
//! The iterate is then relaxed towards the result. Because the stress is
//! applied through the adjoint, the drag power seen by the polymers and the
//! stress work seen by the fluid cancel at convergence.

use super::mollifier::regularize_velocity;
use super::{CoupledProblem, CoupledState};
use crate::diagnostics::{assemble_breakdown, Accumulators, BreakdownInput, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::fluid::solver::midpoint_mesh;
use crate::fluid::{step_fluid, Boundary, FluidStep, StaggeredOps};
use crate::fokker_planck::StepInput;
use crate::geometry::{ColumnMesh, ShellState};
use crate::linalg::dot;
use crate::number_density::marginalize;
use crate::shell_dynamics::regularizer_gradient;
use crate::stress::{deviatoric, scale, Mat2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointConfig {
    /// Relaxation factor in `(0, 1]`.
    pub damping: f64,
    pub max_iter: usize,
    /// Relative tolerance on the iterate change in the discrete `L2(I; L2)` norm.
    pub tol: f64,
    /// Longest window `T*`.
    pub window: f64,
    /// Stop once `sup|eta| >= L (1 - guard_margin)`.
    pub guard_margin: f64,
    /// Give up on a window after this many iterations without a new best residual.
    pub stagnation: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig { damping: 0.5, max_iter: 200, tol: 1e-7, window: 0.02, guard_margin: 1e-3, stagnation: 25 }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!("fixed-point damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("fixed-point tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 || self.stagnation == 0 {
            return Err(Error::Config("fixed-point iteration limits must be positive".into()));
        }
        if !(self.window > 0.0) {
            return Err(Error::Config(format!("window length must be positive, got {}", self.window)));
        }
        if !(0.0..1.0).contains(&self.guard_margin) {
            return Err(Error::Config(format!("guard margin must lie in [0, 1), got {}", self.guard_margin)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub t_end: f64,
    /// Keep a full state every this many steps (0 keeps none besides the last).
    pub snapshot_every: usize,
}

/// One Picard iteration on one window attempt.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub window: usize,
    pub t0: f64,
    pub steps: usize,
    pub iteration: usize,
    pub residual: f64,
    pub norm: f64,
}

/// Diagnostics of one accepted step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub breakdown: EnergyBreakdown,
    pub min_psi: f64,
    pub xi_max: f64,
    pub sup_eta: f64,
    pub max_divergence: f64,
    pub convection_work: f64,
    pub trace_error: f64,
    pub window: usize,
    pub iterations: usize,
}

/// Light-weight per-step fields for trajectory comparisons.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample {
    pub t: f64,
    pub v: Vec<f64>,
    pub eta: Vec<f64>,
    pub xi: Vec<f64>,
}

/// Shell and fluid trajectories over a window, `(eta_n, v_n)`.
pub type WindowPair = (Vec<Vec<f64>>, Vec<Vec<f64>>);

#[derive(Debug)]
pub struct Trajectory {
    pub initial: EnergyBreakdown,
    pub records: Vec<StepRecord>,
    pub iterations: Vec<IterationRecord>,
    /// Accepted windows as `(start time, steps)`.
    pub windows: Vec<(f64, usize)>,
    /// Fields at `t = 0` and after every accepted step.
    pub samples: Vec<FieldSample>,
    pub snapshots: Vec<CoupledState>,
    pub final_state: CoupledState,
    /// Why the run ended early, if it did.
    pub stopped: Option<Error>,
}

impl Trajectory {
    /// Ratios of consecutive residuals within converged window attempts.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.iterations
            .windows(2)
            .filter(|w| w[0].window == w[1].window && w[0].t0 == w[1].t0 && w[0].steps == w[1].steps && w[0].residual > 0.0)
            .map(|w| w[1].residual / w[0].residual)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct StepData {
    acc: Accumulators,
    convection_work: f64,
    max_divergence: f64,
    min_psi: f64,
    xi_max: f64,
}

struct Sweep {
    eta: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    states: Vec<CoupledState>,
    xi: Vec<Vec<f64>>,
    data: Vec<StepData>,
}

fn lerp(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b.iter()).map(|(x, y)| x + s * (y - x)).collect()
}

impl CoupledProblem {
    fn shell_weight(&self) -> f64 {
        self.model.weights[0]
    }

    /// Squared `L2` distance of two flux vectors, measured on the flat mesh.
    fn fluid_norm_sq(&self, a: &[f64], b: &[f64]) -> f64 {
        let d: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
        2.0 * self.norm_ops.kinetic_energy(&d)
    }

    fn shell_norm_sq(&self, a: &[f64], b: &[f64]) -> f64 {
        self.shell_weight() * a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
    }

    /// One application of the solution map to the iterate `(xi, v)`.
    fn sweep(&self, start: &CoupledState, xi_it: &[Vec<f64>], v_it: &[Vec<f64>]) -> Result<Sweep> {
        let n = xi_it.len() - 1;
        let dt = self.dt;
        let lay = self.layout;
        let nx = lay.nx;
        let hx = self.period() / nx as f64;
        let params = &self.fp.model.params;

        // regularized velocity and the polymer mesh it carries
        let mids: Vec<Vec<f64>> = (0..n).map(|k| lerp(&v_it[k], &v_it[k + 1], 0.5)).collect();
        let weights = self.kernel.temporal_weights(n, dt);
        let rm = regularize_velocity(&mids, &weights, &self.spatial);
        let mut r = vec![start.mesh_eta.clone()];
        for k in 0..n {
            let s = lay.shell_velocity(&rm[k]);
            let next: Vec<f64> = r[k].iter().zip(s.iter()).map(|(a, b)| a + dt * b).collect();
            r.push(next);
        }
        let fp_meshes: Vec<ColumnMesh> = r.iter().map(|e| self.mesh(e)).collect::<Result<_>>()?;

        // polymers
        let mut data = vec![StepData::default(); n];
        let mut psi = start.psi.clone();
        let mut psis = Vec::with_capacity(n);
        let mut xis = Vec::with_capacity(n);
        let mut sforce = Vec::with_capacity(n);
        for k in 0..n {
            let mid = midpoint_mesh(&fp_meshes[k], &fp_meshes[k + 1]);
            let ops = StaggeredOps::new(&mid);
            let kappa: Vec<Mat2> = ops.gradients(&rm[k]).iter().map(deviatoric).collect();
            let fluxes = lay.fluxes(&rm[k], hx);
            let inp = StepInput { old: &fp_meshes[k], new: &fp_meshes[k + 1], fluxes: &fluxes, kappa: &kappa, dt };
            let (next, rep) = self.fp.step(&psi, &inp)?;
            let a_new = fp_meshes[k + 1].areas();
            let tau: Vec<Mat2> = rep.stress.iter().enumerate().map(|(c, s)| scale(&deviatoric(s), params.k * a_new[c] / ops.areas[c])).collect();
            sforce.push(ops.stress_force(&tau));
            let xi = marginalize(&next, &self.fp);
            let d = &mut data[k];
            d.acc.fisher_x = rep.fisher_x;
            d.acc.fisher_q = rep.fisher_q;
            d.acc.drag = rep.drag;
            d.acc.xi_gradient = dt * params.eps * xi.grad_sq(&fp_meshes[k + 1]);
            d.min_psi = rep.min_psi;
            d.xi_max = rep.xi_max;
            xis.push(xi.xi);
            psis.push(next.clone());
            psi = next;
        }

        // stress force on each fluid step through the adjoint of the mollifier
        let forces: Vec<Vec<f64>> = (0..n)
            .map(|m| {
                let mut acc = vec![0.0; lay.len()];
                for k in 0..n {
                    let w = weights[k][m];
                    if w != 0.0 {
                        for (a, s) in acc.iter_mut().zip(sforce[k].iter()) {
                            *a += w * s;
                        }
                    }
                }
                self.spatial.apply_t(&acc)
            })
            .collect();

        // fluid and shell
        let fluid_meshes: Vec<ColumnMesh> = xi_it.iter().map(|e| self.mesh(e)).collect::<Result<_>>()?;
        let w = self.shell_weight();
        let mu = self.mu();
        let mut fluid = start.fluid.clone();
        let mut eta = start.shell.eta.clone();
        let mut out_eta = vec![eta.clone()];
        let mut out_v = vec![fluid.v.clone()];
        let mut states = Vec::with_capacity(n);
        for m in 0..n {
            let sigma0 = lay.shell_velocity(&fluid.v).to_vec();
            let tmid = start.t + (m as f64 + 0.5) * dt;
            let kbar = self.model.avf_gradient(&xi_it[m], &xi_it[m + 1]);
            let lg = regularizer_gradient(&self.model, &self.reg, &eta, self.kernel.rho);
            let ls = regularizer_gradient(&self.model, &self.reg, &sigma0, self.kernel.rho);
            let g = self.forcing.shell_load(nx, tmid);
            let explicit: Vec<f64> = (0..nx).map(|i| kbar[i] + lg[i] + 0.25 * dt * ls[i] - g[i]).collect();
            let mid = midpoint_mesh(&fluid_meshes[m], &fluid_meshes[m + 1]);
            let ops = StaggeredOps::new(&mid);
            let mut force = forces[m].clone();
            let mut body = None;
            if self.forcing.has_body() {
                let fb = ops.body_force(|p| self.forcing.body_force(self.height, p));
                let fsq: f64 = ops.sample(|p| self.forcing.body_force(self.height, p)).iter().zip(ops.mass.iter()).map(|(f, mm)| mm * f * f).sum();
                for (a, b) in force.iter_mut().zip(fb.iter()) {
                    *a += b;
                }
                body = Some((fb, fsq));
            }
            let step = FluidStep {
                old: &fluid_meshes[m],
                new: &fluid_meshes[m + 1],
                mu,
                dt,
                advect: Some(&rm[m]),
                force: Some(&force),
                boundary: Boundary::Shell { weight: w, explicit: &explicit, implicit: &self.implicit },
            };
            let out = step_fluid(&fluid, &step)?;
            let sigma1 = lay.shell_velocity(&out.state.v).to_vec();
            let smid: Vec<f64> = sigma0.iter().zip(sigma1.iter()).map(|(a, b)| 0.5 * (a + b)).collect();
            let eta1: Vec<f64> = eta.iter().zip(smid.iter()).map(|(a, s)| a + dt * s).collect();
            if let Some(reason) = crate::geometry::check_admissible(&self.model.shell, &eta1).reason {
                return Err(Error::Admissibility(format!("at t = {:.6}: {reason}", tmid + 0.5 * dt)));
            }
            let d = &mut data[m];
            let (body_work, fsq) = body.map_or((0.0, 0.0), |(fb, fsq)| (dt * dot(&fb, &out.mid), fsq));
            let shell_work = dt * w * dot(&g, &smid);
            d.acc.viscous = out.dissipation;
            d.acc.stress_work = dt * dot(&forces[m], &out.mid);
            d.acc.forcing_work = body_work + shell_work;
            d.acc.young_bound = dt * (0.5 * fsq + 0.5 * w * dot(&g, &g) + ops.kinetic_energy(&out.mid) + 0.5 * w * dot(&smid, &smid));
            d.convection_work = out.convection_work;
            let new_mesh = &fluid_meshes[m + 1];
            d.max_divergence = StaggeredOps::new(new_mesh).max_divergence(&out.state.v);
            fluid = out.state;
            eta = eta1;
            out_eta.push(eta.clone());
            out_v.push(fluid.v.clone());
            states.push(CoupledState {
                fluid: fluid.clone(),
                shell: ShellState { eta: eta.clone(), eta_t: sigma1, t: fluid.t },
                mesh_eta: r[m + 1].clone(),
                psi: psis[m].clone(),
                t: fluid.t,
            });
        }
        Ok(Sweep { eta: out_eta, v: out_v, states, xi: xis, data })
    }

    /// One application of the fixed-point map to a window iterate: returns
    /// the shell and fluid trajectories `(eta_n, v_n)`, `n = 0..=N`.
    pub fn solution_map(&self, start: &CoupledState, xi: &[Vec<f64>], v: &[Vec<f64>]) -> Result<WindowPair> {
        if xi.len() != v.len() || xi.len() < 2 {
            return Err(Error::Config("window iterate needs matching shell and fluid trajectories of length >= 2".into()));
        }
        let sw = self.sweep(start, xi, v)?;
        Ok((sw.eta, sw.v))
    }

    /// Iterate distance and size in the discrete `L2(I; L2)` norm.
    pub fn window_distance(&self, a: (&[Vec<f64>], &[Vec<f64>]), b: (&[Vec<f64>], &[Vec<f64>])) -> (f64, f64) {
        let (mut res, mut norm) = (0.0, 0.0);
        let zs = vec![0.0; self.nx()];
        let zv = vec![0.0; self.layout.len()];
        for k in 1..a.0.len() {
            res += self.dt * (self.shell_norm_sq(&a.0[k], &b.0[k]) + self.fluid_norm_sq(&a.1[k], &b.1[k]));
            norm += self.dt * (self.shell_norm_sq(&b.0[k], &zs) + self.fluid_norm_sq(&b.1[k], &zv));
        }
        (res.sqrt(), norm.sqrt())
    }

    /// Converges one window of `n` steps from `start`.
    fn solve_window(&self, start: &CoupledState, n: usize, window: usize, log: &mut Vec<IterationRecord>) -> Result<(Sweep, usize)> {
        let dt = self.dt;
        let sigma = self.layout.shell_velocity(&start.fluid.v).to_vec();
        let mut xi: Vec<Vec<f64>> = (0..=n).map(|k| start.shell.eta.iter().zip(sigma.iter()).map(|(e, s)| e + k as f64 * dt * s).collect()).collect();
        let mut v: Vec<Vec<f64>> = vec![start.fluid.v.clone(); n + 1];
        let theta = self.cfg.damping;
        let mut best = f64::INFINITY;
        let mut since_best = 0;
        for it in 1..=self.cfg.max_iter {
            let sw = self.sweep(start, &xi, &v)?;
            let (res, norm) = self.window_distance((&xi, &v), (&sw.eta, &sw.v));
            log.push(IterationRecord { window, t0: start.t, steps: n, iteration: it, residual: res, norm });
            if !res.is_finite() {
                return Err(Error::Diverged(format!("fixed-point residual is not finite at t = {}", start.t)));
            }
            if res <= self.cfg.tol * (1.0 + norm) {
                return Ok((sw, it));
            }
            if res < best {
                best = res;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= self.cfg.stagnation {
                    return Err(Error::NoConvergence(format!(
                        "window at t = {:.6} with {n} steps stagnated at residual {res:.3e} after {it} iterations",
                        start.t
                    )));
                }
            }
            for k in 1..=n {
                xi[k] = lerp(&xi[k], &sw.eta[k], theta);
                v[k] = lerp(&v[k], &sw.v[k], theta);
            }
        }
        Err(Error::NoConvergence(format!("window at t = {:.6} with {n} steps not converged in {} iterations", start.t, self.cfg.max_iter)))
    }

    pub fn breakdown(&self, state: &CoupledState, acc: Accumulators) -> Result<EnergyBreakdown> {
        let mesh = self.mesh(&state.shell.eta)?;
        let fp_mesh = self.mesh(&state.mesh_eta)?;
        let ops = StaggeredOps::new(&mesh);
        Ok(assemble_breakdown(&BreakdownInput {
            t: state.t,
            fluid_ops: &ops,
            fluid: &state.fluid,
            shell: &state.shell,
            model: &self.model,
            reg: &self.reg,
            rho: self.kernel.rho,
            fp: &self.fp,
            psi: &state.psi,
            fp_mesh: &fp_mesh,
            acc,
        }))
    }
}

fn sample(state: &CoupledState, xi: Vec<f64>) -> FieldSample {
    FieldSample { t: state.t, v: state.fluid.v.clone(), eta: state.shell.eta.clone(), xi }
}

/// Runs the coupled problem from `init` to `opts.t_end`. Solver failures
/// end the run early and are returned in [`Trajectory::stopped`] together
/// with everything accepted so far; only configuration errors are returned
/// as `Err`.
pub fn fixed_point_solve(p: &CoupledProblem, init: CoupledState, opts: &RunOptions) -> Result<Trajectory> {
    if !(opts.t_end >= init.t) {
        return Err(Error::Config(format!("end time {} precedes the start time {}", opts.t_end, init.t)));
    }
    let target = ((p.cfg.window / p.dt).round() as usize).max(1);
    let total = ((opts.t_end - init.t) / p.dt).round() as usize;
    let initial = p.breakdown(&init, Accumulators::default())?;
    let xi0 = marginalize(&init.psi, &p.fp).xi;
    let limit = p.model.shell.tube * (1.0 - p.cfg.guard_margin);
    let mut traj = Trajectory {
        initial,
        records: Vec::new(),
        iterations: Vec::new(),
        windows: Vec::new(),
        samples: vec![sample(&init, xi0)],
        snapshots: Vec::new(),
        final_state: init.clone(),
        stopped: None,
    };
    if opts.snapshot_every > 0 {
        traj.snapshots.push(init.clone());
    }
    let mut state = init;
    let mut acc = Accumulators::default();
    let mut done = 0;
    let mut nwin = target;
    let mut window_id = 0;
    'run: while done < total {
        let n = nwin.min(total - done);
        match p.solve_window(&state, n, window_id, &mut traj.iterations) {
            Ok((sw, iterations)) => {
                for (k, st) in sw.states.into_iter().enumerate() {
                    let sup = st.shell.eta.iter().fold(0.0f64, |m, e| m.max(e.abs()));
                    if sup >= limit {
                        traj.stopped = Some(Error::Admissibility(format!(
                            "guard at t = {:.6}: sup|eta| = {sup:.6e} within the margin of the tube half-width {:.6e}",
                            st.t, p.model.shell.tube
                        )));
                        // the first k steps of the window were accepted
                        if k > 0 {
                            traj.windows.push((state.t - k as f64 * p.dt, k));
                        }
                        break 'run;
                    }
                    let d = sw.data[k];
                    acc.add(&d.acc);
                    let breakdown = p.breakdown(&st, acc)?;
                    traj.records.push(StepRecord {
                        breakdown,
                        min_psi: d.min_psi,
                        xi_max: d.xi_max,
                        sup_eta: sup,
                        max_divergence: d.max_divergence,
                        convection_work: d.convection_work,
                        trace_error: st.fluid.trace_error(&p.layout, &st.shell.eta_t),
                        window: window_id,
                        iterations,
                    });
                    traj.samples.push(sample(&st, sw.xi[k].clone()));
                    done += 1;
                    if opts.snapshot_every > 0 && done % opts.snapshot_every == 0 {
                        traj.snapshots.push(st.clone());
                    }
                    state = st;
                    traj.final_state = state.clone();
                }
                traj.windows.push((state.t - n as f64 * p.dt, n));
                window_id += 1;
                nwin = (2 * nwin).min(target);
            }
            Err(e @ Error::Config(_)) => return Err(e),
            Err(e) => {
                if n > 1 {
                    nwin = n / 2;
                } else {
                    traj.stopped = Some(e);
                    break;
                }
            }
        }
    }
    Ok(traj)
}
