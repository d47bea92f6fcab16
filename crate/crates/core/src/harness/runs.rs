//! The four run kinds behind the CLI. Each writes its tables into the run
//! directory and returns a summary; a run that stops early still writes
//! everything it accepted before reporting the error.

use super::config::{InitialKind, RunConfig};
use super::output::{
    coupled_grid, coupled_snapshot, diagnostics_table, ensure_dir, iterations_table, write_fields, CsvTable, GridSpec, RunSummary, Snapshot,
};
use crate::coupler::{
    energy_ledger, fixed_point_solve, periodic_breathing_data, rho_refinement_study, CoupledProblem, CoupledState, LedgerOptions, RunOptions,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::fokker_planck::flows;
use crate::fokker_planck::{ConfigDensity, EntropyHistory, FokkerPlanck, StepInput};
use crate::geometry::{check_admissible, ColumnMesh, ShellState};
use crate::shell_dynamics::{shell_energy, step_shell, Regularizer, ShellForce};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};
use std::path::Path;

/// A finished run: its summary and, if it failed, why.
#[derive(Debug)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub error: Option<Error>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(0, Error::exit_code)
    }
}

fn finish(
    cfg: &RunConfig,
    command: &str,
    dir: &Path,
    steps: usize,
    t_final: f64,
    details: Vec<(String, f64)>,
    error: Option<Error>,
) -> Result<RunOutcome> {
    let summary = RunSummary {
        name: cfg.run.name.clone(),
        command: command.into(),
        status: if error.is_none() { "ok".into() } else { "failed".into() },
        exit_code: error.as_ref().map_or(0, Error::exit_code),
        category: error.as_ref().map_or("none", Error::category).into(),
        message: error.as_ref().map_or(String::new(), |e| e.to_string()),
        steps,
        t_final,
        details,
    };
    summary.write(&dir.join("summary.toml"))?;
    Ok(RunOutcome { summary, error })
}

fn cosine(n: usize, amp: f64, mode: usize) -> Vec<f64> {
    (0..n).map(|i| amp * (TAU * (mode * i) as f64 / n as f64).cos()).collect()
}

/// Nonnegative rough configuration density drawn from the seed.
pub fn random_density(mesh: &ColumnMesh, fp: &FokkerPlanck, seed: u64) -> ConfigDensity {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: [f64; 6] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
    let p = mesh.period;
    ConfigDensity::from_fn(mesh, &fp.grid, |x, q| {
        let s = TAU * x[0] / p;
        let v = c[0] * (1.0 + (6.0 * s + c[1]).sin()) * (1.0 + (4.0 * x[1]).cos())
            + c[2] * (q[0] - c[3]).powi(2) * (-q[1] * q[1]).exp()
            + c[4] * (((q[0] * 2.0).sin() + 1.0) * (x[1] * 5.0 + c[5]).sin().abs());
        v.max(0.0)
    })
}

fn initial_density(cfg: &RunConfig, mesh: &ColumnMesh, fp: &FokkerPlanck) -> ConfigDensity {
    if cfg.initial.kind == InitialKind::Random {
        return random_density(mesh, fp, cfg.run.seed);
    }
    let a = cfg.initial.psi_perturbation;
    let (p, h) = (mesh.period, mesh.height);
    ConfigDensity::from_fn(mesh, &fp.grid, |x, _| 1.0 + a * (TAU * x[0] / p).cos() * (PI * x[1] / h).sin())
}

/// Initial state of a coupled run at regularization `p.kernel.rho`.
pub fn coupled_initial(cfg: &RunConfig, p: &CoupledProblem) -> Result<CoupledState> {
    let nx = p.nx();
    let i = &cfg.initial;
    let (eta0, eta1, v0) = match i.kind {
        InitialKind::Rest | InitialKind::Random => (vec![0.0; nx], vec![0.0; nx], None),
        InitialKind::ShellMode => (cosine(nx, i.amplitude, i.mode), cosine(nx, i.velocity, i.mode), None),
        InitialKind::PeriodicOrbit => {
            let f = &cfg.forcing;
            let (e0, e1, v) = periodic_breathing_data(p, f.shell_amplitude, f.shell_mode, f.shell_omega)?;
            (e0, e1, Some(v))
        }
    };
    let mesh = p.mesh(&p.initial_mesh_eta(&eta0))?;
    let psi = initial_density(cfg, &mesh, &p.fp);
    p.initial_state(&eta0, &eta1, v0.as_deref(), psi)
}

fn write_trajectory(cfg: &RunConfig, p: &CoupledProblem, traj: &Trajectory, dir: &Path, prefix: &str) -> Result<()> {
    diagnostics_table(&traj.initial, &traj.records, cfg.output.every).write(&dir.join(format!("{prefix}diagnostics.csv")))?;
    iterations_table(&traj.iterations).write(&dir.join(format!("{prefix}iterations.csv")))?;
    let mut snaps: Vec<Snapshot> = traj.snapshots.iter().map(|s| coupled_snapshot(p, s)).collect::<Result<_>>()?;
    let last = &traj.final_state;
    if snaps.last().is_none_or(|s| s.t != last.t) {
        snaps.push(coupled_snapshot(p, last)?);
    }
    write_fields(&dir.join(format!("{prefix}fields.vtk")), &coupled_grid(p), &snaps)
}

fn run_options(cfg: &RunConfig) -> RunOptions {
    let every = cfg.output.fields_every;
    RunOptions { t_end: cfg.run.t_end, snapshot_every: if every == 0 { cfg.steps().max(1) } else { every } }
}

/// `simulate`: the full coupled run with the energy ledger.
pub fn simulate(cfg: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    ensure_dir(dir)?;
    let p = cfg.coupled_problem(cfg.shell.rho)?;
    let init = coupled_initial(cfg, &p)?;
    let traj = fixed_point_solve(&p, init, &run_options(cfg))?;
    write_trajectory(cfg, &p, &traj, dir, "")?;
    let steps = traj.records.len();
    let t_final = traj.final_state.t;
    let opts = LedgerOptions { slack: cfg.solver.ledger_slack, require_monotone: p.forcing.is_zero(), ..LedgerOptions::default() };
    let (details, ledger_error) = match energy_ledger(&traj, &opts) {
        Ok(rep) => (
            vec![
                ("worst_excess".into(), rep.worst_excess),
                ("worst_young_excess".into(), rep.worst_young_excess),
                ("max_increase".into(), rep.max_increase),
                ("exchange_mismatch".into(), rep.exchange_mismatch),
                ("sup_eta".into(), traj.records.iter().fold(0.0, |m, r| m.max(r.sup_eta))),
            ],
            None,
        ),
        Err(e) => (Vec::new(), Some(e)),
    };
    // an early stop outranks a ledger failure on the accepted part
    finish(cfg, "simulate", dir, steps, t_final, details, traj.stopped.or(ledger_error))
}

fn prescribed_mesh(cfg: &RunConfig, t: f64) -> ColumnMesh {
    let g = &cfg.geometry;
    let f = &cfg.fpk;
    let eta: Vec<f64> = (0..g.nx).map(|i| f.mesh_amplitude * (TAU * i as f64 / g.nx as f64).sin() * (f.mesh_omega * t).sin()).collect();
    ColumnMesh::new(g.nx, g.nz, g.period, g.height, g.tube, cfg.profile(), &eta)
}

/// Result of a Fokker-Planck run with prescribed flow and boundary motion.
#[derive(Debug)]
pub struct FpkRun {
    pub history: EntropyHistory,
    pub min_psi: Vec<f64>,
    pub xi_max: Vec<f64>,
    pub mass: Vec<f64>,
    pub state: ConfigDensity,
}

/// Fokker-Planck only: prescribed shear and shell motion, checked for the
/// minimum principle, the number-density maximum principle and the entropy
/// inequality.
pub fn fpk_run(cfg: &RunConfig) -> Result<FpkRun> {
    let fp = cfg.fokker_planck()?;
    let shell = cfg.koiter()?.shell;
    let dt = cfg.fluid.dt;
    let rate = cfg.fpk.shear_rate;
    let mut mesh = prescribed_mesh(cfg, 0.0);
    let mut st = initial_density(cfg, &mesh, &fp);
    let xi0 = fp.marginal(&st);
    let mut run = FpkRun {
        history: EntropyHistory::new(fp.model.params.k * fp.relative_entropy(&st, &mesh)),
        min_psi: vec![st.min()],
        xi_max: vec![xi0.iter().fold(0.0f64, |m, x| m.max(x.abs()))],
        mass: vec![fp.total_mass(&st, &mesh)],
        state: st.clone(),
    };
    let kappa = flows::shear_kappa(mesh.ncells(), rate);
    for n in 0..cfg.steps() {
        let new = prescribed_mesh(cfg, (n + 1) as f64 * dt);
        if let Some(reason) = check_admissible(&shell, &new.eta).reason {
            return Err(Error::Admissibility(format!("prescribed boundary motion at step {}: {reason}", n + 1)));
        }
        let fl = flows::shear(&mesh, rate).add(&flows::mesh_following(&mesh, &new, dt));
        let (s, rep) = fp.step(&st, &StepInput { old: &mesh, new: &new, fluxes: &fl, kappa: &kappa, dt })?;
        run.history.push(&rep);
        run.min_psi.push(rep.min_psi);
        run.xi_max.push(rep.xi_max);
        run.mass.push(rep.mass);
        st = s;
        mesh = new;
    }
    run.state = st;
    Ok(run)
}

impl FpkRun {
    /// The three run-time checks, in order of severity.
    pub fn check(&self, entropy_slack: f64) -> Result<f64> {
        if let Some((n, m)) = self.min_psi.iter().enumerate().find(|(_, m)| **m < -1e-8) {
            return Err(Error::Inequality(format!("minimum principle violated at step {n}: min psi = {m:.3e}")));
        }
        let bound = self.xi_max[0] * (1.0 + 1e-6);
        if let Some((n, x)) = self.xi_max.iter().enumerate().find(|(_, x)| **x > bound) {
            return Err(Error::Inequality(format!("number density exceeds its initial sup at step {n}: {x:.9e} > {bound:.9e}")));
        }
        Ok(self.history.check(entropy_slack)?.worst)
    }

    pub fn table(&self, dt: f64) -> CsvTable {
        let mut t = CsvTable::new(
            "# schema: polyshell.fpk v1",
            &["step", "t", "entropy", "fisher_x", "fisher_q", "drag", "lhs", "rhs", "min_psi", "xi_max", "mass"],
        );
        let e0 = self.history.e0;
        t.push(vec![0.0, 0.0, e0, 0.0, 0.0, 0.0, e0, e0, self.min_psi[0], self.xi_max[0], self.mass[0]]);
        for (n, r) in self.history.rows.iter().enumerate() {
            let lhs = r.entropy + r.fisher_x + r.fisher_q;
            t.push(vec![
                (n + 1) as f64,
                (n + 1) as f64 * dt,
                r.entropy,
                r.fisher_x,
                r.fisher_q,
                r.drag,
                lhs,
                e0 + r.drag,
                self.min_psi[n + 1],
                self.xi_max[n + 1],
                self.mass[n + 1],
            ]);
        }
        t
    }
}

/// `fpk`: the Fokker-Planck run with its entropy table.
pub fn fpk(cfg: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    ensure_dir(dir)?;
    let run = fpk_run(cfg)?;
    run.table(cfg.fluid.dt).write(&dir.join("fpk.csv"))?;
    let fp = cfg.fokker_planck()?;
    let g = &cfg.geometry;
    let hx = g.period / g.nx as f64;
    let hz = g.height / g.nz as f64;
    let grid = GridSpec { dims: [g.nx, g.nz, 1], spacing: [hx, hz, 1.0], origin: [0.0, 0.5 * hz, 0.0] };
    let xi = fp.marginal(&run.state);
    let min_q: Vec<f64> = (0..run.state.ncells).map(|c| run.state.cell(c).iter().fold(f64::INFINITY, |m, x| m.min(*x))).collect();
    let t_final = cfg.steps() as f64 * cfg.fluid.dt;
    let snap = Snapshot { t: t_final, scalars: vec![("xi".into(), xi), ("min_psi".into(), min_q)], vectors: Vec::new(), tensors: Vec::new() };
    write_fields(&dir.join("fields.vtk"), &grid, &[snap])?;
    let (details, error) = match run.check(cfg.fpk.entropy_slack) {
        Ok(worst) => (
            vec![
                ("entropy_worst_excess".into(), worst),
                ("min_psi".into(), run.min_psi.iter().fold(f64::INFINITY, |m, x| m.min(*x))),
                ("xi_max_ratio".into(), run.xi_max.iter().fold(0.0, |m: f64, x| m.max(*x)) / run.xi_max[0]),
            ],
            None,
        ),
        Err(e) => (Vec::new(), Some(e)),
    };
    finish(cfg, "fpk", dir, cfg.steps(), t_final, details, error)
}

/// `shell`: shell dynamics alone under the configured load.
pub fn shell(cfg: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    ensure_dir(dir)?;
    let model = cfg.koiter()?;
    let nx = model.shell.n1;
    let reg = Regularizer::new([nx, 1], model.shell.period);
    let sp = cfg.shell_params();
    let forcing = cfg.forcing();
    let dt = cfg.fluid.dt;
    let i = &cfg.initial;
    let mut state = match i.kind {
        InitialKind::ShellMode => ShellState { eta: cosine(nx, i.amplitude, i.mode), eta_t: cosine(nx, i.velocity, i.mode), t: 0.0 },
        _ => ShellState::rest(nx),
    };
    if let Some(reason) = check_admissible(&model.shell, &state.eta).reason {
        return Err(Error::Admissibility(format!("initial shell: {reason}")));
    }
    let mut table = CsvTable::new(
        "# schema: polyshell.shell v1",
        &["step", "t", "kinetic", "elastic", "regularizer", "energy", "load_work", "excess", "sup_eta"],
    );
    let e0 = shell_energy(&model, &reg, sp.rho, &state).total();
    let sup = |e: &[f64]| e.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    table.push(vec![
        0.0,
        0.0,
        e0 - model.energy_unchecked(&state.eta) - sp.rho * reg.energy(&state.eta),
        model.energy_unchecked(&state.eta),
        sp.rho * reg.energy(&state.eta),
        e0,
        0.0,
        0.0,
        sup(&state.eta),
    ]);
    let mut work = 0.0;
    let mut worst = f64::NEG_INFINITY;
    let mut error = None;
    let mut steps = 0;
    let mut snaps = vec![shell_snapshot(&state)];
    for n in 0..cfg.steps() {
        let load = forcing.shell_load(nx, (n as f64 + 0.5) * dt);
        let force = ShellForce { load: load.clone(), coupling: vec![0.0; nx] };
        match step_shell(&state, &force, &model, &reg, &sp, dt) {
            Ok((next, _)) => {
                let d: Vec<f64> = next.eta.iter().zip(state.eta.iter()).map(|(a, b)| a - b).collect();
                work += model.inner(&load, &d);
                state = next;
                steps += 1;
                let e = shell_energy(&model, &reg, sp.rho, &state);
                let excess = (e.total() - e0 - work) / (e0 + work.abs()).max(1e-300);
                worst = worst.max(excess);
                if steps % cfg.output.every == 0 || steps == cfg.steps() {
                    table.push(vec![steps as f64, state.t, e.kinetic, e.elastic, e.regularizer, e.total(), work, excess, sup(&state.eta)]);
                }
                if cfg.output.fields_every > 0 && steps % cfg.output.fields_every == 0 {
                    snaps.push(shell_snapshot(&state));
                }
            }
            Err(e) => {
                error = Some(e);
                break;
            }
        }
    }
    if snaps.last().is_none_or(|s| s.t != state.t) {
        snaps.push(shell_snapshot(&state));
    }
    table.write(&dir.join("shell.csv"))?;
    let grid = GridSpec { dims: [nx, 1, 1], spacing: [model.shell.period[0] / nx as f64, 1.0, 1.0], origin: [0.0; 3] };
    write_fields(&dir.join("fields.vtk"), &grid, &snaps)?;
    if error.is_none() && worst > cfg.solver.ledger_slack {
        error = Some(Error::Inequality(format!("shell energy exceeds initial energy plus load work by {worst:.3e} (relative)")));
    }
    finish(cfg, "shell", dir, steps, state.t, vec![("worst_excess".into(), worst)], error)
}

fn shell_snapshot(s: &ShellState) -> Snapshot {
    Snapshot { t: s.t, scalars: vec![("eta".into(), s.eta.clone()), ("eta_t".into(), s.eta_t.clone())], vectors: Vec::new(), tensors: Vec::new() }
}

/// `sweep-rho`: the same data at every level of `sweep.rhos`.
pub fn sweep_rho(cfg: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    ensure_dir(dir)?;
    let rep = rho_refinement_study(
        &cfg.sweep.rhos,
        |rho| {
            let p = cfg.coupled_problem(rho)?;
            let s = coupled_initial(cfg, &p)?;
            Ok((p, s))
        },
        &RunOptions { t_end: cfg.run.t_end, snapshot_every: 0 },
    )?;
    let mut levels = CsvTable::new("# schema: polyshell.sweep v1", &["level", "rho", "regularizer_sup", "steps", "completed"]);
    for (k, l) in rep.levels.iter().enumerate() {
        levels.push(vec![k as f64, l.rho, l.regularizer_sup, l.trajectory.records.len() as f64, f64::from(u8::from(l.trajectory.stopped.is_none()))]);
        diagnostics_table(&l.trajectory.initial, &l.trajectory.records, cfg.output.every).write(&dir.join(format!("diagnostics_level{k}.csv")))?;
    }
    levels.write(&dir.join("sweep.csv"))?;
    let mut cauchy =
        CsvTable::new("# schema: polyshell.sweep-cauchy v1", &["level", "rho_coarse", "rho_fine", "u", "eta", "xi", "regularizer_ratio"]);
    for (k, c) in rep.cauchy.iter().enumerate() {
        cauchy.push(vec![k as f64, rep.levels[k].rho, rep.levels[k + 1].rho, c[0], c[1], c[2], rep.regularizer_ratios[k]]);
    }
    cauchy.write(&dir.join("cauchy.csv"))?;
    let error = rep
        .levels
        .iter()
        .find_map(|l| l.trajectory.stopped.as_ref().map(|e| (l.rho, e.to_string(), e.exit_code())))
        .map(|(rho, m, code)| match code {
            4 => Error::Admissibility(format!("level rho = {rho}: {m}")),
            _ => Error::NoConvergence(format!("level rho = {rho}: {m}")),
        })
        .or_else(|| (!rep.monotone).then(|| Error::Inequality(format!("Cauchy differences are not monotone: {:?}", rep.cauchy))));
    let details = rep.regularizer_ratios.iter().enumerate().map(|(k, r)| (format!("regularizer_ratio_{k}"), *r)).collect();
    finish(cfg, "sweep-rho", dir, cfg.steps(), cfg.run.t_end, details, error)
}
