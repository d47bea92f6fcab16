//! The acceptance suite. Every criterion is a plain function returning a
//! verdict with a one-line detail; `validate` and the `acceptance` test
//! target both print them.

use super::config::RunConfig;
use super::runs::{coupled_initial, fpk_run, FpkRun};
use super::scenarios::scenario;
use crate::coupler::{energy_ledger, fixed_point_solve, rho_refinement_study, LedgerOptions, RunOptions, Trajectory};
use crate::error::{Error, Result};
use crate::fluid::{Layout, StaggeredOps};
use crate::fokker_planck::flows;
use crate::fokker_planck::xstep::Fluxes;
use crate::fokker_planck::{ConfigDensity, FokkerPlanck};
use crate::geometry::{ColumnMesh, Profile, ReferenceShell, Surface};
use crate::linalg::norm2;
use crate::number_density::{step_xi, NumberDensity, XiStep};
use crate::polymer_model::{PhysicalParams, PolymerModel, SpringKind, SpringLaw};
use crate::shell_dynamics::KoiterModel;
use crate::stress::{
    continuous_forms, frobenius, kramers_stress, kramers_stress_gradient_form, truncated_spring_parts, truncated_stress, Mat2, TRUNCATION_CONSTANT,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

#[derive(Clone, Debug)]
pub struct Verdict {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!("{} {:>2} {} ({:.1} s): {}", if self.passed { "PASS" } else { "FAIL" }, self.id, self.title, self.seconds, self.detail)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    /// Everything except the refinement sweep.
    Fast,
    Full,
}

pub const TITLES: [&str; 11] = [
    "equilibrium fixed point",
    "minimum principle",
    "entropy inequality",
    "number-density maximum principle",
    "stress form equivalence",
    "truncated stress bound",
    "Koiter gradient",
    "coupled energy ledger",
    "skew convection neutrality",
    "regularization refinement",
    "admissibility guard",
];

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn preset(name: &str) -> std::result::Result<RunConfig, String> {
    scenario(name).ok_or_else(|| format!("missing preset {name}"))?.config().map_err(|e| e.to_string())
}

fn err(e: Error) -> String {
    e.to_string()
}

/// Runs one criterion; `exe` is the `polyshell` binary used by criterion 11.
pub fn run_criterion(id: usize, exe: &Path) -> Verdict {
    let start = Instant::now();
    let res = match id {
        1 => equilibrium(),
        2 => minimum_principle(),
        3 => entropy_inequality(),
        4 => number_density_bound(),
        5 => stress_forms(),
        6 => truncation_bound(),
        7 => koiter_gradient(),
        8 => coupled_ledger(),
        9 => convection_neutrality(),
        10 => refinement(),
        11 => admissibility_guard(exe),
        _ => Err(format!("no criterion {id}")),
    };
    let (passed, detail) = match res {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    Verdict { id, title: TITLES.get(id.wrapping_sub(1)).copied().unwrap_or("unknown"), passed, detail, seconds: start.elapsed().as_secs_f64() }
}

pub fn criteria(suite: Suite) -> Vec<usize> {
    match suite {
        Suite::Fast => (1..=11).filter(|i| *i != 10).collect(),
        Suite::Full => (1..=11).collect(),
    }
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" ")
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// 1: the rest state survives 1000 steps of the coupled scheme.
pub fn equilibrium() -> Check {
    let cfg = preset("rest-state")?;
    let p = cfg.coupled_problem(cfg.shell.rho).map_err(err)?;
    let init = coupled_initial(&cfg, &p).map_err(err)?;
    let traj = fixed_point_solve(&p, init.clone(), &RunOptions { t_end: cfg.run.t_end, snapshot_every: 0 }).map_err(err)?;
    if let Some(e) = &traj.stopped {
        return Err(format!("stopped: {e}"));
    }
    ensure(traj.records.len() >= 1000, || format!("only {} steps", traj.records.len()))?;
    let s0 = &traj.samples[0];
    let mut drift = 0.0f64;
    for s in &traj.samples {
        drift = drift.max(max_diff(&s.v, &s0.v)).max(max_diff(&s.eta, &s0.eta)).max(max_diff(&s.xi, &s0.xi));
    }
    let fin = &traj.final_state;
    drift = drift
        .max(max_diff(&fin.psi.psi, &init.psi.psi))
        .max(max_diff(&fin.shell.eta_t, &init.shell.eta_t))
        .max(max_diff(&fin.mesh_eta, &init.mesh_eta));
    let e0 = traj.initial.energy();
    let de = traj.records.iter().map(|r| (r.breakdown.energy() - e0).abs()).fold(0.0, f64::max);
    let diss = traj.records.last().map_or(0.0, |r| r.breakdown.acc.dissipation());
    let worst = drift.max(de).max(diss);
    ensure(worst < 1e-9, || format!("drift {drift:.3e}, energy drift {de:.3e}, dissipation {diss:.3e}"))?;
    Ok(format!("{} steps, max state drift {drift:.2e}, energy drift {de:.2e}", traj.records.len()))
}

/// The Fokker-Planck suite: 20 seeded rough data under prescribed shear on
/// the fixed domain, and the same seeds on a moving domain.
fn fpk_suite() -> std::result::Result<Vec<(String, FpkRun)>, String> {
    let base = preset("shear-fixed-domain")?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = Vec::new();
    for k in 0..20u64 {
        let mut cfg = base.clone();
        cfg.run.seed = k;
        cfg.fpk.shear_rate = rng.random_range(-3.0..3.0);
        let fixed = fpk_run(&cfg).map_err(err)?;
        out.push((format!("seed {k}, rate {:.2}", cfg.fpk.shear_rate), fixed));
        if k % 4 == 0 {
            cfg.fpk.mesh_amplitude = 0.1;
            out.push((format!("seed {k}, moving"), fpk_run(&cfg).map_err(err)?));
        }
    }
    Ok(out)
}

/// 2: min psi >= -1e-8 at every step of every suite run.
pub fn minimum_principle() -> Check {
    let runs = fpk_suite()?;
    let mut worst = f64::INFINITY;
    for (name, r) in &runs {
        let m = r.min_psi.iter().fold(f64::INFINITY, |a, b| a.min(*b));
        ensure(m >= -1e-8, || format!("{name}: min psi {m:.3e}"))?;
        worst = worst.min(m);
    }
    Ok(format!("{} runs, smallest value {worst:.3e}", runs.len()))
}

/// 3: entropy plus Fisher accumulators stay below initial entropy plus drag work.
pub fn entropy_inequality() -> Check {
    let runs = fpk_suite()?;
    let mut worst = f64::NEG_INFINITY;
    for (name, r) in &runs {
        let rep = r.history.check(1e-3).map_err(|e| format!("{name}: {e}"))?;
        worst = worst.max(rep.worst);
    }
    Ok(format!("{} runs, worst relative excess {worst:.2e} (slack 1e-3)", runs.len()))
}

/// 4: sup of the number density never grows, and the fixed-domain energy
/// identity holds for the standalone number-density equation.
pub fn number_density_bound() -> Check {
    let runs = fpk_suite()?;
    let mut ratio = 0.0f64;
    for (name, r) in &runs {
        let m = r.xi_max.iter().fold(0.0f64, |a, b| a.max(*b)) / r.xi_max[0];
        ensure(m <= 1.0 + 1e-6, || format!("{name}: sup ratio {m:.9}"))?;
        ratio = ratio.max(m);
    }
    // standalone transport-diffusion on moving domains
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..10 {
        let c: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..0.5));
        let rate = rng.random_range(-2.0..2.0);
        let amp = rng.random_range(0.0..0.2);
        let m = moving_xi_sup_ratio(&c, rate, amp).map_err(err)?;
        ensure(m <= 1.0 + 1e-6, || format!("standalone run {k}: sup ratio {m:.9}"))?;
        ratio = ratio.max(m);
    }
    let identity = xi_energy_identity().map_err(err)?;
    ensure(identity <= 1e-8, || format!("energy identity off by {identity:.3e}"))?;
    Ok(format!("{} kinetic and 10 standalone runs, largest sup ratio {ratio:.9}; energy identity {identity:.2e}", runs.len()))
}

fn bumpy(mesh: &ColumnMesh, c: &[f64]) -> NumberDensity {
    let mut xi = vec![0.0; mesh.ncells()];
    for j in 0..mesh.nz {
        for i in 0..mesh.nx {
            let p = mesh.center(i, j);
            xi[mesh.cell(i, j)] = 1.0 + c[0] * (TAU * p[0] + c[1]).sin() * (3.0 * p[1]).cos() + c[2] * ((7.0 * p[0]).cos() * p[1]).powi(2);
        }
    }
    NumberDensity { xi, t: 0.0 }
}

fn moving_xi_sup_ratio(c: &[f64], rate: f64, amp: f64) -> Result<f64> {
    let nx = 8;
    let mesh_at = |t: f64| {
        let eta: Vec<f64> = (0..nx).map(|i| amp * (TAU * i as f64 / nx as f64).cos() * (4.0 * t).sin()).collect();
        ColumnMesh::new(nx, 5, 1.0, 1.0, 0.5, Profile::default(), &eta)
    };
    let mut mesh = mesh_at(0.0);
    let mut x = bumpy(&mesh, c);
    let sup = |x: &NumberDensity| x.xi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sup0 = sup(&x);
    let mut worst = 1.0f64;
    let dt = 0.02;
    for n in 0..40 {
        let new = mesh_at((n + 1) as f64 * dt);
        let fl = flows::shear(&mesh, rate).add(&flows::mesh_following(&mesh, &new, dt));
        x = step_xi(&x, &XiStep { old: &mesh, new: &new, fluxes: &fl, eps: 0.01, theta: 1.0, dt, source: None })?;
        worst = worst.max(sup(&x) / sup0);
        mesh = new;
    }
    Ok(worst)
}

/// Relative defect of `|X(T)|^2 + 2 eps int |grad X|^2 = |X(0)|^2` with v = 0.
fn xi_energy_identity() -> Result<f64> {
    let m = ColumnMesh::flat(12, 8, 1.0, 1.0, 0.5);
    let f = Fluxes::zero(12, 8);
    let (eps, dt) = (0.05, 0.01);
    let x0 = bumpy(&m, &[0.4, 0.2, 0.3]);
    let e0 = x0.l2_sq(&m);
    let mut x = x0;
    let mut diss = 0.0;
    for _ in 0..100 {
        let y = step_xi(&x, &XiStep { old: &m, new: &m, fluxes: &f, eps, theta: 0.5, dt, source: None })?;
        let mid = NumberDensity { xi: x.xi.iter().zip(y.xi.iter()).map(|(a, b)| 0.5 * (a + b)).collect(), t: 0.0 };
        diss += 2.0 * eps * dt * mid.grad_sq(&m);
        x = y;
    }
    Ok((x.l2_sq(&m) + diss - e0).abs() / e0)
}

fn stress_solver(kind: SpringKind, nr: usize, eth: f64) -> Result<FokkerPlanck> {
    let params = PhysicalParams::new(0.1, 0.01, 1.0, 0.3, eth, vec![vec![1.0]])?;
    let law = SpringLaw::new(kind, 10.0, 1, 2)?;
    FokkerPlanck::new(PolymerModel::new(law, None, params)?, nr, 16, f64::INFINITY)
}

fn diff(a: &Mat2, b: &Mat2) -> f64 {
    frobenius(&[[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]])
}

/// 5: force-law and gradient forms agree; Hookean second moment is the identity.
pub fn stress_forms() -> Check {
    let f = stress_solver(SpringKind::Fene, 8, 0.0).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for n in 0..50 {
        let a = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        let c: f64 = rng.random_range(-0.2..0.2);
        let d: f64 = rng.random_range(-0.1..0.1);
        let p = move |q: [f64; 2]| (a[0] * q[0] + a[1] * q[1] + c * q[0] * q[1] + d * (q[0] * q[0] + q[1] * q[1])).exp();
        let g = move |q: [f64; 2]| {
            let v = p(q);
            [v * (a[0] + c * q[1] + 2.0 * d * q[0]), v * (a[1] + c * q[0] + 2.0 * d * q[1])]
        };
        let (fl, mut gr, mass) = continuous_forms(&f.model.maxwellian, &p, &g, 24, 96);
        gr[0][0] += mass;
        gr[1][1] += mass;
        let rel = diff(&fl, &gr) / frobenius(&fl);
        ensure(rel <= 1e-6, || format!("state {n}: relative difference {rel:.3e}"))?;
        worst = worst.max(rel);
    }
    // the same identity on the discrete space, cell by cell
    let fd = stress_solver(SpringKind::Fene, 10, 0.1).map_err(err)?;
    let mesh = ColumnMesh::flat(3, 2, 1.0, 1.0, 0.5);
    let st = ConfigDensity::from_fn(&mesh, &fd.grid, |x, q| (0.3 * q[0] + x[0]).cos().abs() + 0.1 * q[1] * q[1] + x[1]);
    let xi = fd.marginal(&st);
    let a = kramers_stress(&st, &xi, &fd);
    let b = kramers_stress_gradient_form(&st, &xi, &fd);
    let discrete = a.total.iter().zip(b.total.iter()).map(|(x, y)| diff(x, y) / (1.0 + frobenius(x))).fold(0.0, f64::max);
    ensure(discrete <= 1e-12, || format!("discrete forms differ by {discrete:.3e}"))?;
    // Hookean, psi = 1: k (int M q (x) q - 2 I) - eth I with int M q (x) q = I
    let (k, eth) = (0.3, 0.2);
    let h = stress_solver(SpringKind::Hookean, 32, eth).map_err(err)?;
    let eq = ConfigDensity::equilibrium(1, h.nq());
    let t = kramers_stress(&eq, &h.marginal(&eq), &h).total[0];
    let moment = [[(t[0][0] + eth) / k + 2.0, t[0][1] / k], [t[1][0] / k, (t[1][1] + eth) / k + 2.0]];
    let gauss = diff(&moment, &[[1.0, 0.0], [0.0, 1.0]]);
    ensure(gauss <= 1e-8, || format!("Hookean second moment off the identity by {gauss:.3e}"))?;
    Ok(format!("50 smooth states, worst {worst:.2e}; discrete {discrete:.1e}; Hookean moment error {gauss:.1e}"))
}

/// 6: truncated spring parts grow at most like C l, and converge as l grows.
pub fn truncation_bound() -> Check {
    let f = stress_solver(SpringKind::Fene, 8, 0.1).map_err(err)?;
    let nq = f.nq();
    let spiky = |ncells: usize, peak: f64| {
        let mut psi = vec![1.0; ncells * nq];
        for c in 0..ncells {
            psi[c * nq + (7 * c + 30) % nq] = peak;
            psi[c * nq + (11 * c + 3) % nq] = 0.5 * peak;
        }
        ConfigDensity { psi, ncells, nq, t: 0.0 }
    };
    let mut worst = 0.0f64;
    for ell in [1.0, 2.0, 4.0, 8.0, 16.0] {
        for peak in [ell, 10.0 * ell, 1e4] {
            let sup = truncated_spring_parts(&spiky(4, peak), &f.grid, ell).iter().map(frobenius).fold(0.0, f64::max);
            ensure(sup <= TRUNCATION_CONSTANT * ell, || format!("l = {ell}, peak {peak}: sup {sup:.4} > {:.4}", TRUNCATION_CONSTANT * ell))?;
            worst = worst.max(sup / ell);
        }
    }
    let st = spiky(3, 12.0);
    let xi = f.marginal(&st);
    let exact = kramers_stress_gradient_form(&st, &xi, &f);
    let mut errs = Vec::new();
    for ell in [1.0, 2.0, 4.0, 8.0, 16.0] {
        let t = truncated_stress(&st, &xi, &f, ell);
        errs.push(t.total.iter().zip(exact.total.iter()).map(|(a, b)| diff(a, b)).fold(0.0, f64::max));
    }
    ensure(errs.windows(2).all(|w| w[1] <= w[0] + 1e-14), || format!("errors not decreasing: {}", sci(&errs)))?;
    ensure(errs[4] < 1e-10, || format!("l = 16 still off by {:.3e}", errs[4]))?;
    Ok(format!("max sup/l = {worst:.4} <= C = {TRUNCATION_CONSTANT}; errors {}", sci(&errs)))
}

fn random_shell_field(rng: &mut ChaCha8Rng, m: &KoiterModel, amp: f64) -> Vec<f64> {
    let c: [f64; 6] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let p = m.shell.period;
    (0..m.shell.len())
        .map(|k| {
            let y = m.shell.node(k);
            let (s, t) = (TAU * y[0] / p[0], TAU * y[1] / p[1]);
            amp * (c[0] * s.cos() + c[1] * t.sin() + c[2] * (s + 2.0 * t).cos() + c[3] * (2.0 * s).sin() * t.cos() + c[4] + c[5] * (3.0 * t).cos())
                / 5.0
        })
        .collect()
}

/// 7: directional derivative of the Koiter energy against central differences.
pub fn koiter_gradient() -> Check {
    let cyl = ReferenceShell::new(Surface::Cylinder { radius: 1.0 }, [8, 12], [2.0, TAU], 0.3, 0.3, 0.1, Profile::default()).map_err(err)?;
    let flat = ReferenceShell::flat([10, 6], [TAU, TAU], 1.0, 0.5).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for shell in [cyl, flat] {
        let m = KoiterModel::new(shell, 1.0, 1.0, 0.1, false).map_err(err)?;
        let z = vec![0.0; m.shell.len()];
        let (e0, g0) = (m.energy(&z).map_err(err)?, m.gradient(&z).map_err(err)?);
        ensure(e0 == 0.0 && g0.iter().all(|g| *g == 0.0), || format!("K(0) = {e0:e}, |K'(0)| = {:e}", norm2(&g0)))?;
        for n in 0..20 {
            let eta = random_shell_field(&mut rng, &m, 0.05);
            let zeta = random_shell_field(&mut rng, &m, 0.1);
            let h = 1e-4;
            let plus: Vec<f64> = eta.iter().zip(&zeta).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = eta.iter().zip(&zeta).map(|(a, b)| a - h * b).collect();
            let fd = (m.energy(&plus).map_err(err)? - m.energy(&minus).map_err(err)?) / (2.0 * h);
            let an = m.inner(&m.gradient(&eta).map_err(err)?, &zeta);
            let rel = (fd - an).abs() / an.abs().max(1e-14);
            ensure(rel < 1e-5, || format!("sample {n}: relative error {rel:.3e}"))?;
            worst = worst.max(rel);
        }
    }
    Ok(format!("40 samples on a cylinder and a flat shell, worst relative error {worst:.2e}; K(0) = 0, K'(0) = 0"))
}

fn run_preset(name: &str) -> std::result::Result<(RunConfig, Trajectory), String> {
    let cfg = preset(name)?;
    let p = cfg.coupled_problem(cfg.shell.rho).map_err(err)?;
    let init = coupled_initial(&cfg, &p).map_err(err)?;
    let traj = fixed_point_solve(&p, init, &RunOptions { t_end: cfg.run.t_end, snapshot_every: 0 }).map_err(err)?;
    if let Some(e) = &traj.stopped {
        return Err(format!("{name} stopped early: {e}"));
    }
    Ok((cfg, traj))
}

/// 8: the full energy inequality on the forced preset, monotone energy on the free one.
pub fn coupled_ledger() -> Check {
    let (cfg, forced) = run_preset("forced-breathing-shell")?;
    let rep = energy_ledger(&forced, &LedgerOptions { slack: 1e-3, ..LedgerOptions::default() }).map_err(err)?;
    let (_, free) = run_preset("free-shell-vibration")?;
    let mono = energy_ledger(&free, &LedgerOptions { slack: 1e-3, require_monotone: true, ..LedgerOptions::default() }).map_err(err)?;
    Ok(format!(
        "forced: {} steps, worst excess {:.2e}; free: largest energy increase {:.2e} (slack {})",
        forced.records.len(),
        rep.worst_excess,
        mono.max_increase,
        cfg.solver.ledger_slack
    ))
}

/// 9: the skew-symmetric convection does no work, on random solenoidal fields
/// over wavy domains and at every step of coupled runs.
pub fn convection_neutrality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let amp = rng.random_range(0.0..0.15);
        let phase = rng.random_range(0.0..TAU);
        let (nx, nz) = (10, 6);
        let eta: Vec<f64> = (0..nx).map(|i| amp * (TAU * i as f64 / nx as f64 + phase).cos()).collect();
        let mesh = ColumnMesh::new(nx, nz, TAU, 1.0, 0.5, Profile::default(), &eta);
        let ops = StaggeredOps::new(&mesh);
        let lay = Layout { nx, nz };
        let mut psi = vec![0.0; nx * (nz + 1)];
        for i in 0..nx {
            for jf in 1..nz {
                psi[i * (nz + 1) + jf] = rng.random_range(-1.0..1.0);
            }
        }
        let b = lay.from_stream(&psi, ops.hx);
        let (bx, bz) = ops.advecting_components(&b);
        let c = ops.convection(&bx, &bz);
        let u: Vec<f64> = (0..lay.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cu = c.mul(&u);
        let work: f64 = u.iter().zip(cu.iter()).map(|(a, b)| a * b).sum();
        let rel = work.abs() / (norm2(&u) * norm2(&cu));
        ensure(rel < 1e-12, || format!("random field {k}: relative work {rel:.3e}"))?;
        worst = worst.max(rel);
    }
    let mut steps = 0;
    let mut coupled = 0.0f64;
    for name in ["forced-breathing-shell", "free-shell-vibration"] {
        let (_, traj) = run_preset(name)?;
        for (n, r) in traj.records.iter().enumerate() {
            ensure(r.convection_work.abs() < 1e-12, || format!("{name} step {n}: convection work {:.3e}", r.convection_work))?;
            coupled = coupled.max(r.convection_work.abs());
        }
        steps += traj.records.len();
    }
    Ok(format!("20 random fields, worst relative work {worst:.1e}; {steps} coupled steps, worst |work| {coupled:.1e}"))
}

/// 10: the regularization sweep.
pub fn refinement() -> Check {
    let cfg = preset("rho-refinement")?;
    let rep = rho_refinement_study(
        &cfg.sweep.rhos,
        |rho| {
            let p = cfg.coupled_problem(rho)?;
            let s = coupled_initial(&cfg, &p)?;
            Ok((p, s))
        },
        &RunOptions { t_end: cfg.run.t_end, snapshot_every: 0 },
    )
    .map_err(err)?;
    ensure(rep.all_completed(), || "a level stopped early".into())?;
    let cauchy: Vec<String> = rep.cauchy.iter().map(|c| format!("[{:.2e} {:.2e} {:.2e}]", c[0], c[1], c[2])).collect();
    let detail = format!("Cauchy (u, eta, xi) {}; regularizer ratios {:.2?}", cauchy.join(" > "), rep.regularizer_ratios);
    ensure(rep.monotone, || format!("not monotone: {detail}"))?;
    ensure(rep.regularizer_ratios.iter().all(|r| *r >= 10.0), || format!("ratio below 10: {detail}"))?;
    Ok(detail)
}

fn scratch_dir(tag: &str) -> PathBuf {
    let nanos = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_nanos());
    std::env::temp_dir().join(format!("polyshell-{tag}-{}-{nanos}", std::process::id()))
}

/// 11: the blow-up preset ends with exit code 4 below the tube, and its
/// partial outputs replay bit for bit in a second process.
pub fn admissibility_guard(exe: &Path) -> Check {
    let cfg = preset("blow-up-guard")?;
    let mut dirs = Vec::new();
    for tag in ["a", "b"] {
        let root = scratch_dir(tag);
        std::fs::create_dir_all(&root).map_err(|e| e.to_string())?;
        let out = Command::new(exe)
            .args(["simulate", "blow-up-guard"])
            .env(super::output::OUTPUT_ROOT_ENV, &root)
            .output()
            .map_err(|e| format!("cannot run {}: {e}", exe.display()))?;
        let code = out.status.code();
        ensure(code == Some(4), || format!("exit code {code:?}, stderr: {}", String::from_utf8_lossy(&out.stderr).trim()))?;
        dirs.push(root.join(&cfg.output.dir).join(&cfg.run.name));
    }
    let read = |p: PathBuf| std::fs::read(&p).map_err(|e| format!("{}: {e}", p.display()));
    for file in ["diagnostics.csv", "iterations.csv", "fields.vtk"] {
        ensure(read(dirs[0].join(file))? == read(dirs[1].join(file))?, || format!("{file} differs between runs"))?;
    }
    let table = super::output::CsvTable::read(&dirs[0].join("diagnostics.csv")).map_err(err)?;
    let sup = table.column("sup_eta").ok_or("no sup_eta column")?;
    let steps = sup.len() - 1;
    let top = sup[1..].iter().fold(0.0f64, |m, x| m.max(*x));
    ensure(steps > 0, || "no accepted steps were saved".into())?;
    ensure(top < cfg.geometry.tube, || format!("sup eta reached {top} >= L = {}", cfg.geometry.tube))?;
    for d in &dirs {
        let _ = std::fs::remove_dir_all(d.parent().and_then(Path::parent).unwrap_or(d));
    }
    Ok(format!("exit 4 after {steps} saved steps, sup eta {top:.4} < L = {}; replay byte-identical", cfg.geometry.tube))
}

/// Runs a suite, printing each verdict as it completes.
pub fn run_suite(suite: Suite, exe: &Path, mut report: impl FnMut(&Verdict)) -> Vec<Verdict> {
    criteria(suite)
        .into_iter()
        .map(|id| {
            let v = run_criterion(id, exe);
            report(&v);
            v
        })
        .collect()
}
