use polyshell::coupler::*;
use polyshell::error::Error;
use polyshell::fluid::{Layout, StaggeredOps};
use polyshell::fokker_planck::{ConfigDensity, FokkerPlanck};
use polyshell::geometry::{ColumnMesh, ReferenceShell};
use polyshell::polymer_model::{PhysicalParams, PolymerModel, SpringLaw};
use polyshell::quad::integrate_adaptive;
use polyshell::shell_dynamics::KoiterModel;
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

fn problem(rho: f64, forcing: Forcing, dt: f64) -> CoupledProblem {
    let params = PhysicalParams::new(0.1, 0.01, 1.0, 0.1, 0.0, vec![vec![1.0]]).unwrap();
    let model = PolymerModel::new(SpringLaw::default(), None, params).unwrap();
    let fp = FokkerPlanck::new(model, 6, 12, f64::INFINITY).unwrap();
    let shell = ReferenceShell::flat([16, 1], [TAU, 1.0], 1.0, 0.5).unwrap();
    let km = KoiterModel::new(shell, 1.0, 1.0, 0.1, false).unwrap();
    CoupledProblem::new(fp, km, RegularizationKernel::from_rho(rho).unwrap(), 8, 1.0, dt, forcing, FixedPointConfig::default()).unwrap()
}

fn breathing(amplitude: f64, mode: usize, omega: f64) -> Forcing {
    Forcing { shell: ShellLoad::Breathing { amplitude, mode, omega }, body: BodyLoad::None }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------- mollifiers

#[test]
fn bump_symbol_matches_direct_quadrature() {
    let bump = |s: f64| if s.abs() < 1.0 { (-1.0 / (1.0 - s * s)).exp() } else { 0.0 };
    let mass = integrate_adaptive(-1.0, 1.0, 1e-13, &bump).unwrap();
    for w in [0.0, 0.5, 1.0, 3.0, 7.5, 20.0] {
        let direct = integrate_adaptive(-1.0, 1.0, 1e-13, &|s| bump(s) * (w * s).cos()).unwrap() / mass;
        assert!((bump_symbol(w) - direct).abs() < 1e-10, "w = {w}: {} vs {direct}", bump_symbol(w));
    }
}

#[test]
fn temporal_weights_are_averaging_and_symmetric_away_from_the_ends() {
    let k = RegularizationKernel::from_rho(0.02).unwrap();
    let dt = 0.005;
    let w = k.temporal_weights(20, dt);
    for row in &w {
        assert!(row.iter().all(|x| *x >= 0.0));
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
    // support radius ceil(0.02 / 0.005) = 4
    for n in 4..16 {
        for o in 1..=4 {
            assert!((w[n][n + o] - w[n][n - o]).abs() < 1e-15);
        }
        assert_eq!(w[n].iter().filter(|x| **x > 0.0).count(), 7);
    }
    // reflection keeps windows shorter than the kernel well defined
    for row in k.temporal_weights(2, dt) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn shell_regularization_fixes_constants_and_damps_modes_by_the_symbol() {
    let k = RegularizationKernel::from_rho(0.04).unwrap();
    let (nx, dt) = (32, 0.01);
    let constant = vec![vec![0.3; nx]; 9];
    for row in k.regularize_shell(&constant, TAU, dt) {
        assert!(max_abs_diff(&row, &vec![0.3; nx]) < 1e-14);
    }
    // a mode constant in time is scaled by the spatial symbol only
    let m = 3;
    let mode: Vec<f64> = (0..nx).map(|i| (TAU * (m * i) as f64 / nx as f64).cos()).collect();
    let out = k.regularize_shell(&vec![mode.clone(); 5], TAU, dt);
    let s = bump_symbol(m as f64 * k.shell);
    for row in out {
        let want: Vec<f64> = mode.iter().map(|x| s * x).collect();
        assert!(max_abs_diff(&row, &want) < 1e-13);
    }
}

#[test]
fn shell_regularization_tends_to_the_identity() {
    let (nx, dt, steps) = (32, 0.002, 100);
    let field = |n: usize, i: usize| ((n as f64) * dt).sin() * (TAU * i as f64 / nx as f64).cos();
    let hist: Vec<Vec<f64>> = (0..=steps).map(|n| (0..nx).map(|i| field(n, i)).collect()).collect();
    let mut errs = Vec::new();
    for rho in [1e-1, 1e-2, 1e-3] {
        let k = RegularizationKernel::from_rho(rho).unwrap();
        let out = k.regularize_shell(&hist, TAU, dt);
        errs.push(out.iter().zip(hist.iter()).map(|(a, b)| max_abs_diff(a, b)).fold(0.0, f64::max));
    }
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    assert!(errs[2] < 2e-3, "{errs:?}");
}

fn flat_setup(rho: f64) -> (Layout, SpatialMollifier, StaggeredOps, f64, f64) {
    let (nx, nz) = (16, 8);
    let layout = Layout { nx, nz };
    let k = RegularizationKernel::from_rho(rho).unwrap();
    let sm = SpatialMollifier::new(layout, TAU, 1.0, &k);
    let ops = StaggeredOps::new(&ColumnMesh::flat(nx, nz, TAU, 1.0, 0.5));
    (layout, sm, ops, TAU / nx as f64, k.spatial)
}

fn stream_field(layout: Layout, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut psi = vec![0.0; layout.nx * (layout.nz + 1)];
    for i in 0..layout.nx {
        for jf in 1..=layout.nz {
            psi[i * (layout.nz + 1) + jf] = f(i, jf);
        }
    }
    psi
}

#[test]
fn spatial_mollifier_keeps_uniform_flow() {
    let (layout, sm, _, hx, _) = flat_setup(0.05);
    let hz = 1.0 / layout.nz as f64;
    let v = layout.from_stream(&stream_field(layout, |_, jf| 0.7 * jf as f64 * hz), hx);
    assert!(max_abs_diff(&sm.apply(&v), &v) < 1e-13);
}

#[test]
fn spatial_mollifier_scales_a_horizontal_mode_by_the_bump_symbol() {
    let (layout, sm, _, hx, delta) = flat_setup(0.05);
    let hz = 1.0 / layout.nz as f64;
    for m in [1usize, 2, 5] {
        // a stream function linear in z passes the vertical smoothing unchanged
        let psi = stream_field(layout, |i, jf| (m as f64 * (i as f64 + 0.5) * hx).cos() * jf as f64 * hz);
        let v = layout.from_stream(&psi, hx);
        let s = bump_symbol(m as f64 * delta);
        let want: Vec<f64> = v.iter().map(|x| s * x).collect();
        assert!(max_abs_diff(&sm.apply(&v), &want) < 1e-12, "mode {m}");
    }
}

#[test]
fn spatial_mollifier_transpose_is_the_adjoint() {
    let (layout, sm, _, _, _) = flat_setup(0.05);
    let n = layout.len();
    let a: Vec<f64> = (0..n).map(|k| ((k * 7 % 13) as f64 - 6.0) / 5.0).collect();
    let b: Vec<f64> = (0..n).map(|k| ((k * 5 % 11) as f64 - 5.0) / 3.0).collect();
    let lhs: f64 = sm.apply(&a).iter().zip(b.iter()).map(|(x, y)| x * y).sum();
    let rhs: f64 = a.iter().zip(sm.apply_t(&b).iter()).map(|(x, y)| x * y).sum();
    assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
}

#[test]
fn spatial_mollifier_damps_high_modes_more_as_width_grows() {
    // sup of the mollified field of a unit-energy short wave shrinks with the width
    let mut sups = Vec::new();
    for rho in [1e-3, 1e-2, 1e-1] {
        let (layout, sm, ops, hx, _) = flat_setup(rho);
        let hz = 1.0 / layout.nz as f64;
        let psi = stream_field(layout, |i, jf| (6.0 * (i as f64 + 0.5) * hx).cos() * jf as f64 * hz);
        let v = layout.from_stream(&psi, hx);
        let e = ops.kinetic_energy(&v).sqrt();
        let out = sm.apply(&v);
        sups.push(ops.velocity(&out).iter().fold(0.0f64, |m, x| m.max(x.abs())) / e);
    }
    assert!(sups[0] > sups[1] && sups[1] > sups[2], "{sups:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mollified_velocity_is_solenoidal_with_no_bottom_flux(
        coeffs in prop::collection::vec(-1.0f64..1.0, 16 * 7),
        top in prop::collection::vec(-1.0f64..1.0, 16),
        rho in 1e-3f64..0.2,
    ) {
        let (layout, sm, ops, hx, _) = flat_setup(rho);
        // an arbitrary solenoidal field: random stream function, zero at the bottom
        let nz = layout.nz;
        let psi = stream_field(layout, |i, jf| if jf == nz { top[i] } else { coeffs[i * (nz - 1) + jf - 1] });
        let v = layout.from_stream(&psi, hx);
        let out = sm.apply(&v);
        prop_assert!(ops.max_divergence(&out) < 1e-12);
        // linearity
        let twice: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
        let out2 = sm.apply(&twice);
        prop_assert!(out.iter().zip(out2.iter()).all(|(a, b)| (2.0 * a - b).abs() < 1e-12));
        // the shell slot is the x-mollified shell velocity
        let k = RegularizationKernel::from_rho(rho).unwrap();
        let fft = polyshell::spectral::Fft2::new(layout.nx, 1);
        let s = k.mollify_periodic(&fft, layout.shell_velocity(&v), TAU, k.spatial);
        prop_assert!(max_abs_diff(layout.shell_velocity(&out), &s) < 1e-12);
    }
}

// ------------------------------------------------------------ fixed point

#[test]
fn construction_rejects_bad_settings() {
    let params = PhysicalParams::new(0.1, 0.01, 1.0, 0.1, 0.0, vec![vec![1.0]]).unwrap();
    let model = PolymerModel::new(SpringLaw::default(), None, params).unwrap();
    let fp = FokkerPlanck::new(model, 6, 12, f64::INFINITY).unwrap();
    let shell = ReferenceShell::flat([16, 1], [TAU, 1.0], 1.0, 0.5).unwrap();
    let km = KoiterModel::new(shell, 1.0, 1.0, 0.1, false).unwrap();
    let k = RegularizationKernel::from_rho(0.1).unwrap();
    let f = Forcing::none();
    let cfg = FixedPointConfig::default();
    let bad = [
        CoupledProblem::new(fp.clone(), km.clone(), k, 8, 1.0, 0.0, f, cfg),
        CoupledProblem::new(fp.clone(), km.clone(), k, 1, 1.0, 0.01, f, cfg),
        CoupledProblem::new(fp.clone(), km.clone(), k, 8, 0.4, 0.01, f, cfg),
        CoupledProblem::new(fp.clone(), km.clone(), k, 8, 1.0, 0.01, f, FixedPointConfig { damping: 1.5, ..cfg }),
        CoupledProblem::new(fp, km, k, 8, 1.0, 0.01, f, FixedPointConfig { tol: 0.0, ..cfg }),
    ];
    for r in bad {
        assert!(matches!(r, Err(Error::Config(_))));
    }
    assert!(matches!(RegularizationKernel::from_rho(0.0), Err(Error::Config(_))));
}

#[test]
fn initial_state_checks_compatibility() {
    let p = problem(0.1, Forcing::none(), 0.005);
    let nx = p.nx();
    let psi = || ConfigDensity::equilibrium(p.layout.ncells(), p.fp.nq());
    // net shell velocity would change the volume
    assert!(matches!(p.initial_state(&vec![0.0; nx], &vec![0.1; nx], None, psi()), Err(Error::Config(_))));
    // fluid trace does not match the shell velocity
    let v = vec![0.0; p.layout.len()];
    let eta1: Vec<f64> = (0..nx).map(|i| 0.1 * (TAU * i as f64 / nx as f64).cos()).collect();
    assert!(matches!(p.initial_state(&vec![0.0; nx], &eta1, Some(&v), psi()), Err(Error::Config(_))));
    // shell outside the tube
    assert!(matches!(p.initial_state(&vec![0.6; nx], &vec![0.0; nx], None, psi()), Err(Error::Admissibility(_))));
    // a valid start is divergence free and matches the trace
    let s = p.initial_state(&vec![0.0; nx], &eta1, None, psi()).unwrap();
    let ops = StaggeredOps::new(&p.mesh(&s.shell.eta).unwrap());
    assert!(ops.max_divergence(&s.fluid.v) < 1e-10);
    assert!(s.fluid.trace_error(&p.layout, &eta1) < 1e-14);
}

#[test]
fn rest_is_a_fixed_point_reached_in_one_iteration() {
    let p = problem(0.1, Forcing::none(), 0.005);
    let init = p.rest_state().unwrap();
    let traj = fixed_point_solve(&p, init.clone(), &RunOptions { t_end: 0.05, snapshot_every: 0 }).unwrap();
    assert!(traj.stopped.is_none());
    assert_eq!(traj.records.len(), 10);
    assert!(traj.iterations.iter().all(|r| r.iteration == 1 && r.residual < 1e-15), "{:?}", traj.iterations);
    let e0 = traj.initial.energy();
    for r in &traj.records {
        assert!((r.breakdown.energy() - e0).abs() < 1e-13);
        assert!(r.breakdown.acc.dissipation() < 1e-20);
    }
    let fin = &traj.final_state;
    assert!(fin.fluid.v.iter().all(|x| x.abs() < 1e-14));
    assert!(fin.shell.eta.iter().all(|x| x.abs() < 1e-14));
    assert!(max_abs_diff(&fin.psi.psi, &init.psi.psi) < 1e-13);
}

#[test]
fn forced_run_contracts_and_stays_consistent() {
    let p = problem(0.1, breathing(0.5, 1, 1.5), 0.005);
    let init = p.rest_state().unwrap();
    let traj = fixed_point_solve(&p, init.clone(), &RunOptions { t_end: 0.02, snapshot_every: 0 }).unwrap();
    assert!(traj.stopped.is_none());
    assert_eq!(traj.windows, vec![(0.0, 4)]);
    let ratios = traj.contraction_ratios();
    assert!(!ratios.is_empty());
    assert!(ratios.iter().all(|r| *r < 0.9), "{ratios:?}");

    // the accepted window is a fixed point of the solution map up to the tolerance
    let eta: Vec<Vec<f64>> = traj.samples.iter().map(|s| s.eta.clone()).collect();
    let v: Vec<Vec<f64>> = traj.samples.iter().map(|s| s.v.clone()).collect();
    let (eta2, v2) = p.solution_map(&init, &eta, &v).unwrap();
    let (res, norm) = p.window_distance((&eta, &v), (&eta2, &v2));
    assert!(norm > 0.0);
    assert!(res <= 2.0 * p.cfg.tol * (1.0 + norm), "residual {res:.3e}, norm {norm:.3e}");

    for r in &traj.records {
        assert!(r.max_divergence < 1e-9);
        assert!(r.trace_error < 1e-12);
        assert!(r.min_psi > 0.0);
        assert!(r.sup_eta < p.model.shell.tube);
    }
}

#[test]
fn solution_map_rejects_mismatched_iterates() {
    let p = problem(0.1, Forcing::none(), 0.005);
    let init = p.rest_state().unwrap();
    let eta = vec![vec![0.0; p.nx()]; 3];
    let v = vec![vec![0.0; p.layout.len()]; 2];
    assert!(matches!(p.solution_map(&init, &eta, &v), Err(Error::Config(_))));
}

#[test]
fn large_load_stops_at_the_guard_with_partial_results() {
    let f = Forcing { shell: ShellLoad::Steady { amplitude: 20.0, mode: 1 }, body: BodyLoad::None };
    let p = problem(0.1, f, 0.005);
    let traj = fixed_point_solve(&p, p.rest_state().unwrap(), &RunOptions { t_end: 2.0, snapshot_every: 0 }).unwrap();
    assert!(matches!(traj.stopped, Some(Error::Admissibility(_))), "{:?}", traj.stopped);
    assert!(!traj.records.is_empty());
    assert!(traj.records.len() < 400);
    assert!(traj.records.iter().all(|r| r.sup_eta < p.model.shell.tube));
    assert_eq!(traj.samples.len(), traj.records.len() + 1);
    assert_eq!(traj.windows.iter().map(|w| w.1).sum::<usize>(), traj.records.len());
}

// ---------------------------------------------------------------- ledger

#[test]
fn forced_run_satisfies_the_energy_inequality() {
    let p = problem(0.1, breathing(0.5, 1, 1.5), 0.005);
    let traj = fixed_point_solve(&p, p.rest_state().unwrap(), &RunOptions { t_end: 0.2, snapshot_every: 10 }).unwrap();
    assert!(traj.stopped.is_none());
    assert_eq!(traj.snapshots.len(), 5);
    let rep = energy_ledger(&traj, &LedgerOptions::default()).unwrap();
    assert!(rep.worst_excess <= 1e-3, "{}", rep.summary());
    assert!(rep.worst_young_excess <= 1e-3, "{}", rep.summary());
    // dissipation integrals only grow
    for w in traj.records.windows(2) {
        let (a, b) = (&w[0].breakdown.acc, &w[1].breakdown.acc);
        assert!(b.viscous >= a.viscous && b.fisher_x >= a.fisher_x && b.fisher_q >= a.fisher_q && b.xi_gradient >= a.xi_gradient);
        assert!(b.young_bound >= a.young_bound);
    }
    assert!(rep.last.acc.forcing_work.abs() > 0.0);
}

#[test]
fn free_vibration_energy_does_not_increase() {
    let p = problem(0.1, Forcing::none(), 0.005);
    let nx = p.nx();
    let eta0: Vec<f64> = (0..nx).map(|i| 0.05 * (TAU * i as f64 / nx as f64).cos()).collect();
    let psi = ConfigDensity::equilibrium(p.layout.ncells(), p.fp.nq());
    let init = p.initial_state(&eta0, &vec![0.0; nx], None, psi).unwrap();
    let traj = fixed_point_solve(&p, init, &RunOptions { t_end: 0.25, snapshot_every: 0 }).unwrap();
    assert!(traj.stopped.is_none());
    let rep = energy_ledger(&traj, &LedgerOptions { require_monotone: true, ..LedgerOptions::default() }).unwrap();
    assert!(rep.max_increase <= 1e-9, "{}", rep.summary());
    assert!(rep.last.energy() < rep.initial.energy());
}

#[test]
fn ledger_reports_a_violation_with_the_breakdown() {
    let p = problem(0.1, Forcing::none(), 0.005);
    let nx = p.nx();
    let eta0: Vec<f64> = (0..nx).map(|i| 0.05 * (TAU * i as f64 / nx as f64).cos()).collect();
    let psi = ConfigDensity::equilibrium(p.layout.ncells(), p.fp.nq());
    let init = p.initial_state(&eta0, &vec![0.0; nx], None, psi).unwrap();
    let mut traj = fixed_point_solve(&p, init, &RunOptions { t_end: 0.03, snapshot_every: 0 }).unwrap();
    traj.records[3].breakdown.fluid_kinetic += 0.1;
    match energy_ledger(&traj, &LedgerOptions::default()) {
        Err(Error::Inequality(msg)) => {
            assert!(msg.contains("step 3"));
            assert!(msg.contains("fluid kinetic"));
        }
        other => panic!("expected an inequality error, got {other:?}"),
    }
}

// ---------------------------------------------------------------- sweep

#[test]
fn refinement_study_at_rest_gives_identical_levels() {
    let rep = rho_refinement_study(
        &[1e-1, 1e-2],
        |rho| {
            let p = problem(rho, Forcing::none(), 0.005);
            let s = p.rest_state()?;
            Ok((p, s))
        },
        &RunOptions { t_end: 0.03, snapshot_every: 0 },
    )
    .unwrap();
    assert!(rep.all_completed());
    assert_eq!(rep.cauchy.len(), 1);
    assert!(rep.cauchy[0].iter().all(|c| *c < 1e-14), "{:?}", rep.cauchy);
}

#[test]
fn periodic_breathing_data_is_admissible_and_compatible() {
    let p = problem(0.01, breathing(0.05, 2, 8.0), 0.005);
    let (eta0, eta1, v0) = periodic_breathing_data(&p, 0.05, 2, 8.0).unwrap();
    let mesh = p.mesh(&p.initial_mesh_eta(&eta0)).unwrap();
    let psi = ConfigDensity::from_fn(&mesh, &p.fp.grid, |x, _| 1.0 + 0.5 * x[0].cos() * (PI * x[1]).sin());
    let s = p.initial_state(&eta0, &eta1, Some(&v0), psi).unwrap();
    // mode 2 only: the orbit has no mode-1 content
    let c1: f64 = eta0.iter().enumerate().map(|(i, e)| e * (TAU * i as f64 / 16.0).cos()).sum();
    let c2: f64 = eta0.iter().enumerate().map(|(i, e)| e * (2.0 * TAU * i as f64 / 16.0).cos()).sum();
    assert!(c1.abs() < 1e-12 && c2.abs() > 1e-6);
    assert!(s.fluid.trace_error(&p.layout, &eta1) < 1e-14);
}
