use polyshell::coupler::{CoupledProblem, FixedPointConfig, Forcing, RegularizationKernel};
use polyshell::diagnostics::{reynolds_check, Accumulators, EnergyBreakdown};
use polyshell::fluid::{Layout, StaggeredOps};
use polyshell::fokker_planck::{ConfigDensity, FokkerPlanck};
use polyshell::geometry::{ColumnMesh, Profile, ReferenceShell};
use polyshell::polymer_model::{PhysicalParams, PolymerModel, SpringLaw};
use polyshell::shell_dynamics::KoiterModel;
use std::f64::consts::{E, TAU};

const K: f64 = 0.1;

fn problem() -> CoupledProblem {
    let params = PhysicalParams::new(0.1, 0.01, 1.0, K, 0.0, vec![vec![1.0]]).unwrap();
    let model = PolymerModel::new(SpringLaw::default(), None, params).unwrap();
    let fp = FokkerPlanck::new(model, 6, 12, f64::INFINITY).unwrap();
    let shell = ReferenceShell::flat([16, 1], [TAU, 1.0], 1.0, 0.5).unwrap();
    let km = KoiterModel::new(shell, 1.0, 1.0, 0.1, false).unwrap();
    CoupledProblem::new(fp, km, RegularizationKernel::from_rho(0.1).unwrap(), 8, 1.0, 0.01, Forcing::none(), FixedPointConfig::default()).unwrap()
}

#[test]
fn rest_breakdown() {
    let p = problem();
    let b = p.breakdown(&p.rest_state().unwrap(), Accumulators::default()).unwrap();
    assert_eq!((b.fluid_kinetic, b.shell_kinetic, b.elastic, b.regularizer), (0.0, 0.0, 0.0, 0.0));
    // psi = 1 everywhere: the marginal is the Maxwellian mass
    let m: f64 = p.fp.grid.mass.iter().sum();
    assert!((b.xi_sup_sq - m * m).abs() < 1e-12);
    assert!((b.xi_l2_half - 0.5 * m * m * TAU).abs() < 1e-12);
    // F(1) = 1/e
    assert!((b.entropy - K * m * TAU / E).abs() < 1e-12);
    assert_eq!(b.acc.dissipation(), 0.0);
}

#[test]
fn entropy_vanishes_at_its_minimizer() {
    // psi = 1/e is the minimizer of F, where F vanishes
    let p = problem();
    let psi = ConfigDensity { psi: vec![1.0 / E; p.layout.ncells() * p.fp.nq()], ..ConfigDensity::equilibrium(p.layout.ncells(), p.fp.nq()) };
    let nx = p.nx();
    let s = p.initial_state(&vec![0.0; nx], &vec![0.0; nx], None, psi).unwrap();
    let b = p.breakdown(&s, Accumulators::default()).unwrap();
    assert!(b.entropy.abs() < 1e-15, "{}", b.entropy);
}

#[test]
fn breakdown_matches_direct_sums() {
    let p = problem();
    let nx = p.nx();
    let eta0: Vec<f64> = (0..nx).map(|i| 0.04 * (TAU * i as f64 / nx as f64).cos()).collect();
    let eta1: Vec<f64> = (0..nx).map(|i| 0.3 * (2.0 * TAU * i as f64 / nx as f64).sin()).collect();
    let mesh0 = p.mesh(&p.initial_mesh_eta(&eta0)).unwrap();
    let psi = ConfigDensity::from_fn(&mesh0, &p.fp.grid, |x, q| (1.0 + 0.4 * x[0].sin() * x[1]) * (1.0 + 0.1 * q[0]));
    let s = p.initial_state(&eta0, &eta1, None, psi).unwrap();
    let b = p.breakdown(&s, Accumulators::default()).unwrap();

    let w = p.model.weights[0];
    let shell_ke = 0.5 * w * eta1.iter().map(|x| x * x).sum::<f64>();
    assert!((b.shell_kinetic - shell_ke).abs() < 1e-12 * shell_ke);

    let fp_mesh = p.mesh(&s.mesh_eta).unwrap();
    let nq = p.fp.nq();
    let (mut ent, mut l2, mut sup) = (0.0, 0.0, 0.0f64);
    for j in 0..fp_mesh.nz {
        for i in 0..fp_mesh.nx {
            let c = fp_mesh.cell(i, j);
            let a = fp_mesh.area(i, j);
            let mut xi = 0.0;
            for k in 0..nq {
                let v = s.psi.psi[c * nq + k];
                let m = p.fp.grid.mass[k];
                xi += m * v;
                ent += a * m * (v * v.ln() + 1.0 / E);
            }
            l2 += a * xi * xi;
            sup = sup.max(xi);
        }
    }
    assert!((b.entropy - K * ent).abs() < 1e-10 * (K * ent));
    assert!((b.xi_l2_half - 0.5 * l2).abs() < 1e-10 * l2);
    assert!((b.xi_sup_sq - sup * sup).abs() < 1e-10 * sup * sup);
    assert!(b.regularizer > 0.0 && b.elastic > 0.0 && b.fluid_kinetic > 0.0);
}

#[test]
fn kinetic_terms_scale_quadratically() {
    let p = problem();
    let nx = p.nx();
    let eta1: Vec<f64> = (0..nx).map(|i| 0.2 * (TAU * i as f64 / nx as f64).cos()).collect();
    let eta2: Vec<f64> = eta1.iter().map(|x| 2.0 * x).collect();
    let psi = || ConfigDensity::equilibrium(p.layout.ncells(), p.fp.nq());
    let s1 = p.initial_state(&vec![0.0; nx], &eta1, None, psi()).unwrap();
    let s2 = p.initial_state(&vec![0.0; nx], &eta2, None, psi()).unwrap();
    let b1 = p.breakdown(&s1, Accumulators::default()).unwrap();
    let b2 = p.breakdown(&s2, Accumulators::default()).unwrap();
    assert!((b2.fluid_kinetic - 4.0 * b1.fluid_kinetic).abs() < 1e-12 * b2.fluid_kinetic);
    assert!((b2.shell_kinetic - 4.0 * b1.shell_kinetic).abs() < 1e-12 * b2.shell_kinetic);
    assert_eq!(b1.elastic, b2.elastic);
}

#[test]
fn uniform_flow_kinetic_energy_is_exact() {
    let (nx, nz, c) = (12, 6, 0.7);
    let mesh = ColumnMesh::flat(nx, nz, TAU, 1.0, 0.5);
    let ops = StaggeredOps::new(&mesh);
    let layout = Layout { nx, nz };
    // stream function c z
    let psi: Vec<f64> = (0..nx * (nz + 1)).map(|k| c * (k % (nz + 1)) as f64 / nz as f64).collect();
    let v = layout.from_stream(&psi, TAU / nx as f64);
    assert!((ops.kinetic_energy(&v) - 0.5 * c * c * TAU).abs() < 1e-12);
}

#[test]
fn csv_row_lines_up_with_the_columns() {
    let b = EnergyBreakdown {
        t: 1.0,
        fluid_kinetic: 2.0,
        shell_kinetic: 3.0,
        elastic: 4.0,
        regularizer: 5.0,
        xi_sup_sq: 6.0,
        xi_l2_half: 7.0,
        entropy: 8.0,
        acc: Accumulators {
            viscous: 1.0,
            xi_gradient: 2.0,
            fisher_x: 3.0,
            fisher_q: 4.0,
            forcing_work: 5.0,
            young_bound: 6.0,
            drag: 7.0,
            stress_work: 8.0,
        },
    };
    let vals = b.csv_values();
    let col = |name: &str| vals[EnergyBreakdown::CSV_COLUMNS.iter().position(|c| *c == name).unwrap()];
    assert_eq!(col("energy"), 35.0);
    assert_eq!(col("dissipation"), 10.0);
    assert_eq!(col("xi_l2_half"), 7.0);
    assert_eq!(col("stress_work"), 8.0);
    let mut a = b.acc;
    a.add(&b.acc);
    assert_eq!(a.dissipation(), 20.0);
    assert!(b.is_finite());
    assert!(!EnergyBreakdown { entropy: f64::NAN, ..b }.is_finite());
}

fn meshes(nx: usize, nz: usize, times: &[f64], eta: impl Fn(f64, f64) -> f64) -> Vec<ColumnMesh> {
    let hx = TAU / nx as f64;
    times
        .iter()
        .map(|&t| {
            let e: Vec<f64> = (0..nx).map(|i| eta(t, i as f64 * hx)).collect();
            ColumnMesh::new(nx, nz, TAU, 1.0, 0.5, Profile::default(), &e)
        })
        .collect()
}

#[test]
fn reynolds_residual_vanishes_on_a_fixed_domain() {
    let times: Vec<f64> = (0..6).map(|n| 0.1 * n as f64).collect();
    let ms = meshes(16, 8, &times, |_, _| 0.0);
    let f = |t: f64, p: [f64; 2]| (1.0 + t * t) * p[1].powi(2) + p[0].cos() * t;
    for r in reynolds_check(&f, &ms, &times) {
        assert!(r.abs() < 1e-12, "{r}");
    }
}

#[test]
fn reynolds_residual_vanishes_for_a_uniformly_rising_lid() {
    // |Omega(t)| is linear in a uniform displacement, so d/dt |Omega| is exact
    let times: Vec<f64> = (0..6).map(|n| 0.05 * n as f64).collect();
    let ms = meshes(16, 8, &times, |t, _| 0.3 * t);
    for r in reynolds_check(&|_, _| 1.0, &ms, &times) {
        assert!(r.abs() < 1e-12, "{r}");
    }
}

#[test]
fn reynolds_residual_converges_under_refinement() {
    let f = |t: f64, p: [f64; 2]| (1.0 + 0.5 * t) * p[0].cos() * p[1] * p[1] + p[1];
    let eta = |t: f64, x: f64| 0.1 * t.sin() * x.cos();
    let mut errs = Vec::new();
    for level in 0..3 {
        let (nx, nz) = (16 << level, 8 << level);
        let dt = 0.1 / (1 << level) as f64;
        let times: Vec<f64> = (0..=((0.4 / dt).round() as usize)).map(|n| 0.3 + n as f64 * dt).collect();
        let ms = meshes(nx, nz, &times, eta);
        errs.push(reynolds_check(&f, &ms, &times).iter().fold(0.0f64, |m, r| m.max(r.abs())));
    }
    assert!(errs[0] > 2.0 * errs[1] && errs[1] > 2.0 * errs[2], "{errs:?}");
}
