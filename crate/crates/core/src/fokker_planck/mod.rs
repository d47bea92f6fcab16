//! Finite-volume solver for the configuration density `psi_hat = psi / M`
//! on the moving column mesh times the polar configuration grid.
//!
//! A step is a Lie split: transport and spatial diffusion for every
//! configuration cell (one factorization shared by all of them), then drag
//! and configuration diffusion for every spatial cell. Both substeps are
//! backward Euler with M-matrices, so nonnegativity, the number-density
//! maximum principle and the discrete entropy inequality hold exactly.

pub mod qgrid;
pub mod qstep;
pub mod xstep;

use crate::error::{Error, Result};
use crate::geometry::ColumnMesh;
use crate::polymer_model::{entropy, PolymerModel};
use qgrid::QGrid;
use rayon::prelude::*;
use xstep::{transmissibility, Fluxes, TransportStep};

pub use xstep::mesh_fluxes;

/// Nonnegativity tolerance used by the diagnostics.
pub const TOL_NEG: f64 = 1e-8;

/// Cell values of `psi_hat`, indexed `cell * nq + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigDensity {
    pub psi: Vec<f64>,
    pub ncells: usize,
    pub nq: usize,
    pub t: f64,
}

impl ConfigDensity {
    pub fn equilibrium(ncells: usize, nq: usize) -> Self {
        ConfigDensity { psi: vec![1.0; ncells * nq], ncells, nq, t: 0.0 }
    }

    /// Cell averages of `f(x, z, q)`; the spatial value is taken at cell centres.
    pub fn from_fn(mesh: &ColumnMesh, grid: &QGrid, f: impl Fn([f64; 2], [f64; 2]) -> f64) -> Self {
        let (ncells, nq) = (mesh.ncells(), grid.len());
        let mut psi = vec![0.0; ncells * nq];
        for j in 0..mesh.nz {
            for i in 0..mesh.nx {
                let c = mesh.cell(i, j);
                let x = mesh.center(i, j);
                for k in 0..nq {
                    psi[c * nq + k] = grid.cell_average(k, &|q| f(x, q));
                }
            }
        }
        ConfigDensity { psi, ncells, nq, t: 0.0 }
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        &self.psi[c * self.nq..(c + 1) * self.nq]
    }

    pub fn min(&self) -> f64 {
        self.psi.iter().fold(f64::INFINITY, |m, &x| m.min(x))
    }

    pub fn max(&self) -> f64 {
        self.psi.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x))
    }
}

/// Inputs of one step: old and new meshes, fluid volume fluxes (discretely
/// solenoidal, matching the shell motion at the top) and the per-cell
/// traceless velocity gradient driving the drag.
pub struct StepInput<'a> {
    pub old: &'a ColumnMesh,
    pub new: &'a ColumnMesh,
    pub fluxes: &'a Fluxes,
    pub kappa: &'a [[[f64; 2]; 2]],
    pub dt: f64,
}

/// Per-step diagnostics. Fisher and drag entries are integrated over the
/// step and include the factor `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub t: f64,
    /// `k` times the relative entropy after the step.
    pub entropy: f64,
    pub fisher_x: f64,
    pub fisher_q: f64,
    pub drag: f64,
    pub min_psi: f64,
    pub mass: f64,
    pub xi_max: f64,
    /// Per-cell truncated gradient-form moments (without `k`), for the fluid.
    pub stress: Vec<[[f64; 2]; 2]>,
}

#[derive(Clone, Debug)]
pub struct FokkerPlanck {
    pub grid: QGrid,
    pub model: PolymerModel,
    /// Drag cutoff level; infinity disables the cutoff.
    pub ell: f64,
    /// Configuration diffusion `A_11 / (4 lambda)`.
    pub qdiff: f64,
}

impl FokkerPlanck {
    pub fn new(model: PolymerModel, nr: usize, ntheta: usize, ell: f64) -> Result<Self> {
        if !(ell >= 1.0) {
            return Err(Error::Config(format!("drag cutoff level must be >= 1, got {ell}")));
        }
        let grid = QGrid::new(&model.maxwellian, nr, ntheta)?;
        let qdiff = model.params.rouse[0][0] / (4.0 * model.params.deborah);
        Ok(FokkerPlanck { grid, model, ell, qdiff })
    }

    pub fn nq(&self) -> usize {
        self.grid.len()
    }

    /// `int int M F(psi_hat)`, without the factor `k`.
    pub fn relative_entropy(&self, state: &ConfigDensity, mesh: &ColumnMesh) -> f64 {
        let areas = mesh.areas();
        let mut s = 0.0;
        for (c, a) in areas.iter().enumerate() {
            let e: f64 = state.cell(c).iter().zip(self.grid.mass.iter()).map(|(&p, m)| m * entropy(p.max(0.0))).sum();
            s += a * e;
        }
        s
    }

    /// Instantaneous Fisher information rates `(x-part, q-part)`, including `k`.
    pub fn fisher_information(&self, state: &ConfigDensity, mesh: &ColumnMesh) -> (f64, f64) {
        let p = &self.model.params;
        let nq = self.nq();
        let tr = transmissibility(mesh);
        let mut fx = 0.0;
        tr.for_each(mesh.nx, mesh.nz, |a, b, t| {
            for k in 0..nq {
                let d = state.psi[a * nq + k].max(0.0).sqrt() - state.psi[b * nq + k].max(0.0).sqrt();
                fx += t * self.grid.mass[k] * d * d;
            }
        });
        let areas = mesh.areas();
        let fq: f64 = areas.iter().enumerate().map(|(c, a)| a * qstep::fisher(&self.grid, state.cell(c))).sum();
        (4.0 * p.k * p.eps * fx, p.k * p.a0 / p.deborah * fq)
    }

    pub fn marginal(&self, state: &ConfigDensity) -> Vec<f64> {
        (0..state.ncells).map(|c| self.grid.marginal(state.cell(c))).collect()
    }

    /// `sum_x A_x sum_k m_k psi`.
    pub fn total_mass(&self, state: &ConfigDensity, mesh: &ColumnMesh) -> f64 {
        self.marginal(state).iter().zip(mesh.areas().iter()).map(|(x, a)| x * a).sum()
    }

    /// `sum_x A_x sum_k m_k psi^2`.
    pub fn l2_norm_sq(&self, state: &ConfigDensity, mesh: &ColumnMesh) -> f64 {
        let areas = mesh.areas();
        (0..state.ncells).map(|c| areas[c] * state.cell(c).iter().zip(self.grid.mass.iter()).map(|(p, m)| m * p * p).sum::<f64>()).sum()
    }

    /// Spatial substep for every configuration cell.
    pub fn transport(&self, state: &ConfigDensity, inp: &StepInput) -> Result<(ConfigDensity, f64)> {
        let nq = self.nq();
        let n = state.ncells;
        let ts = TransportStep::new(inp.old, inp.new, inp.fluxes, self.model.params.eps, 1.0, inp.dt)?;
        let cols: Vec<Vec<f64>> = (0..nq).map(|k| (0..n).map(|c| state.psi[c * nq + k]).collect()).collect();
        let out = ts.apply_many(&cols);
        let mut psi = vec![0.0; n * nq];
        for (k, col) in out.iter().enumerate() {
            for c in 0..n {
                psi[c * nq + k] = col[c];
            }
        }
        let mut fx = 0.0;
        ts.trans_new.for_each(inp.new.nx, inp.new.nz, |a, b, t| {
            for k in 0..nq {
                let d = psi[a * nq + k].max(0.0).sqrt() - psi[b * nq + k].max(0.0).sqrt();
                fx += t * self.grid.mass[k] * d * d;
            }
        });
        let p = &self.model.params;
        let fisher = 4.0 * p.k * p.eps * fx * inp.dt;
        Ok((ConfigDensity { psi, ncells: n, nq, t: state.t }, fisher))
    }

    /// Advances the state by one split step.
    pub fn step(&self, state: &ConfigDensity, inp: &StepInput) -> Result<(ConfigDensity, StepReport)> {
        let nq = self.nq();
        let (mid, fisher_x) = self.transport(state, inp)?;
        let areas = inp.new.areas();
        let outs: Vec<Result<qstep::QStepOut>> =
            (0..state.ncells).into_par_iter().map(|c| qstep::step(&self.grid, &inp.kappa[c], mid.cell(c), self.ell, self.qdiff, inp.dt)).collect();
        let mut psi = vec![0.0; state.ncells * nq];
        let mut stress = Vec::with_capacity(state.ncells);
        let (mut drag, mut fq) = (0.0, 0.0);
        for (c, o) in outs.into_iter().enumerate() {
            let o = o?;
            psi[c * nq..(c + 1) * nq].copy_from_slice(&o.psi);
            drag += areas[c] * qstep::drag_coefficient(&inp.kappa[c], &o.stress);
            fq += areas[c] * o.fisher;
            stress.push(o.stress);
        }
        let p = &self.model.params;
        let new = ConfigDensity { psi, ncells: state.ncells, nq, t: state.t + inp.dt };
        if new.psi.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged(format!("non-finite configuration density at t = {}", new.t)));
        }
        let xi = self.marginal(&new);
        let report = StepReport {
            t: new.t,
            entropy: p.k * self.relative_entropy(&new, inp.new),
            fisher_x,
            // the scheme dissipates with A_11 >= A_0; the reported term uses A_0
            fisher_q: p.k * 4.0 * self.qdiff * inp.dt * fq * (p.a0 / p.rouse[0][0]),
            drag: p.k * inp.dt * drag,
            min_psi: new.min(),
            mass: xi.iter().zip(areas.iter()).map(|(x, a)| x * a).sum(),
            xi_max: xi.iter().fold(0.0f64, |m, x| m.max(x.abs())),
            stress,
        };
        Ok((new, report))
    }
}

/// Running record of the entropy inequality
/// `k E(t) + int Fisher <= k E(0) + int drag`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EntropyHistory {
    pub e0: f64,
    pub rows: Vec<EntropyRow>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyRow {
    pub t: f64,
    pub entropy: f64,
    pub fisher_x: f64,
    pub fisher_q: f64,
    pub drag: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InequalityReport {
    /// Largest relative excess of the left side over the right side (negative when it holds).
    pub worst: f64,
    pub worst_step: usize,
}

impl EntropyHistory {
    pub fn new(e0: f64) -> Self {
        EntropyHistory { e0, rows: Vec::new() }
    }

    pub fn push(&mut self, r: &StepReport) {
        let (fx, fq, dr) = self.rows.last().map(|l| (l.fisher_x, l.fisher_q, l.drag)).unwrap_or((0.0, 0.0, 0.0));
        self.rows.push(EntropyRow { t: r.t, entropy: r.entropy, fisher_x: fx + r.fisher_x, fisher_q: fq + r.fisher_q, drag: dr + r.drag });
    }

    pub fn check(&self, tol: f64) -> Result<InequalityReport> {
        let mut worst = f64::NEG_INFINITY;
        let mut worst_step = 0;
        for (n, r) in self.rows.iter().enumerate() {
            let lhs = r.entropy + r.fisher_x + r.fisher_q;
            let rhs = self.e0 + r.drag;
            let scale = self.e0.abs().max(lhs.abs()).max(rhs.abs()).max(1e-300);
            let rel = (lhs - rhs) / scale;
            if rel > worst {
                worst = rel;
                worst_step = n;
            }
            if rel > tol {
                return Err(Error::Inequality(format!("entropy inequality violated at step {n} (t = {}): relative excess {rel:.3e}", r.t)));
            }
        }
        Ok(InequalityReport { worst, worst_step })
    }
}

/// Prescribed incompressible flows for standalone runs.
pub mod flows {
    use super::*;

    /// Fluxes of the reference-coordinate shear `u = (rate * zeta, 0)` through
    /// the vertical faces: the flux is `rate (zeta_top^2 - zeta_bot^2) / 2`,
    /// the same in every column, so each cell balances exactly.
    pub fn shear(mesh: &ColumnMesh, rate: f64) -> Fluxes {
        let (nx, nz) = (mesh.nx, mesh.nz);
        let hz = mesh.hz();
        let mut f = Fluxes::zero(nx, nz);
        for j in 0..nz {
            let (a, b) = (j as f64 * hz, (j + 1) as f64 * hz);
            let v = 0.5 * rate * (b * b - a * a);
            for i in 0..nx {
                f.horiz[i + nx * j] = v;
            }
        }
        f
    }

    /// Fluxes that carry fluid along with the mesh: vertical fluxes equal the
    /// swept mesh areas, horizontal fluxes close every cell. Requires a
    /// mean-free shell increment.
    pub fn mesh_following(old: &ColumnMesh, new: &ColumnMesh, dt: f64) -> Fluxes {
        let (nx, nz) = (old.nx, old.nz);
        let w = mesh_fluxes(old, new, dt);
        let mut f = Fluxes { horiz: vec![0.0; nx * nz], vert: w.clone() };
        for j in 0..nz {
            let mut acc = 0.0;
            for i in 0..nx {
                acc -= w[i + nx * (j + 1)] - w[i + nx * j];
                f.horiz[i + nx * j] = acc;
            }
        }
        f
    }

    /// Constant traceless simple-shear gradient `d u_x / d z = rate`.
    pub fn shear_kappa(ncells: usize, rate: f64) -> Vec<[[f64; 2]; 2]> {
        vec![[[0.0, rate], [0.0, 0.0]]; ncells]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymer_model::{PhysicalParams, SpringLaw};

    fn solver() -> FokkerPlanck {
        let params = PhysicalParams::new(0.1, 0.01, 1.0, 0.1, 0.0, vec![vec![1.0]]).unwrap();
        let model = PolymerModel::new(SpringLaw::default(), None, params).unwrap();
        FokkerPlanck::new(model, 8, 12, f64::INFINITY).unwrap()
    }

    #[test]
    fn equilibrium_is_fixed() {
        let fp = solver();
        let mesh = ColumnMesh::flat(6, 4, 1.0, 1.0, 0.5);
        let st = ConfigDensity::equilibrium(mesh.ncells(), fp.nq());
        let fl = Fluxes::zero(6, 4);
        let kappa = vec![[[0.0; 2]; 2]; mesh.ncells()];
        let inp = StepInput { old: &mesh, new: &mesh, fluxes: &fl, kappa: &kappa, dt: 1e-2 };
        let (new, rep) = fp.step(&st, &inp).unwrap();
        for x in &new.psi {
            assert!((x - 1.0).abs() < 1e-12);
        }
        assert!(rep.drag.abs() < 1e-14 && rep.fisher_x < 1e-20 && rep.fisher_q < 1e-20);
    }

    #[test]
    fn constant_gradient_drag_matches_divergence_oracle() {
        // psi = 1: net drag outflow of cell k = int_k div(M kappa q) = int_k M (tr kappa - F . kappa q)
        let fp = solver();
        let kappa = [[0.3, 0.7], [-0.2, -0.3]];
        let mut out = vec![0.0; fp.nq()];
        for f in &fp.grid.faces {
            let a = qstep::drag_coefficient(&kappa, &f.moment);
            out[f.lo] += a;
            out[f.hi] -= a;
        }
        let tab = &fp.model.maxwellian;
        for k in [0usize, 5, 40, fp.nq() - 1] {
            let avg = fp.grid.cell_average(k, &|q| {
                let m = tab.spring(&q);
                let fq = fp.model.law.spring_force(&q).unwrap();
                let kq = [kappa[0][0] * q[0] + kappa[0][1] * q[1], kappa[1][0] * q[0] + kappa[1][1] * q[1]];
                m * ((kappa[0][0] + kappa[1][1]) - (fq[0] * kq[0] + fq[1] * kq[1]))
            });
            let ([a, b], [t0, t1]) = fp.grid.cells[k];
            let vol = 0.5 * (b * b - a * a) * (t1 - t0);
            assert!((avg * vol - out[k]).abs() < 1e-9, "cell {k}: {} vs {}", avg * vol, out[k]);
        }
    }

    #[test]
    fn q_diffusion_decays_in_weighted_l2() {
        let fp = solver();
        let mesh = ColumnMesh::flat(3, 2, 1.0, 1.0, 0.5);
        let mut st = ConfigDensity::from_fn(&mesh, &fp.grid, |_, q| 1.0 + 0.5 * q[0] + 0.2 * q[1] * q[1]);
        let fl = Fluxes::zero(3, 2);
        let kappa = vec![[[0.0; 2]; 2]; mesh.ncells()];
        let mut last = fp.l2_norm_sq(&st, &mesh);
        let m0 = fp.total_mass(&st, &mesh);
        for _ in 0..10 {
            let inp = StepInput { old: &mesh, new: &mesh, fluxes: &fl, kappa: &kappa, dt: 0.05 };
            st = fp.step(&st, &inp).unwrap().0;
            let now = fp.l2_norm_sq(&st, &mesh);
            assert!(now < last);
            last = now;
            assert!((fp.total_mass(&st, &mesh) - m0).abs() < 1e-12 * m0);
        }
    }
}
