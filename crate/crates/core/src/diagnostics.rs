//! Energy functional, dissipation accumulators and Reynolds-transport
//! bookkeeping shared by the solvers and the coupled ledger.

use crate::fluid::{FluidState, StaggeredOps};
use crate::fokker_planck::{ConfigDensity, FokkerPlanck};
use crate::geometry::{ColumnMesh, ShellState};
use crate::number_density::marginalize;
use crate::shell_dynamics::{shell_energy, KoiterModel, Regularizer};

/// Time integrals accumulated along a run. All of them are sums of
/// nonnegative per-step contributions except the work terms.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Accumulators {
    /// `int mu |grad u|^2`.
    pub viscous: f64,
    /// `int eps |grad Xi|^2`.
    pub xi_gradient: f64,
    pub fisher_x: f64,
    pub fisher_q: f64,
    /// Work of the body force and the shell load.
    pub forcing_work: f64,
    /// `int (1/2 |f|^2 + 1/2 |g|^2 + 1/2 |u|^2 + 1/2 |eta_t|^2)`, the bound
    /// on the forcing work by Young's inequality.
    pub young_bound: f64,
    /// Polymer drag power (enters the entropy balance).
    pub drag: f64,
    /// Work of the polymer stress on the fluid (enters the kinetic balance).
    pub stress_work: f64,
}

impl Accumulators {
    pub fn dissipation(&self) -> f64 {
        self.viscous + self.xi_gradient + self.fisher_x + self.fisher_q
    }

    pub fn add(&mut self, o: &Accumulators) {
        self.viscous += o.viscous;
        self.xi_gradient += o.xi_gradient;
        self.fisher_x += o.fisher_x;
        self.fisher_q += o.fisher_q;
        self.forcing_work += o.forcing_work;
        self.young_bound += o.young_bound;
        self.drag += o.drag;
        self.stress_work += o.stress_work;
    }
}

/// Every term of the energy functional at one instant, plus the running
/// dissipation and work integrals.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyBreakdown {
    pub t: f64,
    pub fluid_kinetic: f64,
    pub shell_kinetic: f64,
    pub elastic: f64,
    /// `rho L(eta)`.
    pub regularizer: f64,
    /// `||Xi||_inf^2`, the largest cell value.
    pub xi_sup_sq: f64,
    /// `1/2 ||Xi||_2^2`, which pays for the `eps |grad Xi|^2` dissipation.
    pub xi_l2_half: f64,
    /// `k int int M F(psi_hat)`.
    pub entropy: f64,
    pub acc: Accumulators,
}

impl EnergyBreakdown {
    pub fn energy(&self) -> f64 {
        self.fluid_kinetic + self.shell_kinetic + self.elastic + self.regularizer + self.xi_sup_sq + self.xi_l2_half + self.entropy
    }

    pub fn is_finite(&self) -> bool {
        let a = &self.acc;
        [
            self.fluid_kinetic,
            self.shell_kinetic,
            self.elastic,
            self.regularizer,
            self.xi_sup_sq,
            self.xi_l2_half,
            self.entropy,
            a.viscous,
            a.xi_gradient,
            a.fisher_x,
            a.fisher_q,
            a.forcing_work,
            a.young_bound,
            a.drag,
            a.stress_work,
        ]
        .iter()
        .all(|x| x.is_finite())
    }

    pub const CSV_COLUMNS: [&'static str; 18] = [
        "t",
        "fluid_kinetic",
        "shell_kinetic",
        "elastic",
        "regularizer",
        "xi_sup_sq",
        "xi_l2_half",
        "entropy",
        "energy",
        "viscous",
        "xi_gradient",
        "fisher_x",
        "fisher_q",
        "dissipation",
        "forcing_work",
        "young_bound",
        "drag",
        "stress_work",
    ];

    pub fn csv_values(&self) -> [f64; 18] {
        let a = &self.acc;
        [
            self.t,
            self.fluid_kinetic,
            self.shell_kinetic,
            self.elastic,
            self.regularizer,
            self.xi_sup_sq,
            self.xi_l2_half,
            self.entropy,
            self.energy(),
            a.viscous,
            a.xi_gradient,
            a.fisher_x,
            a.fisher_q,
            a.dissipation(),
            a.forcing_work,
            a.young_bound,
            a.drag,
            a.stress_work,
        ]
    }
}

/// The states one breakdown is evaluated from.
#[derive(Clone, Copy)]
pub struct BreakdownInput<'a> {
    pub t: f64,
    /// Operators on the fluid mesh.
    pub fluid_ops: &'a StaggeredOps,
    pub fluid: &'a FluidState,
    pub shell: &'a ShellState,
    pub model: &'a KoiterModel,
    pub reg: &'a Regularizer,
    pub rho: f64,
    pub fp: &'a FokkerPlanck,
    pub psi: &'a ConfigDensity,
    /// Mesh the configuration density lives on.
    pub fp_mesh: &'a ColumnMesh,
    pub acc: Accumulators,
}

pub fn assemble_breakdown(inp: &BreakdownInput) -> EnergyBreakdown {
    let se = shell_energy(inp.model, inp.reg, inp.rho, inp.shell);
    let xi = marginalize(inp.psi, inp.fp);
    let sup = xi.sup();
    EnergyBreakdown {
        t: inp.t,
        fluid_kinetic: inp.fluid_ops.kinetic_energy(&inp.fluid.v),
        shell_kinetic: se.kinetic,
        elastic: se.elastic,
        regularizer: se.regularizer,
        xi_sup_sq: sup * sup,
        xi_l2_half: 0.5 * xi.l2_sq(inp.fp_mesh),
        entropy: inp.fp.model.params.k * inp.fp.relative_entropy(inp.psi, inp.fp_mesh),
        acc: inp.acc,
    }
}

/// Per-step residual of the transport identity
/// `d/dt int v = int dv/dt + int_top eta_t v`, for a field given in closed
/// form on a sequence of column meshes. Volume integrals use the cell-centre
/// rule, the time derivative of the field a centred difference, and the
/// boundary term the midpoint shell velocity and position.
pub fn reynolds_check(field: &dyn Fn(f64, [f64; 2]) -> f64, meshes: &[ColumnMesh], times: &[f64]) -> Vec<f64> {
    assert_eq!(meshes.len(), times.len());
    let volume = |m: &ColumnMesh, t: f64| -> f64 {
        let mut s = 0.0;
        for j in 0..m.nz {
            for i in 0..m.nx {
                s += m.area(i, j) * field(t, m.center(i, j));
            }
        }
        s
    };
    meshes
        .windows(2)
        .zip(times.windows(2))
        .map(|(m, t)| {
            let dt = t[1] - t[0];
            let tm = 0.5 * (t[0] + t[1]);
            let lhs = (volume(&m[1], t[1]) - volume(&m[0], t[0])) / dt;
            let eta: Vec<f64> = m[0].eta.iter().zip(m[1].eta.iter()).map(|(a, b)| 0.5 * (a + b)).collect();
            let mid = ColumnMesh::new(m[0].nx, m[0].nz, m[0].period, m[0].height, m[0].tube, m[0].profile, &eta);
            let dfdt = |p: [f64; 2]| (field(t[1], p) - field(t[0], p)) / dt;
            let mut interior = 0.0;
            for j in 0..mid.nz {
                for i in 0..mid.nx {
                    interior += mid.area(i, j) * dfdt(mid.center(i, j));
                }
            }
            let hx = mid.hx();
            let boundary: f64 = (0..mid.nx)
                .map(|i| {
                    let eta_t = (m[1].eta[i] - m[0].eta[i]) / dt;
                    let x = i as f64 * hx;
                    hx * eta_t * field(tm, [x, mid.zf(i, mid.nz)])
                })
                .sum();
            lhs - interior - boundary
        })
        .collect()
}
