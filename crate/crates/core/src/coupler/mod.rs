//! The regularized fluid-shell-polymer system: mollifiers, the windowed
//! damped fixed-point driver, the energy ledger and the refinement sweep.

pub mod fixed_point;
pub mod ledger;
pub mod mollifier;
pub mod sweep;

pub use fixed_point::{fixed_point_solve, FieldSample, FixedPointConfig, IterationRecord, RunOptions, StepRecord, Trajectory};
pub use ledger::{energy_ledger, LedgerOptions, LedgerReport};
pub use mollifier::{bump_symbol, regularize_velocity, RegularizationKernel, SpatialMollifier};
pub use sweep::{periodic_breathing_data, rho_refinement_study, SweepLevel, SweepReport};

use crate::error::{Error, Result};
use crate::fluid::{project_divergence_free, FluidState, Layout, StaggeredOps};
use crate::fokker_planck::{ConfigDensity, FokkerPlanck};
use crate::geometry::{check_admissible, ColumnMesh, ShellState};
use crate::shell_dynamics::{regularizer_gradient, KoiterModel, Regularizer};
use std::f64::consts::{PI, TAU};

/// Normal load on the shell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShellLoad {
    None,
    /// `A cos(2 pi m x / P) sin(omega t)`.
    Breathing {
        amplitude: f64,
        mode: usize,
        omega: f64,
    },
    /// `A cos(2 pi m x / P)`, switched on at `t = 0`.
    Steady {
        amplitude: f64,
        mode: usize,
    },
}

/// Body force on the fluid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BodyLoad {
    None,
    /// Horizontal channel forcing `(A sin(pi z / H), 0)`.
    Channel {
        amplitude: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Forcing {
    pub shell: ShellLoad,
    pub body: BodyLoad,
}

impl Forcing {
    pub fn none() -> Self {
        Forcing { shell: ShellLoad::None, body: BodyLoad::None }
    }

    pub fn is_zero(&self) -> bool {
        let shell_zero = match self.shell {
            ShellLoad::None => true,
            ShellLoad::Breathing { amplitude, .. } | ShellLoad::Steady { amplitude, .. } => amplitude == 0.0,
        };
        let body_zero = match self.body {
            BodyLoad::None => true,
            BodyLoad::Channel { amplitude } => amplitude == 0.0,
        };
        shell_zero && body_zero
    }

    pub fn shell_load(&self, nx: usize, t: f64) -> Vec<f64> {
        let wave = |a: f64, m: usize, s: f64| -> Vec<f64> { (0..nx).map(|i| a * s * (TAU * m as f64 * i as f64 / nx as f64).cos()).collect() };
        match self.shell {
            ShellLoad::None => vec![0.0; nx],
            ShellLoad::Breathing { amplitude, mode, omega } => wave(amplitude, mode, (omega * t).sin()),
            ShellLoad::Steady { amplitude, mode } => wave(amplitude, mode, 1.0),
        }
    }

    pub fn body_force(&self, height: f64, p: [f64; 2]) -> [f64; 2] {
        match self.body {
            BodyLoad::None => [0.0, 0.0],
            BodyLoad::Channel { amplitude } => [amplitude * (PI * p[1] / height).sin(), 0.0],
        }
    }

    pub fn has_body(&self) -> bool {
        !matches!(self.body, BodyLoad::None)
    }
}

/// Everything fixed during a coupled run.
#[derive(Clone, Debug)]
pub struct CoupledProblem {
    pub fp: FokkerPlanck,
    pub model: KoiterModel,
    pub reg: Regularizer,
    pub kernel: RegularizationKernel,
    /// Fluid layers.
    pub nz: usize,
    pub height: f64,
    pub dt: f64,
    pub forcing: Forcing,
    pub cfg: FixedPointConfig,
    pub layout: Layout,
    pub spatial: SpatialMollifier,
    /// `(dt / 4) rho L'` as a dense matrix, the implicit part of the
    /// regularizer in the shell rows.
    pub(crate) implicit: Vec<Vec<f64>>,
    /// Operators on the undeformed mesh, used only for the iteration norm.
    pub(crate) norm_ops: StaggeredOps,
}

impl CoupledProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fp: FokkerPlanck,
        model: KoiterModel,
        kernel: RegularizationKernel,
        nz: usize,
        height: f64,
        dt: f64,
        forcing: Forcing,
        cfg: FixedPointConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let shell = &model.shell;
        if shell.n2 != 1 || !shell.surface.is_flat() {
            return Err(Error::Config("coupled runs need a flat shell with one node across the strip".into()));
        }
        if model.weights.iter().any(|w| (w - model.weights[0]).abs() > 1e-14) {
            return Err(Error::Config("coupled runs need uniform shell quadrature weights".into()));
        }
        if !(dt > 0.0) || !(height > 0.0) || nz < 2 {
            return Err(Error::Config(format!("need dt > 0, height > 0, nz >= 2 (dt = {dt}, height = {height}, nz = {nz})")));
        }
        if !(shell.tube < height) {
            return Err(Error::Config("tube half-width must be below the channel height".into()));
        }
        let nx = shell.n1;
        let reg = Regularizer::new([nx, 1], shell.period);
        let layout = Layout { nx, nz };
        let spatial = SpatialMollifier::new(layout, shell.period[0], height, &kernel);
        let mut implicit = vec![vec![0.0; nx]; nx];
        let mut e = vec![0.0; nx];
        for j in 0..nx {
            e[j] = 1.0;
            for (i, g) in regularizer_gradient(&model, &reg, &e, kernel.rho).into_iter().enumerate() {
                implicit[i][j] = 0.25 * dt * g;
            }
            e[j] = 0.0;
        }
        let flat = ColumnMesh::new(nx, nz, shell.period[0], height, shell.tube, shell.profile, &vec![0.0; nx]);
        let norm_ops = StaggeredOps::new(&flat);
        Ok(CoupledProblem { fp, model, reg, kernel, nz, height, dt, forcing, cfg, layout, spatial, implicit, norm_ops })
    }

    pub fn nx(&self) -> usize {
        self.layout.nx
    }

    pub fn period(&self) -> f64 {
        self.model.shell.period[0]
    }

    pub fn mu(&self) -> f64 {
        self.fp.model.params.viscosity
    }

    /// Column mesh under the shell displacement `eta`, checked for admissibility.
    pub fn mesh(&self, eta: &[f64]) -> Result<ColumnMesh> {
        if let Some(reason) = check_admissible(&self.model.shell, eta).reason {
            return Err(Error::Admissibility(reason));
        }
        let s = &self.model.shell;
        Ok(ColumnMesh::new(self.nx(), self.nz, s.period[0], self.height, s.tube, s.profile, eta))
    }

    /// The initial mesh the polymers live on: the shell displacement
    /// mollified in space.
    pub fn initial_mesh_eta(&self, eta0: &[f64]) -> Vec<f64> {
        let fft = crate::spectral::Fft2::new(self.nx(), 1);
        self.kernel.mollify_periodic(&fft, eta0, self.period(), self.kernel.shell)
    }

    /// Builds the initial state from shell position and velocity, an optional
    /// fluid flux vector and the configuration density. Without a fluid
    /// vector the fluid starts from the solenoidal field closest to rest
    /// that matches the shell velocity.
    pub fn initial_state(&self, eta0: &[f64], eta1: &[f64], v0: Option<&[f64]>, psi0: ConfigDensity) -> Result<CoupledState> {
        let nx = self.nx();
        if eta0.len() != nx || eta1.len() != nx {
            return Err(Error::Config(format!("initial shell data must have {nx} nodes")));
        }
        let mesh = self.mesh(eta0)?;
        let ops = StaggeredOps::new(&mesh);
        let v = match v0 {
            Some(v) => {
                if v.len() != self.layout.len() {
                    return Err(Error::Config("initial fluid vector has the wrong length".into()));
                }
                v.to_vec()
            }
            None => {
                let mean = eta1.iter().sum::<f64>() / nx as f64;
                if mean.abs() > 1e-12 {
                    return Err(Error::Config(format!("initial shell velocity changes the volume (mean {mean:.3e})")));
                }
                let mut v = vec![0.0; self.layout.len()];
                for (i, s) in eta1.iter().enumerate() {
                    v[self.layout.top(i)] = *s;
                }
                project_divergence_free(&ops, &v, true)?.0
            }
        };
        let fluid = FluidState { v, p: vec![0.0; self.layout.ncells()], t: 0.0 };
        let trace = fluid.trace_error(&self.layout, eta1);
        if trace > 1e-12 {
            return Err(Error::Config(format!("initial fluid trace differs from the shell velocity by {trace:.3e}")));
        }
        let div = ops.max_divergence(&fluid.v);
        if div > 1e-8 {
            return Err(Error::Config(format!("initial fluid velocity is not solenoidal (divergence {div:.3e})")));
        }
        if psi0.ncells != self.layout.ncells() || psi0.nq != self.fp.nq() {
            return Err(Error::Config("initial configuration density has the wrong shape".into()));
        }
        Ok(CoupledState {
            fluid,
            shell: ShellState { eta: eta0.to_vec(), eta_t: eta1.to_vec(), t: 0.0 },
            mesh_eta: self.initial_mesh_eta(eta0),
            psi: psi0,
            t: 0.0,
        })
    }

    /// The rest state: no flow, flat shell, equilibrium polymers.
    pub fn rest_state(&self) -> Result<CoupledState> {
        let nx = self.nx();
        let psi = ConfigDensity::equilibrium(self.layout.ncells(), self.fp.nq());
        self.initial_state(&vec![0.0; nx], &vec![0.0; nx], None, psi)
    }
}

/// All evolving fields at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledState {
    pub fluid: FluidState,
    pub shell: ShellState,
    /// Displacement driving the mesh the polymers live on (the regularized shell).
    pub mesh_eta: Vec<f64>,
    pub psi: ConfigDensity,
    pub t: f64,
}
