//! Incompressible viscous fluid on the moving column mesh.

pub mod ops;
pub mod solver;

pub use ops::{Layout, StaggeredOps};
pub use solver::{assemble_coupling_force, project_divergence_free, split_stress_force, step_fluid, Boundary, FluidStep, FluidStepOut};

/// Velocity unknowns (fluxes plus shell velocity, see [`ops`]) and cell pressures.
#[derive(Clone, Debug, PartialEq)]
pub struct FluidState {
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl FluidState {
    pub fn rest(nx: usize, nz: usize) -> Self {
        FluidState { v: vec![0.0; 2 * nx * nz], p: vec![0.0; nx * nz], t: 0.0 }
    }

    /// Largest gap between the fluid velocity on the shell line and the shell
    /// velocity. The unknowns are shared, so this only fails if a caller
    /// edits one without the other.
    pub fn trace_error(&self, layout: &Layout, shell_velocity: &[f64]) -> f64 {
        layout.shell_velocity(&self.v).iter().zip(shell_velocity.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}
