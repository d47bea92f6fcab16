//! Shell mechanics: Koiter energy, regularizer and time stepping.

pub mod koiter;
pub mod regularizer;
pub mod stepper;

pub use koiter::{FdOps, KoiterModel};
pub use regularizer::Regularizer;
pub use stepper::{regularizer_gradient, shell_energy, solve_static, step_shell, ShellEnergy, ShellForce, ShellParams, StepInfo};
