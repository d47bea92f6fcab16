//! The global energy inequality evaluated along a coupled trajectory:
//! `E(t) + D(t) <= E(0) + W(t)` with `E` the energy functional, `D` the
//! accumulated dissipation and `W` the work of the external forces.

use super::fixed_point::Trajectory;
use crate::diagnostics::EnergyBreakdown;
use crate::error::{Error, Result};
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LedgerOptions {
    /// Allowed excess in the inequality, relative to `E(0) + |W|`.
    pub slack: f64,
    /// Allowed per-step growth of `E` when unforced, relative to `E(0)`.
    pub monotone_tol: f64,
    /// Also require `E(t)` to be non-increasing.
    pub require_monotone: bool,
}

impl Default for LedgerOptions {
    fn default() -> Self {
        LedgerOptions { slack: 1e-3, monotone_tol: 1e-9, require_monotone: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LedgerReport {
    pub initial: EnergyBreakdown,
    pub last: EnergyBreakdown,
    /// Largest `(E + D - E(0) - W) / (E(0) + |W|)` over the steps.
    pub worst_excess: f64,
    pub worst_step: usize,
    /// Same with the forcing work replaced by its Young bound.
    pub worst_young_excess: f64,
    /// Largest per-step increase of `E`, relative to `E(0)`.
    pub max_increase: f64,
    /// `max |drag + stress work|` relative to `max(|drag|, tiny)`: the polymer
    /// exchange terms that cancel between entropy and kinetic energy.
    pub exchange_mismatch: f64,
    pub steps: usize,
}

impl LedgerReport {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let e0 = self.initial.energy();
        let b = &self.last;
        let _ = writeln!(s, "steps                 {}", self.steps);
        let _ = writeln!(s, "E(0)                  {e0:.12e}");
        let _ = writeln!(s, "E(t)                  {:.12e}", b.energy());
        let _ = writeln!(s, "  fluid kinetic       {:.12e}", b.fluid_kinetic);
        let _ = writeln!(s, "  shell kinetic       {:.12e}", b.shell_kinetic);
        let _ = writeln!(s, "  elastic             {:.12e}", b.elastic);
        let _ = writeln!(s, "  regularizer         {:.12e}", b.regularizer);
        let _ = writeln!(s, "  sup Xi squared      {:.12e}", b.xi_sup_sq);
        let _ = writeln!(s, "  half L2 Xi squared  {:.12e}", b.xi_l2_half);
        let _ = writeln!(s, "  relative entropy    {:.12e}", b.entropy);
        let _ = writeln!(s, "D(t)                  {:.12e}", b.acc.dissipation());
        let _ = writeln!(s, "  viscous             {:.12e}", b.acc.viscous);
        let _ = writeln!(s, "  Xi gradient         {:.12e}", b.acc.xi_gradient);
        let _ = writeln!(s, "  Fisher x            {:.12e}", b.acc.fisher_x);
        let _ = writeln!(s, "  Fisher q            {:.12e}", b.acc.fisher_q);
        let _ = writeln!(s, "W(t)                  {:.12e}", b.acc.forcing_work);
        let _ = writeln!(s, "Young bound           {:.12e}", b.acc.young_bound);
        let _ = writeln!(s, "drag                  {:.12e}", b.acc.drag);
        let _ = writeln!(s, "stress work           {:.12e}", b.acc.stress_work);
        let _ = writeln!(s, "worst excess          {:.6e} (step {})", self.worst_excess, self.worst_step);
        let _ = writeln!(s, "worst Young excess    {:.6e}", self.worst_young_excess);
        let _ = writeln!(s, "max step increase     {:.6e}", self.max_increase);
        let _ = writeln!(s, "exchange mismatch     {:.6e}", self.exchange_mismatch);
        s
    }
}

/// Evaluates the inequality at every recorded step; a violation beyond the
/// slack is reported as [`Error::Inequality`] with the term breakdown.
pub fn energy_ledger(traj: &Trajectory, opts: &LedgerOptions) -> Result<LedgerReport> {
    let initial = traj.initial;
    let e0 = initial.energy();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_young_excess = f64::NEG_INFINITY;
    let mut worst_step = 0;
    let mut max_increase = f64::NEG_INFINITY;
    let mut prev = e0;
    let mut drag_scale = 0.0f64;
    let mut mismatch = 0.0f64;
    for (n, r) in traj.records.iter().enumerate() {
        let b = &r.breakdown;
        if !b.is_finite() {
            return Err(Error::Inequality(format!("non-finite energy term at step {n}")));
        }
        let a = &b.acc;
        let lhs = b.energy() + a.dissipation();
        let excess = (lhs - e0 - a.forcing_work) / (e0 + a.forcing_work.abs());
        if excess > worst_excess {
            worst_excess = excess;
            worst_step = n;
        }
        worst_young_excess = worst_young_excess.max((lhs - e0 - a.young_bound) / (e0 + a.young_bound));
        max_increase = max_increase.max((b.energy() - prev) / e0);
        prev = b.energy();
        drag_scale = drag_scale.max(a.drag.abs());
        mismatch = mismatch.max((a.drag + a.stress_work).abs());
    }
    if traj.records.is_empty() {
        worst_excess = 0.0;
        worst_young_excess = 0.0;
        max_increase = 0.0;
    }
    let report = LedgerReport {
        initial,
        last: traj.records.last().map_or(initial, |r| r.breakdown),
        worst_excess,
        worst_step,
        worst_young_excess,
        max_increase,
        exchange_mismatch: mismatch / drag_scale.max(1e-300),
        steps: traj.records.len(),
    };
    if report.worst_excess > opts.slack {
        return Err(Error::Inequality(format!(
            "energy inequality exceeded by {:.3e} (relative) at step {}\n{}",
            report.worst_excess,
            report.worst_step,
            report.summary()
        )));
    }
    if opts.require_monotone && report.max_increase > opts.monotone_tol {
        return Err(Error::Inequality(format!("energy increased by {:.3e} (relative) in one step\n{}", report.max_increase, report.summary())));
    }
    Ok(report)
}
