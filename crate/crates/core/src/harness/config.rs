//! Run configuration: a sectioned `key = value` TOML file. Every section and
//! key is optional and falls back to the documented default; unknown keys
//! and out-of-range values are rejected with the offending key named.

use crate::coupler::{BodyLoad, CoupledProblem, FixedPointConfig, Forcing, LedgerOptions, RegularizationKernel, ShellLoad};
use crate::error::{Error, Result};
use crate::fokker_planck::FokkerPlanck;
use crate::geometry::{Profile, ReferenceShell, Surface};
use crate::polymer_model::{PhysicalParams, PolymerModel, SpringKind, SpringLaw};
use crate::shell_dynamics::{KoiterModel, ShellParams};
use serde::Deserialize;
use std::f64::consts::TAU;
use std::path::Path;

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub geometry: GeometrySection,
    pub polymer: PolymerSection,
    pub fluid: FluidSection,
    pub shell: ShellSection,
    pub solver: SolverSection,
    pub forcing: ForcingSection,
    pub initial: InitialSection,
    pub fpk: FpkSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub name: String,
    pub seed: u64,
    pub t_end: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { name: "run".into(), seed: 0, t_end: 0.1 }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    /// Columns of the fluid grid, equal to the shell nodes.
    pub nx: usize,
    pub nz: usize,
    pub period: f64,
    pub height: f64,
    /// Tubular half-width `L`.
    pub tube: f64,
    /// Coercivity threshold `L~ >= L`.
    pub coercivity: f64,
    pub gamma_min: f64,
    pub profile_lo: f64,
    pub profile_hi: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        let p = Profile::default();
        GeometrySection { nx: 16, nz: 8, period: TAU, height: 1.0, tube: 0.5, coercivity: 0.5, gamma_min: 0.1, profile_lo: p.lo, profile_hi: p.hi }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum LawName {
    Fene,
    Hookean,
    TannerLocked,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PolymerSection {
    pub law: LawName,
    pub b: f64,
    pub springs: usize,
    pub dim: usize,
    pub eps: f64,
    pub deborah: f64,
    pub k: f64,
    pub eth: f64,
    pub rouse: Vec<Vec<f64>>,
}

impl Default for PolymerSection {
    fn default() -> Self {
        PolymerSection { law: LawName::Fene, b: 10.0, springs: 1, dim: 2, eps: 0.01, deborah: 1.0, k: 0.1, eth: 0.0, rouse: vec![vec![1.0]] }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FluidSection {
    pub viscosity: f64,
    pub dt: f64,
}

impl Default for FluidSection {
    fn default() -> Self {
        FluidSection { viscosity: 0.1, dt: 0.005 }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ShellSection {
    pub lame_lambda: f64,
    pub lame_mu: f64,
    pub eps0: f64,
    /// Regularization parameter `rho`.
    pub rho: f64,
    /// Mollifier half-widths; negative means derived from `rho`
    /// (`rho` in time, `sqrt(rho)` in space).
    pub temporal_width: f64,
    pub spatial_width: f64,
    pub shell_width: f64,
    /// Velocity damping of shell-only runs.
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ShellSection {
    fn default() -> Self {
        let sp = ShellParams::default();
        ShellSection {
            lame_lambda: 1.0,
            lame_mu: 1.0,
            eps0: 0.1,
            rho: 1e-2,
            temporal_width: -1.0,
            spatial_width: -1.0,
            shell_width: -1.0,
            damping: sp.damping,
            tol: sp.tol,
            max_iter: sp.max_iter,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Drag cutoff level `l`; `inf` disables it.
    pub ell: f64,
    /// Maxwellian floor index `m`; `inf` uses the exact Maxwellian.
    pub maxwellian_m: f64,
    pub nr: usize,
    pub ntheta: usize,
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub stagnation: usize,
    pub window: f64,
    pub guard_margin: f64,
    pub ledger_slack: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let fp = FixedPointConfig::default();
        SolverSection {
            ell: f64::INFINITY,
            maxwellian_m: f64::INFINITY,
            nr: 6,
            ntheta: 12,
            damping: fp.damping,
            tol: fp.tol,
            max_iter: fp.max_iter,
            stagnation: fp.stagnation,
            window: fp.window,
            guard_margin: fp.guard_margin,
            ledger_slack: LedgerOptions::default().slack,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ShellLoadName {
    None,
    Breathing,
    Steady,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum BodyLoadName {
    None,
    Channel,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingSection {
    pub shell: ShellLoadName,
    pub shell_amplitude: f64,
    pub shell_mode: usize,
    pub shell_omega: f64,
    pub body: BodyLoadName,
    pub body_amplitude: f64,
}

impl Default for ForcingSection {
    fn default() -> Self {
        ForcingSection {
            shell: ShellLoadName::None,
            shell_amplitude: 0.0,
            shell_mode: 1,
            shell_omega: 1.0,
            body: BodyLoadName::None,
            body_amplitude: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    /// Flat shell at rest, fluid at rest.
    Rest,
    /// `eta0 = A cos(2 pi m x / P)`, `eta1 = V cos(2 pi m x / P)`.
    ShellMode,
    /// The time-periodic orbit of the linearized forced problem.
    PeriodicOrbit,
    /// Seeded random nonnegative configuration density (Fokker-Planck runs).
    Random,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    pub amplitude: f64,
    pub mode: usize,
    pub velocity: f64,
    /// `psi0 = 1 + a cos(2 pi x / P) sin(pi z / H)`.
    pub psi_perturbation: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection { kind: InitialKind::Rest, amplitude: 0.0, mode: 1, velocity: 0.0, psi_perturbation: 0.0 }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FpkSection {
    /// Prescribed simple shear `du_x/dz`.
    pub shear_rate: f64,
    /// Prescribed boundary motion `A sin(2 pi x / P) sin(omega t)`.
    pub mesh_amplitude: f64,
    pub mesh_omega: f64,
    pub entropy_slack: f64,
}

impl Default for FpkSection {
    fn default() -> Self {
        FpkSection { shear_rate: 1.0, mesh_amplitude: 0.0, mesh_omega: 3.0, entropy_slack: 1e-3 }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub rhos: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { rhos: vec![1e-1, 1e-2, 1e-3] }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; relative paths are resolved against the output root.
    pub dir: String,
    /// Diagnostics row cadence in steps.
    pub every: usize,
    /// Field snapshot cadence in steps (0: initial and final only).
    pub fields_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into(), every: 1, fields_every: 0 }
    }
}

struct Checker {
    errors: Vec<String>,
}

impl Checker {
    fn check(&mut self, key: &str, ok: bool, what: &str, got: impl std::fmt::Display) {
        if !ok {
            self.errors.push(format!("{key}: {what} (got {got})"));
        }
    }

    fn positive(&mut self, key: &str, v: f64) {
        self.check(key, v > 0.0 && v.is_finite(), "must be positive and finite", v);
    }

    fn nonneg(&mut self, key: &str, v: f64) {
        self.check(key, v >= 0.0 && v.is_finite(), "must be nonnegative and finite", v);
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim().replace('\n', " ")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Checks every numeric field against its documented range.
    pub fn validate(&self) -> Result<()> {
        let mut c = Checker { errors: Vec::new() };
        c.positive("run.t_end", self.run.t_end);
        c.check("run.name", !self.run.name.is_empty() && !self.run.name.contains(['/', '\\']), "must be a nonempty file name", &self.run.name);

        let g = &self.geometry;
        c.check("geometry.nx", (4..=512).contains(&g.nx), "must lie in [4, 512]", g.nx);
        c.check("geometry.nz", (2..=256).contains(&g.nz), "must lie in [2, 256]", g.nz);
        c.positive("geometry.period", g.period);
        c.positive("geometry.height", g.height);
        c.positive("geometry.tube", g.tube);
        c.check("geometry.tube", g.tube < g.height, "must be below geometry.height", g.tube);
        c.check("geometry.coercivity", g.coercivity >= g.tube && g.coercivity.is_finite(), "must be finite and >= geometry.tube", g.coercivity);
        c.positive("geometry.gamma_min", g.gamma_min);
        c.check("geometry.profile_lo", g.profile_lo > -1.0 && g.profile_lo < g.profile_hi, "must satisfy -1 < profile_lo < profile_hi", g.profile_lo);
        c.check("geometry.profile_hi", g.profile_hi < 0.0, "must be negative", g.profile_hi);

        let p = &self.polymer;
        c.check("polymer.dim", p.dim == 2, "only planar springs are supported", p.dim);
        c.check("polymer.springs", p.springs == 1, "only dumbbells (one spring) are supported", p.springs);
        if p.law != LawName::Hookean {
            c.positive("polymer.b", p.b);
        }
        c.positive("polymer.eps", p.eps);
        c.positive("polymer.deborah", p.deborah);
        c.positive("polymer.k", p.k);
        c.nonneg("polymer.eth", p.eth);
        let square = !p.rouse.is_empty() && p.rouse.iter().all(|r| r.len() == p.rouse.len());
        c.check("polymer.rouse", square && p.rouse.len() == p.springs, "must be a square matrix of size polymer.springs", p.rouse.len());

        c.positive("fluid.viscosity", self.fluid.viscosity);
        c.positive("fluid.dt", self.fluid.dt);
        c.check("fluid.dt", self.fluid.dt <= self.run.t_end.max(0.0), "must not exceed run.t_end", self.fluid.dt);

        let s = &self.shell;
        c.nonneg("shell.lame_lambda", s.lame_lambda);
        c.positive("shell.lame_mu", s.lame_mu);
        c.positive("shell.eps0", s.eps0);
        c.positive("shell.rho", s.rho);
        for (key, w) in [("shell.temporal_width", s.temporal_width), ("shell.spatial_width", s.spatial_width), ("shell.shell_width", s.shell_width)] {
            c.check(key, w.is_finite(), "must be finite (negative: derived from shell.rho)", w);
        }
        c.nonneg("shell.damping", s.damping);
        c.positive("shell.tol", s.tol);
        c.check("shell.max_iter", s.max_iter >= 1, "must be at least 1", s.max_iter);

        let v = &self.solver;
        c.check("solver.ell", v.ell >= 1.0, "must be >= 1 (inf disables the cutoff)", v.ell);
        c.check("solver.maxwellian_m", v.maxwellian_m >= 1.0, "must be >= 1 (inf uses the exact Maxwellian)", v.maxwellian_m);
        c.check("solver.nr", (2..=64).contains(&v.nr), "must lie in [2, 64]", v.nr);
        c.check("solver.ntheta", (4..=128).contains(&v.ntheta), "must lie in [4, 128]", v.ntheta);
        c.check("solver.damping", v.damping > 0.0 && v.damping <= 1.0, "must lie in (0, 1]", v.damping);
        c.check("solver.tol", v.tol > 0.0 && v.tol < 1.0, "must lie in (0, 1)", v.tol);
        c.check("solver.max_iter", v.max_iter >= 1, "must be at least 1", v.max_iter);
        c.check("solver.stagnation", v.stagnation >= 1, "must be at least 1", v.stagnation);
        c.positive("solver.window", v.window);
        c.check("solver.guard_margin", (0.0..1.0).contains(&v.guard_margin), "must lie in [0, 1)", v.guard_margin);
        c.positive("solver.ledger_slack", v.ledger_slack);

        let f = &self.forcing;
        c.check("forcing.shell_amplitude", f.shell_amplitude.is_finite(), "must be finite", f.shell_amplitude);
        c.check("forcing.shell_mode", f.shell_mode >= 1 && f.shell_mode < g.nx / 2, "must lie in [1, geometry.nx / 2)", f.shell_mode);
        c.nonneg("forcing.shell_omega", f.shell_omega);
        if f.shell == ShellLoadName::Breathing {
            c.positive("forcing.shell_omega", f.shell_omega);
        }
        c.check("forcing.body_amplitude", f.body_amplitude.is_finite(), "must be finite", f.body_amplitude);

        let i = &self.initial;
        c.check(
            "initial.amplitude",
            i.amplitude.is_finite() && i.amplitude.abs() < g.tube,
            "must be finite with |value| < geometry.tube",
            i.amplitude,
        );
        c.check("initial.mode", i.mode >= 1 && i.mode < g.nx / 2, "must lie in [1, geometry.nx / 2)", i.mode);
        c.check("initial.velocity", i.velocity.is_finite(), "must be finite", i.velocity);
        c.check("initial.psi_perturbation", (0.0..1.0).contains(&i.psi_perturbation), "must lie in [0, 1)", i.psi_perturbation);
        if i.kind == InitialKind::PeriodicOrbit {
            c.check("initial.kind", f.shell == ShellLoadName::Breathing, "periodic-orbit needs forcing.shell = \"breathing\"", "periodic-orbit");
        }

        c.check("fpk.shear_rate", self.fpk.shear_rate.is_finite(), "must be finite", self.fpk.shear_rate);
        c.check(
            "fpk.mesh_amplitude",
            self.fpk.mesh_amplitude.is_finite() && self.fpk.mesh_amplitude.abs() < g.tube,
            "must be finite with |value| < geometry.tube",
            self.fpk.mesh_amplitude,
        );
        c.nonneg("fpk.mesh_omega", self.fpk.mesh_omega);
        c.positive("fpk.entropy_slack", self.fpk.entropy_slack);

        c.check("sweep.rhos", self.sweep.rhos.len() >= 2, "needs at least two levels", self.sweep.rhos.len());
        c.check("sweep.rhos", self.sweep.rhos.iter().all(|r| *r > 0.0 && r.is_finite()), "must be positive", format!("{:?}", self.sweep.rhos));

        c.check("output.dir", !self.output.dir.is_empty(), "must be nonempty", &self.output.dir);
        c.check("output.every", self.output.every >= 1, "must be at least 1", self.output.every);

        if c.errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(c.errors.join("; ")))
        }
    }

    pub fn steps(&self) -> usize {
        (self.run.t_end / self.fluid.dt).round() as usize
    }

    pub fn profile(&self) -> Profile {
        Profile { lo: self.geometry.profile_lo, hi: self.geometry.profile_hi }
    }

    pub fn fokker_planck(&self) -> Result<FokkerPlanck> {
        let p = &self.polymer;
        let kind = match p.law {
            LawName::Fene => SpringKind::Fene,
            LawName::Hookean => SpringKind::Hookean,
            LawName::TannerLocked => SpringKind::TannerLocked,
        };
        let law = SpringLaw::new(kind, p.b, p.springs, p.dim)?;
        let params = PhysicalParams::new(self.fluid.viscosity, p.eps, p.deborah, p.k, p.eth, p.rouse.clone())?;
        let m = self.solver.maxwellian_m;
        let model = PolymerModel::new(law, m.is_finite().then_some(m), params)?;
        FokkerPlanck::new(model, self.solver.nr, self.solver.ntheta, self.solver.ell)
    }

    pub fn koiter(&self) -> Result<KoiterModel> {
        let g = &self.geometry;
        let shell =
            ReferenceShell::new(Surface::Flat { height: g.height }, [g.nx, 1], [g.period, 1.0], g.tube, g.coercivity, g.gamma_min, self.profile())?;
        KoiterModel::new(shell, self.shell.lame_lambda, self.shell.lame_mu, self.shell.eps0, false)
    }

    pub fn kernel(&self, rho: f64) -> Result<RegularizationKernel> {
        let s = &self.shell;
        let pick = |w: f64, derived: f64| if w < 0.0 { derived } else { w };
        RegularizationKernel::new(rho, pick(s.temporal_width, rho), pick(s.spatial_width, rho.sqrt()), pick(s.shell_width, rho.sqrt()))
    }

    pub fn forcing(&self) -> Forcing {
        let f = &self.forcing;
        let shell = match f.shell {
            ShellLoadName::None => ShellLoad::None,
            ShellLoadName::Breathing => ShellLoad::Breathing { amplitude: f.shell_amplitude, mode: f.shell_mode, omega: f.shell_omega },
            ShellLoadName::Steady => ShellLoad::Steady { amplitude: f.shell_amplitude, mode: f.shell_mode },
        };
        let body = match f.body {
            BodyLoadName::None => BodyLoad::None,
            BodyLoadName::Channel => BodyLoad::Channel { amplitude: f.body_amplitude },
        };
        Forcing { shell, body }
    }

    pub fn fixed_point(&self) -> FixedPointConfig {
        let s = &self.solver;
        FixedPointConfig {
            damping: s.damping,
            max_iter: s.max_iter,
            tol: s.tol,
            window: s.window,
            guard_margin: s.guard_margin,
            stagnation: s.stagnation,
        }
    }

    pub fn shell_params(&self) -> ShellParams {
        ShellParams { rho: self.shell.rho, damping: self.shell.damping, tol: self.shell.tol, max_iter: self.shell.max_iter }
    }

    pub fn coupled_problem(&self, rho: f64) -> Result<CoupledProblem> {
        CoupledProblem::new(
            self.fokker_planck()?,
            self.koiter()?,
            self.kernel(rho)?,
            self.geometry.nz,
            self.geometry.height,
            self.fluid.dt,
            self.forcing(),
            self.fixed_point(),
        )
    }
}

/// Key reference printed by `--help`.
pub const CONFIG_REFERENCE: &str = "\
Configuration (TOML; every key optional, unknown keys rejected). Defaults in brackets.
  [run]       name [run], seed [0], t_end [0.1]
  [geometry]  nx [16] (4..512), nz [8] (2..256), period [2pi], height [1], tube L [0.5] (< height),
              coercivity L~ [0.5] (>= L), gamma_min [0.1], profile_lo [-0.75], profile_hi [-0.25]
              (-1 < lo < hi < 0)
  [polymer]   law [fene] (fene | hookean | tanner-locked), b [10], springs [1], dim [2],
              eps [0.01], deborah [1], k [0.1], eth [0], rouse [[[1.0]]]
  [fluid]     viscosity [0.1], dt [0.005]
  [shell]     lame_lambda [1], lame_mu [1], eps0 [0.1], rho [0.01],
              temporal_width [-1], spatial_width [-1], shell_width [-1]
              (negative: rho, sqrt(rho), sqrt(rho)), damping [0], tol [1e-13], max_iter [200]
  [solver]    ell [inf] (>= 1, inf = no cutoff), maxwellian_m [inf] (>= 1, inf = exact),
              nr [6], ntheta [12], damping [0.5] (0..1], tol [1e-7], max_iter [200],
              stagnation [25], window [0.02], guard_margin [1e-3] [0, 1), ledger_slack [1e-3]
  [forcing]   shell [none] (none | breathing | steady), shell_amplitude [0], shell_mode [1],
              shell_omega [1], body [none] (none | channel), body_amplitude [0]
  [initial]   kind [rest] (rest | shell-mode | periodic-orbit | random), amplitude [0], mode [1],
              velocity [0], psi_perturbation [0] [0, 1)
  [fpk]       shear_rate [1], mesh_amplitude [0], mesh_omega [3], entropy_slack [1e-3]
  [sweep]     rhos [[0.1, 0.01, 0.001]] (at least two levels)
  [output]    dir [out], every [1], fields_every [0] (0: initial and final only)
Relative output directories are resolved against POLYSHELL_OUTPUT_ROOT if set,
otherwise against the current directory.";
