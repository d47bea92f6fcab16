//! Reference shell geometry, deformed-surface quantities, admissibility,
//! the slab domain map and the column mesh used by the 2D solvers.

use crate::ad::{cross3, dot3, Jet2, Scalar};
use crate::error::{Error, Result};
use crate::spectral::TrigInterpolant;

/// Analytic middle surfaces. Coordinates `y` are arc-length-like and the
/// unit normal is `d1 phi x d2 phi` normalized, pointing out of the fluid.
#[derive(Clone, Debug, PartialEq)]
pub enum Surface {
    /// Plane `x3 = height`.
    Flat { height: f64 },
    /// Cylinder of given radius around the x1 axis; `y2` is arc length.
    Cylinder { radius: f64 },
    /// Torus with major radius `major` and tube radius `minor`.
    Torus { major: f64, minor: f64 },
    /// Latitude/longitude chart of a sphere; only meaningful away from the poles.
    SpherePatch { radius: f64 },
}

impl Surface {
    pub fn position<S: Scalar>(&self, y: [S; 2]) -> [S; 3] {
        match *self {
            Surface::Flat { height } => [y[0], y[1], S::cst(height)],
            Surface::Cylinder { radius } => {
                let a = y[1].scale(1.0 / radius);
                [y[0], a.sin().scale(radius), a.cos().scale(radius)]
            }
            Surface::Torus { major, minor } => {
                let u = y[0].scale(1.0 / major);
                let v = y[1].scale(1.0 / minor);
                let rho = S::cst(major) + v.cos().scale(minor);
                [rho * u.cos(), rho * u.sin(), v.sin().scale(minor)]
            }
            Surface::SpherePatch { radius } => {
                let lon = y[0].scale(1.0 / radius);
                let lat = y[1].scale(1.0 / radius);
                [(lat.cos() * lon.cos()).scale(radius), (lat.cos() * lon.sin()).scale(radius), lat.sin().scale(radius)]
            }
        }
    }

    /// Hand-coded tangent vectors `d1 phi`, `d2 phi`.
    pub fn tangents<S: Scalar>(&self, y: [S; 2]) -> [[S; 3]; 2] {
        let z = S::cst(0.0);
        let one = S::cst(1.0);
        match *self {
            Surface::Flat { .. } => [[one, z, z], [z, one, z]],
            Surface::Cylinder { radius } => {
                let a = y[1].scale(1.0 / radius);
                [[one, z, z], [z, a.cos(), -a.sin()]]
            }
            Surface::Torus { major, minor } => {
                let u = y[0].scale(1.0 / major);
                let v = y[1].scale(1.0 / minor);
                let rho = (S::cst(major) + v.cos().scale(minor)).scale(1.0 / major);
                [[-(rho * u.sin()), rho * u.cos(), z], [-(v.sin() * u.cos()), -(v.sin() * u.sin()), v.cos()]]
            }
            Surface::SpherePatch { radius } => {
                let lon = y[0].scale(1.0 / radius);
                let lat = y[1].scale(1.0 / radius);
                [[-(lat.cos() * lon.sin()), lat.cos() * lon.cos(), z], [-(lat.sin() * lon.cos()), -(lat.sin() * lon.sin()), lat.cos()]]
            }
        }
    }

    pub fn normal<S: Scalar>(&self, y: [S; 2]) -> [S; 3] {
        let t = self.tangents(y);
        let n = cross3(&t[0], &t[1]);
        let len = dot3(&n, &n).sqrt();
        [n[0] / len, n[1] / len, n[2] / len]
    }

    /// Pointwise geometric data with derivatives up to second order.
    pub fn frame(&self, y: [f64; 2]) -> Frame {
        let yj = [Jet2::var(y[0], 0), Jet2::var(y[1], 1)];
        let p = self.position(yj);
        let nu = self.normal(yj);
        let mut f = Frame::default();
        for c in 0..3 {
            f.phi[c] = p[c].v;
            f.nu[c] = nu[c].v;
            for i in 0..2 {
                f.dphi[i][c] = p[c].g[i];
                f.dnu[i][c] = nu[c].g[i];
                for j in 0..2 {
                    f.ddphi[i][j][c] = p[c].h[i][j];
                    f.ddnu[i][j][c] = nu[c].h[i][j];
                }
            }
        }
        let t = self.tangents(y);
        f.dphi = t;
        let n = cross3(&t[0], &t[1]);
        f.area = dot3(&n, &n).sqrt();
        f
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, Surface::Flat { .. })
    }
}

/// Surface data at one point: `phi`, its first and second derivatives, the
/// unit normal and its derivatives, and the area factor `|d1 phi x d2 phi|`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Frame {
    pub phi: [f64; 3],
    pub dphi: [[f64; 3]; 2],
    pub ddphi: [[[f64; 3]; 2]; 2],
    pub nu: [f64; 3],
    pub dnu: [[f64; 3]; 2],
    pub ddnu: [[[f64; 3]; 2]; 2],
    pub area: f64,
}

impl Frame {
    /// Covariant metric `a_ij = d_i phi . d_j phi`.
    pub fn metric(&self) -> [[f64; 2]; 2] {
        let mut a = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                a[i][j] = dot3(&self.dphi[i], &self.dphi[j]);
            }
        }
        a
    }

    pub fn inverse_metric(&self) -> [[f64; 2]; 2] {
        let a = self.metric();
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
    }
}

fn lift<S: Scalar>(v: &[f64; 3]) -> [S; 3] {
    [S::cst(v[0]), S::cst(v[1]), S::cst(v[2])]
}

fn axpy3<S: Scalar>(acc: &mut [S; 3], a: S, v: &[S; 3]) {
    for c in 0..3 {
        acc[c] = acc[c] + a * v[c];
    }
}

/// The pure displacement part of the deformed normal, i.e. everything in
/// `d1 phi_eta x d2 phi_eta` except `nu |d1 phi x d2 phi|`.
pub fn normal_increment<S: Scalar>(f: &Frame, eta: S, deta: [S; 2]) -> [S; 3] {
    let a1: [S; 3] = lift(&f.dphi[0]);
    let a2: [S; 3] = lift(&f.dphi[1]);
    let nu: [S; 3] = lift(&f.nu);
    let n1: [S; 3] = lift(&f.dnu[0]);
    let n2: [S; 3] = lift(&f.dnu[1]);
    let mut out = [S::cst(0.0); 3];
    axpy3(&mut out, deta[1], &cross3(&a1, &nu));
    axpy3(&mut out, deta[1] * eta, &cross3(&n1, &nu));
    axpy3(&mut out, deta[0], &cross3(&nu, &a2));
    axpy3(&mut out, deta[0] * eta, &cross3(&nu, &n2));
    let mixed = {
        let x = cross3(&a1, &n2);
        let y = cross3(&n1, &a2);
        [x[0] + y[0], x[1] + y[1], x[2] + y[2]]
    };
    axpy3(&mut out, eta, &mixed);
    axpy3(&mut out, eta * eta, &cross3(&n1, &n2));
    out
}

/// Deformed (non-unit) normal `d1 phi_eta x d2 phi_eta`.
pub fn deformed_normal<S: Scalar>(f: &Frame, eta: S, deta: [S; 2]) -> [S; 3] {
    let mut n = normal_increment(f, eta, deta);
    for c in 0..3 {
        n[c] = n[c] + S::cst(f.nu[c] * f.area);
    }
    n
}

/// Change of metric `G_ij(eta)`.
pub fn metric_change<S: Scalar>(f: &Frame, eta: S, deta: [S; 2]) -> [[S; 2]; 2] {
    let mut g = [[S::cst(0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let lin = dot3(&f.dphi[i], &f.dnu[j]) + dot3(&f.dphi[j], &f.dnu[i]);
            let quad = dot3(&f.dnu[i], &f.dnu[j]);
            g[i][j] = deta[i] * deta[j] + eta.scale(lin) + (eta * eta).scale(quad);
        }
    }
    g
}

/// Change of curvature `R#_ij(eta)`, evaluated as
/// `(d_ij phi_eta - d_ij phi) . nu~ + d_ij phi . (nu~ - nu)` with
/// `nu~ = nu_eta / |d1 phi x d2 phi|`, which is algebraically the defining
/// expression but vanishes exactly at `eta = 0`.
pub fn curvature_change<S: Scalar>(f: &Frame, eta: S, deta: [S; 2], ddeta: [[S; 2]; 2]) -> [[S; 2]; 2] {
    let inc = normal_increment(f, eta, deta);
    let inv_area = 1.0 / f.area;
    let dnu_t: [S; 3] = [inc[0].scale(inv_area), inc[1].scale(inv_area), inc[2].scale(inv_area)];
    let nu_t: [S; 3] = [dnu_t[0] + S::cst(f.nu[0]), dnu_t[1] + S::cst(f.nu[1]), dnu_t[2] + S::cst(f.nu[2])];
    let nu: [S; 3] = lift(&f.nu);
    let mut r = [[S::cst(0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut d = [S::cst(0.0); 3];
            axpy3(&mut d, ddeta[i][j], &nu);
            axpy3(&mut d, deta[i], &lift(&f.dnu[j]));
            axpy3(&mut d, deta[j], &lift(&f.dnu[i]));
            axpy3(&mut d, eta, &lift(&f.ddnu[i][j]));
            r[i][j] = dot3(&d, &nu_t) + dot3(&lift(&f.ddphi[i][j]), &dnu_t);
        }
    }
    r
}

/// Coercivity factor `gamma(eta)`: one plus linear plus quadratic terms in eta.
pub fn geometric_factor(f: &Frame, eta: f64) -> f64 {
    let nu = f.nu;
    let lin = {
        let x = cross3(&f.dphi[0], &f.dnu[1]);
        let y = cross3(&f.dnu[0], &f.dphi[1]);
        dot3(&nu, &[x[0] + y[0], x[1] + y[1], x[2] + y[2]])
    };
    let quad = dot3(&nu, &cross3(&f.dnu[0], &f.dnu[1]));
    1.0 + eta * lin / f.area + eta * eta * quad / f.area
}

/// Smooth transition profile: 0 below `lo`, 1 above `hi`, quintic
/// smootherstep in between (C2 at both knots).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Profile {
    pub lo: f64,
    pub hi: f64,
}

impl Default for Profile {
    fn default() -> Self {
        Profile { lo: -0.75, hi: -0.25 }
    }
}

impl Profile {
    pub fn value(&self, s: f64) -> f64 {
        let t = ((s - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0);
        t * t * t * (t * (6.0 * t - 15.0) + 10.0)
    }

    pub fn slope(&self, s: f64) -> f64 {
        let w = self.hi - self.lo;
        let t = (s - self.lo) / w;
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        30.0 * t * t * (t - 1.0) * (t - 1.0) / w
    }

    /// `max |beta'|`, attained at the midpoint.
    pub fn max_slope(&self) -> f64 {
        1.875 / (self.hi - self.lo)
    }
}

#[derive(Clone, Debug)]
pub struct ReferenceShell {
    pub surface: Surface,
    pub n1: usize,
    pub n2: usize,
    pub period: [f64; 2],
    /// Tubular half-width L.
    pub tube: f64,
    /// Coercivity threshold L~ >= L.
    pub coercivity: f64,
    pub gamma_min: f64,
    pub profile: Profile,
    pub frames: Vec<Frame>,
}

impl ReferenceShell {
    pub fn new(surface: Surface, n: [usize; 2], period: [f64; 2], tube: f64, coercivity: f64, gamma_min: f64, profile: Profile) -> Result<Self> {
        if n[0] == 0 || n[1] == 0 {
            return Err(Error::Config("shell grid must be nonempty".into()));
        }
        if !(tube > 0.0 && tube <= coercivity) {
            return Err(Error::Config(format!("need 0 < L <= L~, got L={tube}, L~={coercivity}")));
        }
        if !(gamma_min > 0.0) {
            return Err(Error::Config("gamma_min must be positive".into()));
        }
        if !(profile.lo > -1.0 && profile.lo < profile.hi && profile.hi < 0.0) {
            return Err(Error::Config("profile knots must satisfy -1 < lo < hi < 0".into()));
        }
        let tau = std::f64::consts::TAU;
        let check = |want: f64, got: f64, what: &str| -> Result<()> {
            if (want - got).abs() > 1e-9 * want.max(1.0) {
                Err(Error::Config(format!("{what} period must be {want}, got {got}")))
            } else {
                Ok(())
            }
        };
        match surface {
            Surface::Cylinder { radius } => check(tau * radius, period[1], "cylinder circumferential")?,
            Surface::Torus { major, minor } => {
                check(tau * major, period[0], "torus toroidal")?;
                check(tau * minor, period[1], "torus poloidal")?;
                if minor >= major {
                    return Err(Error::Config("torus needs minor < major".into()));
                }
            }
            _ => {}
        }
        let mut frames = Vec::with_capacity(n[0] * n[1]);
        for b in 0..n[1] {
            for a in 0..n[0] {
                let y = [a as f64 * period[0] / n[0] as f64, b as f64 * period[1] / n[1] as f64];
                let f = surface.frame(y);
                if !(f.area > 1e-12) {
                    return Err(Error::Config(format!("tangents degenerate at node ({a},{b})")));
                }
                if (dot3(&f.nu, &f.nu).sqrt() - 1.0).abs() > 1e-12 {
                    return Err(Error::Config(format!("normal not unit at node ({a},{b})")));
                }
                frames.push(f);
            }
        }
        Ok(ReferenceShell { surface, n1: n[0], n2: n[1], period, tube, coercivity, gamma_min, profile, frames })
    }

    /// Flat periodic sheet at height `height`, the default desk-scale geometry.
    pub fn flat(n: [usize; 2], period: [f64; 2], height: f64, tube: f64) -> Result<Self> {
        Self::new(Surface::Flat { height }, n, period, tube, tube, 0.1, Profile::default())
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> [f64; 2] {
        [self.period[0] / self.n1 as f64, self.period[1] / self.n2 as f64]
    }

    pub fn node(&self, k: usize) -> [f64; 2] {
        let h = self.spacing();
        [(k % self.n1) as f64 * h[0], (k / self.n1) as f64 * h[1]]
    }

    pub fn index(&self, a: isize, b: isize) -> usize {
        let a = a.rem_euclid(self.n1 as isize) as usize;
        let b = b.rem_euclid(self.n2 as isize) as usize;
        a + self.n1 * b
    }
}

/// Shell displacement and velocity on the periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ShellState {
    pub eta: Vec<f64>,
    pub eta_t: Vec<f64>,
    pub t: f64,
}

impl ShellState {
    pub fn rest(n: usize) -> Self {
        ShellState { eta: vec![0.0; n], eta_t: vec![0.0; n], t: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibilityReport {
    pub ok: bool,
    pub min_gamma: f64,
    pub sup_eta: f64,
    /// `L - sup|eta|`.
    pub margin: f64,
    /// Smallest value of the column Jacobian `1 + eta beta'/L` over the tube.
    pub min_jacobian: f64,
    pub reason: Option<String>,
}

/// Pure admissibility check: `sup|eta| < L`, `gamma >= gamma_min` and a
/// positive Jacobian of the domain map at every node.
pub fn check_admissible(shell: &ReferenceShell, eta: &[f64]) -> AdmissibilityReport {
    let mut min_gamma = f64::INFINITY;
    let mut sup = 0.0f64;
    let mut min_eta = 0.0f64;
    for (f, &e) in shell.frames.iter().zip(eta.iter()) {
        min_gamma = min_gamma.min(geometric_factor(f, e));
        sup = sup.max(e.abs());
        min_eta = min_eta.min(e);
    }
    if eta.iter().any(|e| !e.is_finite()) {
        sup = f64::INFINITY;
    }
    let min_jacobian = 1.0 + min_eta * shell.profile.max_slope() / shell.tube;
    let reason = if !(sup < shell.tube) {
        Some(format!("sup|eta| = {sup:.6e} reached the tube half-width {:.6e}", shell.tube))
    } else if !(min_gamma >= shell.gamma_min) {
        Some(format!("min gamma = {min_gamma:.6e} below {:.6e}", shell.gamma_min))
    } else if !(min_jacobian > 0.0) {
        Some(format!("domain map folds: min Jacobian {min_jacobian:.6e}"))
    } else {
        None
    };
    AdmissibilityReport { ok: reason.is_none(), min_gamma, sup_eta: sup, margin: shell.tube - sup, min_jacobian, reason }
}

/// Deformation of the periodic slab `omega x (0, H)` whose top face is the
/// flat shell. Points are `(x1, x2, x3)`; the map is the identity below
/// `H - L` and moves points vertically by `eta(y) beta((x3 - H)/L)` inside
/// the tube.
#[derive(Clone, Debug)]
pub struct DomainMap {
    pub height: f64,
    pub tube: f64,
    pub profile: Profile,
    pub sup_eta: f64,
    /// Whether `max|beta'| < L / sup|eta|` holds (a sufficient condition).
    pub uniform_slope_condition: bool,
    eta: TrigInterpolant,
}

pub fn build_domain_map(shell: &ReferenceShell, state: &ShellState) -> Result<DomainMap> {
    let height = match shell.surface {
        Surface::Flat { height } => height,
        _ => return Err(Error::Config("the domain map is implemented for the flat slab only".into())),
    };
    if shell.tube > height {
        return Err(Error::Config("tube half-width exceeds slab height".into()));
    }
    let rep = check_admissible(shell, &state.eta);
    if !rep.ok {
        return Err(Error::Admissibility(rep.reason.unwrap_or_default()));
    }
    let eta = TrigInterpolant::new(&state.eta, shell.n1, shell.n2, shell.period[0], shell.period[1]);
    Ok(DomainMap {
        height,
        tube: shell.tube,
        profile: shell.profile,
        sup_eta: rep.sup_eta,
        uniform_slope_condition: shell.profile.max_slope() * rep.sup_eta < shell.tube,
        eta,
    })
}

impl DomainMap {
    fn s(&self, x3: f64) -> f64 {
        (x3 - self.height) / self.tube
    }

    /// True inside the tube and above it; the formula is extended past the
    /// top with `beta = 1` so that Newton iterates may leave the slab.
    pub fn in_tube(&self, x: [f64; 3]) -> bool {
        self.s(x[2]) >= -1.0
    }

    pub fn forward(&self, x: [f64; 3]) -> [f64; 3] {
        if !self.in_tube(x) {
            return x;
        }
        let (e, _) = self.eta.eval([x[0], x[1]]);
        [x[0], x[1], x[2] + e * self.profile.value(self.s(x[2]))]
    }

    pub fn jacobian(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let mut j = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        if !self.in_tube(x) {
            return j;
        }
        let (e, g) = self.eta.eval([x[0], x[1]]);
        let s = self.s(x[2]);
        let b = self.profile.value(s);
        j[2][0] = g[0] * b;
        j[2][1] = g[1] * b;
        j[2][2] = 1.0 + e * self.profile.slope(s) / self.tube;
        j
    }

    pub fn jacobian_det(&self, x: [f64; 3]) -> f64 {
        self.jacobian(x)[2][2]
    }

    /// Boundary map `phi(y) + nu(y) eta(y)` for the flat sheet.
    pub fn boundary(&self, y: [f64; 2]) -> [f64; 3] {
        let (e, _) = self.eta.eval(y);
        [y[0], y[1], self.height + e]
    }

    /// Damped Newton inversion with the analytic Jacobian.
    pub fn inverse(&self, target: [f64; 3]) -> Result<[f64; 3]> {
        let mut x = target;
        for _ in 0..50 {
            let f = self.forward(x);
            let r = [f[0] - target[0], f[1] - target[1], f[2] - target[2]];
            let rn = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
            if rn < 1e-12 {
                return Ok(x);
            }
            let j = self.jacobian(x);
            // lower-triangular structure: x1, x2 rows are identity
            let d0 = r[0];
            let d1 = r[1];
            let d2 = (r[2] - j[2][0] * d0 - j[2][1] * d1) / j[2][2];
            let mut step = 1.0;
            loop {
                let trial = [x[0] - step * d0, x[1] - step * d1, x[2] - step * d2];
                let ft = self.forward(trial);
                let rt = ((ft[0] - target[0]).powi(2) + (ft[1] - target[1]).powi(2) + (ft[2] - target[2]).powi(2)).sqrt();
                if rt < rn || step < 1e-4 {
                    x = trial;
                    break;
                }
                step *= 0.5;
            }
        }
        let f = self.forward(x);
        let rn = ((f[0] - target[0]).powi(2) + (f[1] - target[1]).powi(2) + (f[2] - target[2]).powi(2)).sqrt();
        if rn < 1e-12 {
            Ok(x)
        } else {
            Err(Error::Diverged(format!("domain map inversion stalled at residual {rn:.3e}")))
        }
    }
}

/// Column mesh of the 2D periodic channel `(0, P) x (0, H + eta)`.
///
/// Reference coordinates are `(xi, zeta)`; column `i` is centred at
/// `xi_i = i h_xi` and layer `j` at `zeta_j = (j + 1/2) h_zeta`. Face heights
/// follow the domain map evaluated with the column-centre displacement.
#[derive(Clone, Debug)]
pub struct ColumnMesh {
    pub nx: usize,
    pub nz: usize,
    pub period: f64,
    pub height: f64,
    pub tube: f64,
    pub profile: Profile,
    pub eta: Vec<f64>,
    /// `z[i * (nz + 1) + jf]`: physical height of horizontal face `jf` in column `i`.
    pub z: Vec<f64>,
}

impl ColumnMesh {
    pub fn new(nx: usize, nz: usize, period: f64, height: f64, tube: f64, profile: Profile, eta: &[f64]) -> Self {
        assert_eq!(eta.len(), nx);
        let hz = height / nz as f64;
        let mut z = vec![0.0; nx * (nz + 1)];
        for i in 0..nx {
            for jf in 0..=nz {
                let zeta = jf as f64 * hz;
                z[i * (nz + 1) + jf] = zeta + eta[i] * profile.value((zeta - height) / tube);
            }
        }
        ColumnMesh { nx, nz, period, height, tube, profile, eta: eta.to_vec(), z }
    }

    pub fn flat(nx: usize, nz: usize, period: f64, height: f64, tube: f64) -> Self {
        Self::new(nx, nz, period, height, tube, Profile::default(), &vec![0.0; nx])
    }

    pub fn hx(&self) -> f64 {
        self.period / self.nx as f64
    }

    pub fn hz(&self) -> f64 {
        self.height / self.nz as f64
    }

    pub fn ncells(&self) -> usize {
        self.nx * self.nz
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    #[inline]
    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.nx as isize) as usize
    }

    #[inline]
    pub fn zf(&self, i: usize, jf: usize) -> f64 {
        self.z[i * (self.nz + 1) + jf]
    }

    /// Physical height at reference level `zeta` in column `i`.
    pub fn z_at(&self, i: usize, zeta: f64) -> f64 {
        zeta + self.eta[i] * self.profile.value((zeta - self.height) / self.tube)
    }

    pub fn dz(&self, i: usize, j: usize) -> f64 {
        self.zf(i, j + 1) - self.zf(i, j)
    }

    pub fn area(&self, i: usize, j: usize) -> f64 {
        self.hx() * self.dz(i, j)
    }

    pub fn areas(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.ncells()];
        for j in 0..self.nz {
            for i in 0..self.nx {
                a[self.cell(i, j)] = self.area(i, j);
            }
        }
        a
    }

    /// Height of the vertical face between columns `i` and `i + 1` in layer `j`.
    pub fn vface_height(&self, i: usize, j: usize) -> f64 {
        0.5 * (self.dz(i, j) + self.dz(self.wrap(i as isize + 1), j))
    }

    /// Slope `dZ/dxi` at column `i` and reference level `zeta` (central difference).
    pub fn slope(&self, i: usize, zeta: f64) -> f64 {
        let ip = self.wrap(i as isize + 1);
        let im = self.wrap(i as isize - 1);
        (self.z_at(ip, zeta) - self.z_at(im, zeta)) / (2.0 * self.hx())
    }

    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        [i as f64 * self.hx(), 0.5 * (self.zf(i, j) + self.zf(i, j + 1))]
    }

    pub fn volume(&self) -> f64 {
        (0..self.nx).map(|i| self.hx() * self.zf(i, self.nz)).sum()
    }

    pub fn min_dz(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.nx {
            for j in 0..self.nz {
                m = m.min(self.dz(i, j));
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus() -> ReferenceShell {
        let tau = std::f64::consts::TAU;
        ReferenceShell::new(Surface::Torus { major: 2.0, minor: 0.7 }, [12, 8], [tau * 2.0, tau * 0.7], 0.2, 0.3, 0.1, Profile::default()).unwrap()
    }

    #[test]
    fn tangents_agree_with_differentiated_position() {
        for s in [Surface::Cylinder { radius: 0.8 }, Surface::Torus { major: 2.0, minor: 0.7 }, Surface::SpherePatch { radius: 1.3 }] {
            let y = [0.31, 0.47];
            let yj = [Jet2::var(y[0], 0), Jet2::var(y[1], 1)];
            let p = s.position(yj);
            let t = s.tangents(y);
            for i in 0..2 {
                for c in 0..3 {
                    assert!((p[c].g[i] - t[i][c]).abs() < 1e-13, "{s:?}");
                }
            }
        }
    }

    #[test]
    fn normals_point_outward() {
        let f = Surface::Cylinder { radius: 0.8 }.frame([0.1, 0.4]);
        assert!(dot3(&f.nu, &[0.0, f.phi[1], f.phi[2]]) > 0.0);
        let f = Surface::SpherePatch { radius: 1.5 }.frame([0.2, 0.1]);
        assert!(dot3(&f.nu, &f.phi) > 0.0);
    }

    #[test]
    fn zero_displacement_gives_reference_normal() {
        let sh = torus();
        for f in &sh.frames {
            let n = deformed_normal(f, 0.0, [0.0, 0.0]);
            for c in 0..3 {
                assert_eq!(n[c], f.nu[c] * f.area);
            }
        }
    }

    #[test]
    fn constant_displacement_on_sphere_keeps_normal_direction() {
        let s = Surface::SpherePatch { radius: 1.2 };
        let f = s.frame([0.3, 0.2]);
        let n = deformed_normal(&f, 0.15, [0.0, 0.0]);
        let c = cross3(&n, &f.nu);
        assert!(dot3(&c, &c).sqrt() < 1e-13);
    }

    #[test]
    fn deformed_normal_matches_fd_cross_product() {
        // eta(y) = a sin(y1) cos(y2) on the torus, FD of phi + eta nu
        let s = Surface::Torus { major: 2.0, minor: 0.7 };
        let eta = |y: [f64; 2]| 0.05 * (y[0]).sin() * (2.0 * y[1]).cos();
        let deta = |y: [f64; 2]| [0.05 * y[0].cos() * (2.0 * y[1]).cos(), -0.1 * y[0].sin() * (2.0 * y[1]).sin()];
        let phi_eta = |y: [f64; 2]| {
            let f = s.frame(y);
            let e = eta(y);
            [f.phi[0] + e * f.nu[0], f.phi[1] + e * f.nu[1], f.phi[2] + e * f.nu[2]]
        };
        let y = [0.4, 0.9];
        let f = s.frame(y);
        let exact = deformed_normal(&f, eta(y), deta(y));
        let mut errs = Vec::new();
        for h in [1e-2, 5e-3] {
            let d = |i: usize| {
                let mut yp = y;
                let mut ym = y;
                yp[i] += h;
                ym[i] -= h;
                let (a, b) = (phi_eta(yp), phi_eta(ym));
                [(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h), (a[2] - b[2]) / (2.0 * h)]
            };
            let fd = cross3(&d(0), &d(1));
            let e = ((fd[0] - exact[0]).powi(2) + (fd[1] - exact[1]).powi(2) + (fd[2] - exact[2]).powi(2)).sqrt();
            errs.push(e);
        }
        let rate = (errs[0] / errs[1]).log2();
        assert!(errs[1] < 1e-4 && rate > 1.8, "errs {errs:?}");
    }

    #[test]
    fn gamma_identities() {
        let sh = torus();
        for f in &sh.frames {
            assert_eq!(geometric_factor(f, 0.0), 1.0);
        }
        let flat = Surface::Flat { height: 1.0 }.frame([0.2, 0.3]);
        for e in [-0.3, 0.1, 0.7] {
            assert_eq!(geometric_factor(&flat, e), 1.0);
        }
        // cylinder: gamma = 1 + eta/R
        let cyl = Surface::Cylinder { radius: 0.8 }.frame([0.2, 0.3]);
        assert!((geometric_factor(&cyl, 0.2) - (1.0 + 0.2 / 0.8)).abs() < 1e-13);
    }

    #[test]
    fn admissibility_cases() {
        let sh = ReferenceShell::flat([8, 1], [1.0, 1.0], 1.0, 0.5).unwrap();
        let r = check_admissible(&sh, &[0.0; 8]);
        assert!(r.ok && r.min_gamma == 1.0);
        let r = check_admissible(&sh, &[0.5; 8]);
        assert!(!r.ok);
        // gamma touching zero on a cylinder: eta = -R
        let cyl =
            ReferenceShell::new(Surface::Cylinder { radius: 0.5 }, [4, 8], [1.0, std::f64::consts::TAU * 0.5], 0.45, 0.6, 0.1, Profile::default())
                .unwrap();
        let mut eta = vec![0.0; 32];
        eta[5] = -0.46;
        let r = check_admissible(&cyl, &eta);
        assert!(!r.ok);
        assert!(r.min_gamma < 0.1);
    }

    fn random_smooth_eta(n1: usize, n2: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        let mut rnd = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let tau = std::f64::consts::TAU;
        let c: Vec<f64> = (0..6).map(|_| rnd()).collect();
        (0..n1 * n2)
            .map(|k| {
                let y = [(k % n1) as f64 / n1 as f64, (k / n1) as f64 / n2 as f64];
                c[0] * (tau * y[0]).cos()
                    + c[1] * (tau * y[1]).sin()
                    + c[2] * (tau * (y[0] + y[1])).cos()
                    + c[3] * (2.0 * tau * y[0]).sin()
                    + c[4]
                    + c[5] * (tau * y[1]).cos()
            })
            .collect()
    }

    #[test]
    fn domain_map_round_trip_at_ninety_percent() {
        let (n1, n2) = (16, 16);
        let sh = ReferenceShell::flat([n1, n2], [1.0, 1.0], 1.0, 0.5).unwrap();
        for seed in 0..5 {
            let raw = random_smooth_eta(n1, n2, seed);
            // shift so the peak is 0.9 L and keep the trough inside the fold limit
            let (mx, mn) = raw.iter().fold((f64::MIN, f64::MAX), |(a, b), &x| (a.max(x), b.min(x)));
            let lo = -0.2 * sh.tube;
            let eta: Vec<f64> = raw.iter().map(|x| lo + (x - mn) / (mx - mn) * (0.9 * sh.tube - lo)).collect();
            let st = ShellState { eta, eta_t: vec![0.0; n1 * n2], t: 0.0 };
            let dm = build_domain_map(&sh, &st).unwrap();
            assert!((dm.sup_eta - 0.45).abs() < 1e-12);
            for k in 0..200 {
                let x = [(k as f64 * 0.137) % 1.0, (k as f64 * 0.291) % 1.0, 0.5 + 0.5 * ((k as f64 * 0.61) % 1.0)];
                let y = dm.forward(x);
                let back = dm.inverse(y).unwrap();
                let err = ((back[0] - x[0]).powi(2) + (back[1] - x[1]).powi(2) + (back[2] - x[2]).powi(2)).sqrt();
                assert!(err < 1e-10, "round trip {err}");
                assert!(dm.jacobian_det(x) > 0.0);
            }
        }
    }

    #[test]
    fn domain_map_identity_and_boundary() {
        let sh = ReferenceShell::flat([8, 8], [1.0, 1.0], 1.0, 0.4).unwrap();
        let zero = build_domain_map(&sh, &ShellState::rest(64)).unwrap();
        let x = [0.3, 0.7, 0.9];
        assert_eq!(zero.forward(x), x);
        let c = ShellState { eta: vec![0.1; 64], eta_t: vec![0.0; 64], t: 0.0 };
        let dm = build_domain_map(&sh, &c).unwrap();
        let b = dm.boundary([0.3, 0.2]);
        assert!((b[2] - 1.1).abs() < 1e-12);
        // Psi on the boundary equals Phi
        let top = dm.forward([0.3, 0.2, 1.0]);
        assert!((top[2] - b[2]).abs() < 1e-12);
        // identity below the tube
        let low = [0.3, 0.2, 0.59];
        assert_eq!(dm.forward(low), low);
        // too large
        let big = ShellState { eta: vec![0.4; 64], eta_t: vec![0.0; 64], t: 0.0 };
        assert!(matches!(build_domain_map(&sh, &big), Err(Error::Admissibility(_))));
    }

    #[test]
    fn profile_properties() {
        let p = Profile::default();
        assert_eq!(p.value(-1.0), 0.0);
        assert_eq!(p.value(-0.8), 0.0);
        assert_eq!(p.value(-0.2), 1.0);
        let mut mx = 0.0f64;
        for k in 0..=1000 {
            let s = -1.0 + k as f64 / 1000.0;
            mx = mx.max(p.slope(s));
            let h = 1e-6;
            if (s - p.lo).abs() > 2e-6 && (s - p.hi).abs() > 2e-6 && s > -1.0 + h && s < -h {
                let fd = (p.value(s + h) - p.value(s - h)) / (2.0 * h);
                assert!((fd - p.slope(s)).abs() < 1e-6);
            }
        }
        assert!((mx - p.max_slope()).abs() < 1e-9);
    }

    #[test]
    fn column_mesh_geometry() {
        let eta: Vec<f64> = (0..8).map(|i| 0.05 * (i as f64).sin()).collect();
        let m = ColumnMesh::new(8, 6, 2.0, 1.0, 0.5, Profile::default(), &eta);
        for i in 0..8 {
            assert!((m.zf(i, 6) - (1.0 + eta[i])).abs() < 1e-14);
            assert_eq!(m.zf(i, 0), 0.0);
        }
        let vol: f64 = m.areas().iter().sum();
        assert!((vol - m.volume()).abs() < 1e-13);
        assert!(m.min_dz() > 0.0);
    }
}
