//! Finite-volume transport-diffusion on the moving column mesh.
//!
//! Horizontal-face arrays (`horiz`) are indexed `i + nx j` for the face between
//! columns `i` and `i + 1` in layer `j`, positive toward `+x`. Vertical-face
//! arrays (`vert`) are indexed `i + nx jf` for `jf = 0..=nz`, positive upward.

use crate::error::{Error, Result};
use crate::geometry::ColumnMesh;
use crate::linalg::{SparseLu, TripletBuilder};

/// Volume fluxes (per unit time) of a velocity field through the mesh faces.
#[derive(Clone, Debug, PartialEq)]
pub struct Fluxes {
    pub horiz: Vec<f64>,
    pub vert: Vec<f64>,
}

impl Fluxes {
    pub fn zero(nx: usize, nz: usize) -> Self {
        Fluxes { horiz: vec![0.0; nx * nz], vert: vec![0.0; nx * (nz + 1)] }
    }

    /// Net outflow per cell.
    pub fn divergence(&self, nx: usize, nz: usize) -> Vec<f64> {
        let mut d = vec![0.0; nx * nz];
        for j in 0..nz {
            for i in 0..nx {
                let c = i + nx * j;
                let im = (i + nx - 1) % nx;
                d[c] = self.horiz[c] - self.horiz[im + nx * j] + self.vert[i + nx * (j + 1)] - self.vert[i + nx * j];
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.horiz.iter().chain(self.vert.iter()).fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, s: f64) -> Fluxes {
        Fluxes { horiz: self.horiz.iter().map(|x| x * s).collect(), vert: self.vert.iter().map(|x| x * s).collect() }
    }

    pub fn add(&self, o: &Fluxes) -> Fluxes {
        Fluxes {
            horiz: self.horiz.iter().zip(o.horiz.iter()).map(|(a, b)| a + b).collect(),
            vert: self.vert.iter().zip(o.vert.iter()).map(|(a, b)| a + b).collect(),
        }
    }
}

/// Swept area per unit time of each horizontal mesh line between two meshes.
pub fn mesh_fluxes(old: &ColumnMesh, new: &ColumnMesh, dt: f64) -> Vec<f64> {
    let (nx, nz) = (old.nx, old.nz);
    let mut w = vec![0.0; nx * (nz + 1)];
    for jf in 0..=nz {
        for i in 0..nx {
            w[i + nx * jf] = old.hx() * (new.zf(i, jf) - old.zf(i, jf)) / dt;
        }
    }
    w
}

/// Two-point transmissibilities of the scalar Laplacian.
#[derive(Clone, Debug, PartialEq)]
pub struct Transmissibility {
    pub horiz: Vec<f64>,
    /// Interior faces only; boundary entries are zero.
    pub vert: Vec<f64>,
}

pub fn transmissibility(mesh: &ColumnMesh) -> Transmissibility {
    let (nx, nz) = (mesh.nx, mesh.nz);
    let hx = mesh.hx();
    let mut horiz = vec![0.0; nx * nz];
    let mut vert = vec![0.0; nx * (nz + 1)];
    for j in 0..nz {
        for i in 0..nx {
            horiz[i + nx * j] = mesh.vface_height(i, j) / hx;
        }
    }
    for jf in 1..nz {
        for i in 0..nx {
            let d = 0.5 * (mesh.dz(i, jf - 1) + mesh.dz(i, jf));
            vert[i + nx * jf] = hx / d;
        }
    }
    Transmissibility { horiz, vert }
}

impl Transmissibility {
    /// Visit every interior face as `(lower-or-left cell, other cell, weight)`.
    pub fn for_each(&self, nx: usize, nz: usize, mut f: impl FnMut(usize, usize, f64)) {
        for j in 0..nz {
            for i in 0..nx {
                f(i + nx * j, (i + 1) % nx + nx * j, self.horiz[i + nx * j]);
            }
        }
        for jf in 1..nz {
            for i in 0..nx {
                f(i + nx * (jf - 1), i + nx * jf, self.vert[i + nx * jf]);
            }
        }
    }

    /// `sum_f tau_f (u_a - u_b)(v_a - v_b)`.
    pub fn dirichlet_form(&self, nx: usize, nz: usize, u: &[f64], v: &[f64]) -> f64 {
        let mut s = 0.0;
        self.for_each(nx, nz, |a, b, t| s += t * (u[a] - u[b]) * (v[a] - v[b]));
        s
    }

    /// Net diffusive outflow `sum_f tau_f (u_c - u_nb)` per cell.
    pub fn apply(&self, nx: usize, nz: usize, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; nx * nz];
        self.for_each(nx, nz, |a, b, t| {
            let d = t * (u[a] - u[b]);
            out[a] += d;
            out[b] -= d;
        });
        out
    }
}

/// Tolerance for the discrete solenoidality and kinematic checks.
pub const FLUX_TOL: f64 = 1e-9;

/// One implicit step of `d_t(A u) + div((v - w) u) - eps Lap u = A s` on a
/// moving column mesh. Advection is upwind and fully implicit; diffusion is a
/// theta-scheme. Area changes come from the swept mesh fluxes, so constants
/// are preserved exactly.
pub struct TransportStep {
    nx: usize,
    nz: usize,
    dt: f64,
    eps: f64,
    theta: f64,
    area_old: Vec<f64>,
    area_new: Vec<f64>,
    trans_old: Transmissibility,
    pub trans_new: Transmissibility,
    lu: SparseLu,
}

impl TransportStep {
    pub fn new(old: &ColumnMesh, new: &ColumnMesh, fluxes: &Fluxes, eps: f64, theta: f64, dt: f64) -> Result<Self> {
        let (nx, nz) = (old.nx, old.nz);
        let w = mesh_fluxes(old, new, dt);
        let scale = 1.0 + fluxes.max_abs() + w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let div = fluxes.divergence(nx, nz);
        let worst = div.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if worst > FLUX_TOL * scale {
            return Err(Error::Diverged(format!("transport velocity not solenoidal: max cell divergence {worst:.3e}")));
        }
        for i in 0..nx {
            let k = i + nx * nz;
            if (fluxes.vert[k] - w[k]).abs() > FLUX_TOL * scale {
                return Err(Error::Diverged(format!(
                    "fluid flux through the shell ({:.6e}) differs from the shell motion ({:.6e}) in column {i}",
                    fluxes.vert[k], w[k]
                )));
            }
            if fluxes.vert[i].abs() > FLUX_TOL * scale {
                return Err(Error::Diverged("flux through the bottom wall".into()));
            }
        }
        let area_old = old.areas();
        let area_new = new.areas();
        let trans_old = transmissibility(old);
        let trans_new = transmissibility(new);
        let n = nx * nz;
        let mut b = TripletBuilder::square(n);
        for c in 0..n {
            b.add(c, c, area_new[c]);
        }
        let upwind = |b: &mut TripletBuilder, lo: usize, hi: usize, r: f64| {
            let (rp, rm) = (r.max(0.0), (-r).max(0.0));
            b.add(lo, lo, dt * rp);
            b.add(lo, hi, -dt * rm);
            b.add(hi, lo, -dt * rp);
            b.add(hi, hi, dt * rm);
        };
        for j in 0..nz {
            for i in 0..nx {
                upwind(&mut b, i + nx * j, (i + 1) % nx + nx * j, fluxes.horiz[i + nx * j]);
            }
        }
        for jf in 1..nz {
            for i in 0..nx {
                let k = i + nx * jf;
                upwind(&mut b, i + nx * (jf - 1), i + nx * jf, fluxes.vert[k] - w[k]);
            }
        }
        let s = dt * theta * eps;
        trans_new.for_each(nx, nz, |a, c, t| {
            b.add(a, a, s * t);
            b.add(a, c, -s * t);
            b.add(c, a, -s * t);
            b.add(c, c, s * t);
        });
        let lu = b.factor()?;
        Ok(TransportStep { nx, nz, dt, eps, theta, area_old, area_new, trans_old, trans_new, lu })
    }

    fn rhs(&self, u: &[f64], source: Option<&[f64]>) -> Vec<f64> {
        let mut r: Vec<f64> = u.iter().zip(self.area_old.iter()).map(|(x, a)| x * a).collect();
        if self.theta < 1.0 {
            let d = self.trans_old.apply(self.nx, self.nz, u);
            let s = self.dt * (1.0 - self.theta) * self.eps;
            for (ri, di) in r.iter_mut().zip(d.iter()) {
                *ri -= s * di;
            }
        }
        if let Some(src) = source {
            for (c, ri) in r.iter_mut().enumerate() {
                *ri += self.dt * self.area_new[c] * src[c];
            }
        }
        r
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.lu.solve(&self.rhs(u, None))
    }

    pub fn apply_with_source(&self, u: &[f64], source: &[f64]) -> Vec<f64> {
        self.lu.solve(&self.rhs(u, Some(source)))
    }

    pub fn apply_many(&self, cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let rhs: Vec<Vec<f64>> = cols.iter().map(|u| self.rhs(u, None)).collect();
        self.lu.solve_many(&rhs)
    }

    pub fn area_new(&self) -> &[f64] {
        &self.area_new
    }

    pub fn area_old(&self) -> &[f64] {
        &self.area_old
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Profile;

    fn breathing(nx: usize, amp: f64) -> Vec<f64> {
        (0..nx).map(|i| amp * (std::f64::consts::TAU * i as f64 / nx as f64).sin()).collect()
    }

    /// Mesh-following fluxes: vertical fluxes equal the swept areas and
    /// horizontal fluxes close each cell's balance.
    fn following(old: &ColumnMesh, new: &ColumnMesh, dt: f64) -> Fluxes {
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

    #[test]
    fn constants_preserved_on_moving_mesh() {
        let (nx, nz) = (8, 5);
        let old = ColumnMesh::new(nx, nz, 1.0, 1.0, 0.5, Profile::default(), &breathing(nx, 0.05));
        let new = ColumnMesh::new(nx, nz, 1.0, 1.0, 0.5, Profile::default(), &breathing(nx, 0.08));
        let dt = 0.01;
        let fl = following(&old, &new, dt);
        let st = TransportStep::new(&old, &new, &fl, 0.1, 1.0, dt).unwrap();
        let u = st.apply(&vec![2.5; nx * nz]);
        for x in u {
            assert!((x - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_solenoidal_flux() {
        let m = ColumnMesh::flat(4, 3, 1.0, 1.0, 0.5);
        let mut f = Fluxes::zero(4, 3);
        f.horiz[0] = 1.0;
        assert!(TransportStep::new(&m, &m, &f, 0.1, 1.0, 0.01).is_err());
    }
}
