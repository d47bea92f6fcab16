//! Staggered operators on the column mesh.
//!
//! The unknown vector `V` holds the volume fluxes through the vertical faces
//! (`i + nx j`, face between columns `i` and `i + 1`), the volume fluxes
//! through the interior horizontal mesh lines (`jf = 1..nz`), and in the slot
//! of the top line the normal velocity of the shell (its flux is `hx sigma`).
//! Physical velocity components `U` live at the same points: `u_x` at
//! vertical-face midpoints and `u_z` on the horizontal lines at column
//! centres. `U = T V` is invertible, so every quadratic form on `U` pulls back
//! to `V` without losing definiteness.

use crate::fokker_planck::xstep::Fluxes;
use crate::geometry::ColumnMesh;
use crate::linalg::{Csr, TripletBuilder};

/// Index arithmetic for the staggered unknowns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub nx: usize,
    pub nz: usize,
}

impl Layout {
    pub fn len(&self) -> usize {
        2 * self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ncells(&self) -> usize {
        self.nx * self.nz
    }

    /// Vertical face between columns `i` and `i + 1` in layer `j`.
    #[inline]
    pub fn f(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    /// Horizontal line `jf` (`1..=nz`) of column `i`; `jf = nz` is the shell.
    #[inline]
    pub fn w(&self, i: usize, jf: usize) -> usize {
        debug_assert!(jf >= 1 && jf <= self.nz);
        self.nx * self.nz + i + self.nx * (jf - 1)
    }

    #[inline]
    pub fn top(&self, i: usize) -> usize {
        self.w(i, self.nz)
    }

    #[inline]
    pub fn wrap(&self, i: isize) -> usize {
        i.rem_euclid(self.nx as isize) as usize
    }

    pub fn is_top(&self, k: usize) -> bool {
        k >= self.len() - self.nx
    }

    /// Shell velocities stored in `v`.
    pub fn shell_velocity<'a>(&self, v: &'a [f64]) -> &'a [f64] {
        &v[self.len() - self.nx..]
    }

    /// Face fluxes in the transport layout; the top line carries `hx sigma`.
    pub fn fluxes(&self, v: &[f64], hx: f64) -> Fluxes {
        let (nx, nz) = (self.nx, self.nz);
        let mut fl = Fluxes::zero(nx, nz);
        fl.horiz.copy_from_slice(&v[..nx * nz]);
        for jf in 1..=nz {
            for i in 0..nx {
                let s = if jf == nz { hx } else { 1.0 };
                fl.vert[i + nx * jf] = s * v[self.w(i, jf)];
            }
        }
        fl
    }

    /// Flux vector from a stream function on the mesh vertices,
    /// `psi[i * (nz + 1) + jf]` at the vertex right of column `i` on line `jf`.
    /// The bottom row must vanish.
    pub fn from_stream(&self, psi: &[f64], hx: f64) -> Vec<f64> {
        let (nx, nz) = (self.nx, self.nz);
        let at = |i: usize, jf: usize| psi[i * (nz + 1) + jf];
        let mut v = vec![0.0; self.len()];
        for j in 0..nz {
            for i in 0..nx {
                v[self.f(i, j)] = at(i, j + 1) - at(i, j);
            }
        }
        for jf in 1..=nz {
            for i in 0..nx {
                let im = self.wrap(i as isize - 1);
                let flux = at(im, jf) - at(i, jf);
                v[self.w(i, jf)] = if jf == nz { flux / hx } else { flux };
            }
        }
        v
    }

    /// Inverse of `from_stream` for solenoidal `v`; the stream function is
    /// pinned to zero on the bottom wall and at the vertex right of column 0
    /// on each line is found by accumulating the vertical-face fluxes.
    pub fn stream(&self, v: &[f64], hx: f64) -> Vec<f64> {
        let (nx, nz) = (self.nx, self.nz);
        let mut psi = vec![0.0; nx * (nz + 1)];
        for jf in 1..=nz {
            psi[jf] = psi[jf - 1] + v[self.f(0, jf - 1)];
            for i in 1..nx {
                let flux = if jf == nz { hx * v[self.w(i, jf)] } else { v[self.w(i, jf)] };
                psi[i * (nz + 1) + jf] = psi[(i - 1) * (nz + 1) + jf] - flux;
            }
        }
        psi
    }

    /// Flux divergence per cell, `ncells x len`.
    pub fn divergence(&self, hx: f64) -> Csr {
        let (nx, nz) = (self.nx, self.nz);
        let mut b = TripletBuilder::new(self.ncells(), self.len());
        for j in 0..nz {
            for i in 0..nx {
                let c = i + nx * j;
                b.add(c, self.f(i, j), 1.0);
                b.add(c, self.f(self.wrap(i as isize - 1), j), -1.0);
                b.add(c, self.w(i, j + 1), if j + 1 == nz { hx } else { 1.0 });
                if j > 0 {
                    b.add(c, self.w(i, j), -1.0);
                }
            }
        }
        b.to_csr()
    }
}

/// Weights of the derivative at `x` of the quadratic through three points.
fn deriv3(xs: [f64; 3], x: f64) -> [f64; 3] {
    let mut w = [0.0; 3];
    for k in 0..3 {
        let (a, b) = ((k + 1) % 3, (k + 2) % 3);
        let den = (xs[k] - xs[a]) * (xs[k] - xs[b]);
        w[k] = ((x - xs[a]) + (x - xs[b])) / den;
    }
    w
}

/// A stencil entry: an unknown index, or `None` for a no-slip wall value.
type Node = Option<usize>;

fn push(rows: &mut Vec<(usize, usize, f64)>, r: usize, n: Node, v: f64) {
    if let Some(k) = n {
        if v != 0.0 {
            rows.push((r, k, v));
        }
    }
}

/// Geometry-dependent operators of one mesh.
#[derive(Clone, Debug)]
pub struct StaggeredOps {
    pub layout: Layout,
    pub hx: f64,
    /// `U = T V`.
    pub t: Csr,
    /// Lumped mass of each velocity point.
    pub mass: Vec<f64>,
    pub pos: Vec<[f64; 2]>,
    /// Viscous graph Laplacian on `U` with no-slip walls (symmetric positive definite).
    pub lap: Csr,
    /// Physical `d/dx` and `d/dz` at every velocity point, acting on `U`.
    pub ddx: Csr,
    pub ddz: Csr,
    /// `u_x` and `u_z` interpolated to every velocity point, acting on `U`.
    pub ix: Csr,
    pub iz: Csr,
    /// Cell-centre velocity gradient, rows `4 c + 2 a + b` for `d u_a / d x_b`, acting on `U`.
    pub grad: Csr,
    pub div: Csr,
    pub areas: Vec<f64>,
}

impl StaggeredOps {
    pub fn new(mesh: &ColumnMesh) -> Self {
        let lay = Layout { nx: mesh.nx, nz: mesh.nz };
        let (nx, nz) = (lay.nx, lay.nz);
        let n = lay.len();
        let hx = mesh.hx();
        let hz = mesh.hz();
        let zc = |i: usize, j: usize| mesh.center(i, j)[1];
        let wrap = |i: isize| lay.wrap(i);

        // point positions and masses
        let mut pos = vec![[0.0; 2]; n];
        let mut mass = vec![0.0; n];
        for j in 0..nz {
            for i in 0..nx {
                let k = lay.f(i, j);
                pos[k] = [(i as f64 + 0.5) * hx, 0.5 * (zc(i, j) + zc(wrap(i as isize + 1), j))];
                mass[k] = hx * mesh.vface_height(i, j);
            }
        }
        let ext = |i: usize, jf: usize| {
            if jf == nz {
                0.5 * mesh.dz(i, nz - 1)
            } else {
                0.5 * (mesh.dz(i, jf - 1) + mesh.dz(i, jf))
            }
        };
        for jf in 1..=nz {
            for i in 0..nx {
                let k = lay.w(i, jf);
                pos[k] = [i as f64 * hx, mesh.zf(i, jf)];
                mass[k] = hx * ext(i, jf);
            }
        }

        // U = T V
        let mut tt = Vec::new();
        for j in 0..nz {
            for i in 0..nx {
                let k = lay.f(i, j);
                tt.push((k, k, 1.0 / mesh.vface_height(i, j)));
            }
        }
        for jf in 1..=nz {
            for i in 0..nx {
                let k = lay.w(i, jf);
                if jf == nz {
                    tt.push((k, k, 1.0));
                    continue;
                }
                tt.push((k, k, 1.0 / hx));
                let s = mesh.slope(i, jf as f64 * hz);
                for (ii, jj) in [(wrap(i as isize - 1), jf - 1), (i, jf - 1), (wrap(i as isize - 1), jf), (i, jf)] {
                    tt.push((k, lay.f(ii, jj), 0.25 * s / mesh.vface_height(ii, jj)));
                }
            }
        }
        let t = Csr::from_triplets(n, n, &tt);

        // viscous Laplacian from edges and wall links
        let mut lt = Vec::new();
        let mut edge = |a: usize, b: Node, tau: f64| {
            lt.push((a, a, tau));
            if let Some(b) = b {
                lt.push((b, b, tau));
                lt.push((a, b, -tau));
                lt.push((b, a, -tau));
            }
        };
        for j in 0..nz {
            for i in 0..nx {
                let ip = wrap(i as isize + 1);
                let k = lay.f(i, j);
                edge(k, Some(lay.f(ip, j)), mesh.dz(ip, j) / hx);
                if j + 1 < nz {
                    let kk = lay.f(i, j + 1);
                    edge(k, Some(kk), hx / (pos[kk][1] - pos[k][1]));
                }
                if j == 0 {
                    edge(k, None, hx / pos[k][1]);
                }
                if j + 1 == nz {
                    let lid = 0.5 * (mesh.zf(i, nz) + mesh.zf(ip, nz));
                    edge(k, None, hx / (lid - pos[k][1]));
                }
            }
        }
        for jf in 1..=nz {
            for i in 0..nx {
                let ip = wrap(i as isize + 1);
                let k = lay.w(i, jf);
                edge(k, Some(lay.w(ip, jf)), 0.5 * (ext(i, jf) + ext(ip, jf)) / hx);
                if jf < nz {
                    edge(k, Some(lay.w(i, jf + 1)), hx / mesh.dz(i, jf));
                }
                if jf == 1 {
                    edge(k, None, hx / mesh.dz(i, 0));
                }
            }
        }
        let lap = Csr::from_triplets(n, n, &lt);

        // vertical stencils: the u_x column of face i in layers 0..nz with walls
        // at both ends, and the u_z column of column i on lines 0..=nz
        let ux_node = |i: usize, j: isize| -> (Node, f64) {
            let ip = wrap(i as isize + 1);
            if j < 0 {
                (None, 0.0)
            } else if j as usize >= nz {
                (None, 0.5 * (mesh.zf(i, nz) + mesh.zf(ip, nz)))
            } else {
                let k = lay.f(i, j as usize);
                (Some(k), pos[k][1])
            }
        };
        let uz_node = |i: usize, l: usize| -> (Node, f64) {
            if l == 0 {
                (None, mesh.zf(i, 0))
            } else {
                (Some(lay.w(i, l)), mesh.zf(i, l))
            }
        };

        let mut dxt = Vec::new();
        let mut dzt = Vec::new();
        let mut ixt = Vec::new();
        let mut izt = Vec::new();
        for j in 0..nz {
            for i in 0..nx {
                let k = lay.f(i, j);
                let (a, za) = ux_node(i, j as isize - 1);
                let (b, zb) = ux_node(i, j as isize + 1);
                let w = deriv3([za, pos[k][1], zb], pos[k][1]);
                let dz_row = [(a, w[0]), (Some(k), w[1]), (b, w[2])];
                for &(nd, c) in &dz_row {
                    push(&mut dzt, k, nd, c);
                }
                let ip = wrap(i as isize + 1);
                let s = (zc(ip, j) - zc(i, j)) / hx;
                push(&mut dxt, k, Some(lay.f(ip, j)), 0.5 / hx);
                push(&mut dxt, k, Some(lay.f(wrap(i as isize - 1), j)), -0.5 / hx);
                for &(nd, c) in &dz_row {
                    push(&mut dxt, k, nd, -s * c);
                }
                ixt.push((k, k, 1.0));
                for (ii, l) in [(i, j), (i, j + 1), (ip, j), (ip, j + 1)] {
                    push(&mut izt, k, uz_node(ii, l).0, 0.25);
                }
            }
        }
        for jf in 1..=nz {
            for i in 0..nx {
                let k = lay.w(i, jf);
                let pts = if jf < nz {
                    [jf - 1, jf, jf + 1]
                } else if nz >= 2 {
                    [nz - 2, nz - 1, nz]
                } else {
                    [0, 0, 1]
                };
                let dz_row: Vec<(Node, f64)> = if nz == 1 {
                    let d = mesh.dz(i, 0);
                    vec![(Some(k), 1.0 / d)]
                } else {
                    let nodes: Vec<(Node, f64)> = pts.iter().map(|&l| uz_node(i, l)).collect();
                    let w = deriv3([nodes[0].1, nodes[1].1, nodes[2].1], pos[k][1]);
                    (0..3).map(|m| (nodes[m].0, w[m])).collect()
                };
                for &(nd, c) in &dz_row {
                    push(&mut dzt, k, nd, c);
                }
                let s = mesh.slope(i, jf as f64 * hz);
                push(&mut dxt, k, Some(lay.w(wrap(i as isize + 1), jf)), 0.5 / hx);
                push(&mut dxt, k, Some(lay.w(wrap(i as isize - 1), jf)), -0.5 / hx);
                for &(nd, c) in &dz_row {
                    push(&mut dxt, k, nd, -s * c);
                }
                izt.push((k, k, 1.0));
                if jf < nz {
                    let im = wrap(i as isize - 1);
                    for (ii, jj) in [(im, jf - 1), (i, jf - 1), (im, jf), (i, jf)] {
                        ixt.push((k, lay.f(ii, jj), 0.25));
                    }
                }
            }
        }
        let ddx = Csr::from_triplets(n, n, &dxt);
        let ddz = Csr::from_triplets(n, n, &dzt);
        let ix = Csr::from_triplets(n, n, &ixt);
        let iz = Csr::from_triplets(n, n, &izt);

        // cell gradients
        let mut gt = Vec::new();
        for j in 0..nz {
            for i in 0..nx {
                let c = i + nx * j;
                let im = wrap(i as isize - 1);
                let ip = wrap(i as isize + 1);
                let s = mesh.slope(i, (j as f64 + 0.5) * hz);
                let dz = mesh.dz(i, j);
                // d u_x / d z: mean of the two face stencils
                let mut duxdz = Vec::new();
                for f in [lay.f(im, j), lay.f(i, j)] {
                    for (col, v) in ddz.row(f) {
                        duxdz.push((col, 0.5 * v));
                    }
                }
                // d u_z / d z across the cell
                let duzdz = [(uz_node(i, j + 1).0, 1.0 / dz), (uz_node(i, j).0, -1.0 / dz)];
                // d u_x / d x
                gt.push((4 * c, lay.f(i, j), 1.0 / hx));
                gt.push((4 * c, lay.f(im, j), -1.0 / hx));
                for &(col, v) in &duxdz {
                    gt.push((4 * c, col, -s * v));
                }
                for &(col, v) in &duxdz {
                    gt.push((4 * c + 1, col, v));
                }
                // d u_z / d x: mean of the central differences on both lines
                for l in [j, j + 1] {
                    push(&mut gt, 4 * c + 2, uz_node(ip, l).0, 0.25 / hx);
                    push(&mut gt, 4 * c + 2, uz_node(im, l).0, -0.25 / hx);
                }
                for &(nd, v) in &duzdz {
                    push(&mut gt, 4 * c + 2, nd, -s * v);
                    push(&mut gt, 4 * c + 3, nd, v);
                }
            }
        }
        let grad = Csr::from_triplets(4 * lay.ncells(), n, &gt);

        StaggeredOps { layout: lay, hx, t, mass, pos, lap, ddx, ddz, ix, iz, grad, div: lay.divergence(hx), areas: mesh.areas() }
    }

    pub fn velocity(&self, v: &[f64]) -> Vec<f64> {
        self.t.mul(v)
    }

    /// `1/2 U . m U`.
    pub fn kinetic_energy(&self, v: &[f64]) -> f64 {
        let u = self.velocity(v);
        0.5 * u.iter().zip(self.mass.iter()).map(|(x, m)| m * x * x).sum::<f64>()
    }

    /// Mass matrix on `V`.
    pub fn mass_matrix(&self) -> Csr {
        self.t.transpose().matmul(&self.t.scale_rows(&self.mass))
    }

    /// Convecting components `(b_x, b_z)` at every velocity point.
    pub fn advecting_components(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let u = self.velocity(v);
        (self.ix.mul(&u), self.iz.mul(&u))
    }

    /// Skew-symmetrized convection on `U`:
    /// `1/2 (B - B^T)` with `B = diag(m) (diag(b_x) d/dx + diag(b_z) d/dz)`.
    pub fn convection(&self, bx: &[f64], bz: &[f64]) -> Csr {
        let wx: Vec<f64> = bx.iter().zip(self.mass.iter()).map(|(b, m)| b * m).collect();
        let wz: Vec<f64> = bz.iter().zip(self.mass.iter()).map(|(b, m)| b * m).collect();
        let b = self.ddx.scale_rows(&wx).axpby(1.0, &self.ddz.scale_rows(&wz), 1.0);
        b.axpby(0.5, &b.transpose(), -0.5)
    }

    /// Per-cell velocity gradients `[[du_x/dx, du_x/dz], [du_z/dx, du_z/dz]]`.
    pub fn gradients(&self, v: &[f64]) -> Vec<[[f64; 2]; 2]> {
        let g = self.grad.mul(&self.velocity(v));
        g.chunks(4).map(|c| [[c[0], c[1]], [c[2], c[3]]]).collect()
    }

    /// Generalized force of a per-cell stress `tau`: `-(G T)^T (A tau)`, the
    /// vector whose product with `V` is `-sum_c A_c tau_c : grad u_c`.
    pub fn stress_force(&self, tau: &[[[f64; 2]; 2]]) -> Vec<f64> {
        let mut w = vec![0.0; 4 * tau.len()];
        for (c, t) in tau.iter().enumerate() {
            for a in 0..2 {
                for b in 0..2 {
                    w[4 * c + 2 * a + b] = -self.areas[c] * t[a][b];
                }
            }
        }
        self.t.mul_t(&self.grad.mul_t(&w))
    }

    /// Generalized force of a body force density sampled at the velocity points.
    pub fn body_force(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let lay = self.layout;
        let mut fu = vec![0.0; lay.len()];
        for (k, p) in self.pos.iter().enumerate() {
            let comp = if k < lay.ncells() { 0 } else { 1 };
            fu[k] = self.mass[k] * f(*p)[comp];
        }
        self.t.mul_t(&fu)
    }

    /// Sample an analytic velocity field at the velocity points (component-wise).
    pub fn sample(&self, u: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let nc = self.layout.ncells();
        self.pos.iter().enumerate().map(|(k, p)| u(*p)[if k < nc { 0 } else { 1 }]).collect()
    }

    /// `mu U . L U`.
    pub fn dissipation_rate(&self, v: &[f64], mu: f64) -> f64 {
        let u = self.velocity(v);
        mu * self.lap.bilinear(&u, &u)
    }

    /// Largest cell divergence per unit area.
    pub fn max_divergence(&self, v: &[f64]) -> f64 {
        self.div.mul(v).iter().zip(self.areas.iter()).fold(0.0f64, |m, (d, a)| m.max((d / a).abs()))
    }
}
