//! Koiter energy on the periodic shell grid and its exact discrete gradient.
//!
//! Derivatives of `eta` are periodic central differences; the pointwise
//! energy density is a function of `(eta, d1, d2, d11, d12, d22)` and is
//! differentiated with `Dual<6>`. The gradient is `sum_k D_k^T g_k`, so it
//! is the gradient of the discrete energy to round-off.

use crate::ad::{Dual, Scalar};
use crate::error::{Error, Result};
use crate::geometry::{check_admissible, curvature_change, metric_change, Frame, ReferenceShell};
use crate::quad::gauss_legendre_on;

/// Periodic central-difference operators on an `n1 x n2` grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdOps {
    pub n1: usize,
    pub n2: usize,
    pub h1: f64,
    pub h2: f64,
}

impl FdOps {
    fn idx(&self, a: isize, b: isize) -> usize {
        a.rem_euclid(self.n1 as isize) as usize + self.n1 * b.rem_euclid(self.n2 as isize) as usize
    }

    fn map(&self, u: &[f64], f: impl Fn(&dyn Fn(isize, isize) -> f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n1 * self.n2];
        for b in 0..self.n2 as isize {
            for a in 0..self.n1 as isize {
                let at = |da: isize, db: isize| u[self.idx(a + da, b + db)];
                out[self.idx(a, b)] = f(&at);
            }
        }
        out
    }

    pub fn d1(&self, u: &[f64]) -> Vec<f64> {
        let s = 0.5 / self.h1;
        self.map(u, |at| s * (at(1, 0) - at(-1, 0)))
    }

    pub fn d2(&self, u: &[f64]) -> Vec<f64> {
        let s = 0.5 / self.h2;
        self.map(u, |at| s * (at(0, 1) - at(0, -1)))
    }

    pub fn d11(&self, u: &[f64]) -> Vec<f64> {
        let s = 1.0 / (self.h1 * self.h1);
        self.map(u, |at| s * (at(1, 0) - 2.0 * at(0, 0) + at(-1, 0)))
    }

    pub fn d22(&self, u: &[f64]) -> Vec<f64> {
        let s = 1.0 / (self.h2 * self.h2);
        self.map(u, |at| s * (at(0, 1) - 2.0 * at(0, 0) + at(0, -1)))
    }

    pub fn d12(&self, u: &[f64]) -> Vec<f64> {
        self.d1(&self.d2(u))
    }

    /// `[u, D1 u, D2 u, D11 u, D12 u, D22 u]`.
    pub fn jets(&self, u: &[f64]) -> [Vec<f64>; 6] {
        [u.to_vec(), self.d1(u), self.d2(u), self.d11(u), self.d12(u), self.d22(u)]
    }

    /// `sum_k D_k^T g_k` for the six jet components. The first-order
    /// operators are antisymmetric and the second-order ones symmetric.
    pub fn transpose_sum(&self, g: &[Vec<f64>; 6]) -> Vec<f64> {
        let mut out = g[0].clone();
        let terms = [
            self.d1(&g[1]).into_iter().map(|x| -x).collect::<Vec<_>>(),
            self.d2(&g[2]).into_iter().map(|x| -x).collect(),
            self.d11(&g[3]),
            self.d12(&g[4]),
            self.d22(&g[5]),
        ];
        for t in terms.iter() {
            for (o, v) in out.iter_mut().zip(t.iter()) {
                *o += v;
            }
        }
        out
    }

    /// Fourier symbols of `(D11, D12, D22)` as real numbers: `-s11`, `-s12`, `-s22`
    /// where `s` is the positive semidefinite symbol of `-D_ij` (D12 has symbol `-sin sin`).
    pub fn second_symbols(&self, k1: f64, k2: f64, p1: f64, p2: f64) -> (f64, f64, f64) {
        let tau = std::f64::consts::TAU;
        let (w1, w2) = (tau * k1 / p1 * self.h1, tau * k2 / p2 * self.h2);
        let s11 = (2.0 - 2.0 * w1.cos()) / (self.h1 * self.h1);
        let s22 = if self.n2 > 1 { (2.0 - 2.0 * w2.cos()) / (self.h2 * self.h2) } else { 0.0 };
        let s12 = if self.n2 > 1 { w1.sin() * w2.sin() / (self.h1 * self.h2) } else { 0.0 };
        (s11, s12, s22)
    }
}

#[derive(Clone, Debug)]
pub struct KoiterModel {
    pub shell: ReferenceShell,
    pub lame_lambda: f64,
    pub lame_mu: f64,
    /// Half-thickness.
    pub eps0: f64,
    /// Quadrature weights of the surface measure (sum to one).
    pub weights: Vec<f64>,
    pub ops: FdOps,
    ainv: Vec<[[f64; 2]; 2]>,
}

pub type Tensor4 = [[[[f64; 2]; 2]; 2]; 2];

impl KoiterModel {
    pub fn new(shell: ReferenceShell, lame_lambda: f64, lame_mu: f64, eps0: f64, weighted: bool) -> Result<Self> {
        if !(lame_mu > 0.0 && lame_lambda >= 0.0 && eps0 > 0.0) {
            return Err(Error::Config(format!("need mu > 0, lambda >= 0, eps0 > 0 (got {lame_mu}, {lame_lambda}, {eps0})")));
        }
        let n = shell.len();
        let weights = if weighted {
            let tot: f64 = shell.frames.iter().map(|f| f.area).sum();
            shell.frames.iter().map(|f| f.area / tot).collect()
        } else {
            vec![1.0 / n as f64; n]
        };
        let h = shell.spacing();
        let ops = FdOps { n1: shell.n1, n2: shell.n2, h1: h[0], h2: h[1] };
        let ainv = shell.frames.iter().map(Frame::inverse_metric).collect();
        Ok(KoiterModel { shell, lame_lambda, lame_mu, eps0, weights, ops, ainv })
    }

    fn alpha(&self) -> f64 {
        4.0 * self.lame_lambda * self.lame_mu / (self.lame_lambda + 2.0 * self.lame_mu)
    }

    /// Contravariant elasticity tensor at a node.
    pub fn elasticity(&self, node: usize) -> Tensor4 {
        let a = &self.ainv[node];
        let (al, mu) = (self.alpha(), self.lame_mu);
        let mut c = [[[[0.0; 2]; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        c[i][j][k][l] = al * a[i][j] * a[k][l] + 2.0 * mu * (a[i][k] * a[j][l] + a[i][l] * a[j][k]);
                    }
                }
            }
        }
        c
    }

    /// `C : A (x) A = alpha (a^ij A_ij)^2 + 4 mu a^ik a^jl A_ij A_kl` for symmetric `A`.
    fn contract<S: Scalar>(&self, node: usize, m: &[[S; 2]; 2]) -> S {
        let a = &self.ainv[node];
        let mut tr = S::cst(0.0);
        for i in 0..2 {
            for j in 0..2 {
                tr = tr + m[i][j].scale(a[i][j]);
            }
        }
        let mut sq = S::cst(0.0);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        sq = sq + (m[i][j] * m[k][l]).scale(a[i][k] * a[j][l]);
                    }
                }
            }
        }
        tr * tr.scale(self.alpha()) + sq.scale(4.0 * self.lame_mu)
    }

    /// Pointwise energy density from the six jet values.
    pub fn density<S: Scalar>(&self, node: usize, j: [S; 6]) -> S {
        let f = &self.shell.frames[node];
        let g = metric_change(f, j[0], [j[1], j[2]]);
        let r = curvature_change(f, j[0], [j[1], j[2]], [[j[3], j[4]], [j[4], j[5]]]);
        let e = self.eps0;
        self.contract(node, &g).scale(0.5 * e) + self.contract(node, &r).scale(e * e * e / 6.0)
    }

    fn check(&self, eta: &[f64]) -> Result<()> {
        let rep = check_admissible(&self.shell, eta);
        match rep.reason {
            Some(r) => Err(Error::Admissibility(r)),
            None => Ok(()),
        }
    }

    pub fn energy_unchecked(&self, eta: &[f64]) -> f64 {
        let jets = self.ops.jets(eta);
        (0..eta.len())
            .map(|n| {
                let j = [jets[0][n], jets[1][n], jets[2][n], jets[3][n], jets[4][n], jets[5][n]];
                self.weights[n] * self.density(n, j)
            })
            .sum()
    }

    pub fn energy(&self, eta: &[f64]) -> Result<f64> {
        self.check(eta)?;
        Ok(self.energy_unchecked(eta))
    }

    /// L2 gradient with respect to the weighted inner product `sum_n w_n a_n b_n`.
    pub fn gradient_unchecked(&self, eta: &[f64]) -> Vec<f64> {
        let n = eta.len();
        let jets = self.ops.jets(eta);
        let mut g: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; n]);
        for node in 0..n {
            let j: [Dual<6>; 6] = std::array::from_fn(|k| Dual::var(jets[k][node], k));
            let d = self.density(node, j);
            for k in 0..6 {
                g[k][node] = self.weights[node] * d.d[k];
            }
        }
        let mut out = self.ops.transpose_sum(&g);
        for (o, w) in out.iter_mut().zip(self.weights.iter()) {
            *o /= w;
        }
        out
    }

    pub fn gradient(&self, eta: &[f64]) -> Result<Vec<f64>> {
        self.check(eta)?;
        Ok(self.gradient_unchecked(eta))
    }

    /// Averaged-vector-field discrete gradient `int_0^1 K'(a + s (b - a)) ds`.
    /// Three Gauss points integrate it exactly because the density is a
    /// polynomial of degree six in the jets.
    pub fn avf_gradient(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len()];
        for (s, w) in gauss_legendre_on(3, 0.0, 1.0) {
            let x: Vec<f64> = a.iter().zip(b.iter()).map(|(p, q)| p + s * (q - p)).collect();
            for (o, g) in out.iter_mut().zip(self.gradient_unchecked(&x).iter()) {
                *o += w * g;
            }
        }
        out
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights.iter().zip(a.iter().zip(b.iter())).map(|(w, (x, y))| w * x * y).sum()
    }

    /// Fourier symbol of the bending part of the Hessian at `eta = 0` for a
    /// flat sheet, with the grid's own difference symbols. Used as a
    /// preconditioner by the time steppers.
    pub fn bending_symbol(&self, k1: f64, k2: f64) -> f64 {
        let (s11, s12, s22) = self.ops.second_symbols(k1, k2, self.shell.period[0], self.shell.period[1]);
        let e = self.eps0;
        let tr = s11 + s22;
        let sq = s11 * s11 + 2.0 * s12 * s12 + s22 * s22;
        e * e * e / 3.0 * (self.alpha() * tr * tr + 4.0 * self.lame_mu * sq)
    }

    /// Smallest eigenvalue of the contraction `C : G (x) G` over symmetric `G`
    /// with unit Frobenius norm, minimized over nodes.
    pub fn positivity_constant(&self) -> f64 {
        let mut c0 = f64::INFINITY;
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let basis = [[[1.0, 0.0], [0.0, 0.0]], [[0.0, s], [s, 0.0]], [[0.0, 0.0], [0.0, 1.0]]];
        for node in 0..self.shell.len() {
            let mut m = vec![vec![0.0; 3]; 3];
            for p in 0..3 {
                for q in 0..3 {
                    let sum: [[f64; 2]; 2] = std::array::from_fn(|i| std::array::from_fn(|j| basis[p][i][j] + basis[q][i][j]));
                    let dif: [[f64; 2]; 2] = std::array::from_fn(|i| std::array::from_fn(|j| basis[p][i][j] - basis[q][i][j]));
                    m[p][q] = 0.25 * (self.contract::<f64>(node, &sum) - self.contract::<f64>(node, &dif));
                }
            }
            c0 = c0.min(crate::linalg::symmetric_eigenvalues(&m)[0]);
        }
        c0
    }
}
