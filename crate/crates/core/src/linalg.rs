//! Thin wrappers over faer's sparse and dense LU, plus a CSR matrix for
//! products and transposed products.

use crate::error::{Error, Result};
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

/// Triplet accumulator; duplicate entries are summed.
#[derive(Clone, Debug, Default)]
pub struct TripletBuilder {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder { nrows, ncols, entries: Vec::new() }
    }

    pub fn square(n: usize) -> Self {
        Self::new(n, n)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    /// Add a dense block `scale * b` at offset `(r0, c0)`.
    pub fn add_dense(&mut self, r0: usize, c0: usize, b: &[Vec<f64>], scale: f64) {
        for (i, row) in b.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                self.add(r0 + i, c0 + j, scale * v);
            }
        }
    }

    pub fn to_csr(&self) -> Csr {
        Csr::from_triplets(self.nrows, self.ncols, &self.entries)
    }

    pub fn factor(&self) -> Result<SparseLu> {
        SparseLu::new(self)
    }
}

/// Compressed sparse row matrix (duplicates merged, rows sorted).
#[derive(Clone, Debug)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub ptr: Vec<usize>,
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    pub fn from_triplets(nrows: usize, ncols: usize, t: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = t.to_vec();
        sorted.sort_by_key(|a| (a.0, a.1));
        let mut ptr = vec![0usize; nrows + 1];
        let mut idx = Vec::with_capacity(sorted.len());
        let mut val: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &sorted {
            if last == Some((i, j)) {
                *val.last_mut().unwrap() += v;
            } else {
                idx.push(j);
                val.push(v);
                ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            ptr[i + 1] += ptr[i];
        }
        Csr { nrows, ncols, ptr, idx, val }
    }

    pub fn identity(n: usize) -> Self {
        Csr { nrows: n, ncols: n, ptr: (0..=n).collect(), idx: (0..n).collect(), val: vec![1.0; n] }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let mut s = 0.0;
            for k in self.ptr[i]..self.ptr[i + 1] {
                s += self.val[k] * x[self.idx[k]];
            }
            y[i] = s;
        }
        y
    }

    pub fn mul_t(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            let xi = x[i];
            for k in self.ptr[i]..self.ptr[i + 1] {
                y[self.idx[k]] += self.val[k] * xi;
            }
        }
        y
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.ptr[i]..self.ptr[i + 1]).map(move |k| (self.idx[k], self.val[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).filter(|(c, _)| *c == j).map(|(_, v)| v).sum()
    }

    pub fn to_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.val.len());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push((i, j, v));
            }
        }
        t
    }

    pub fn transpose(&self) -> Csr {
        let t: Vec<(usize, usize, f64)> = self.to_triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Csr::from_triplets(self.ncols, self.nrows, &t)
    }

    /// Sparse product `self * b`.
    pub fn matmul(&self, b: &Csr) -> Csr {
        assert_eq!(self.ncols, b.nrows);
        let mut acc = vec![0.0; b.ncols];
        let mut mark = vec![usize::MAX; b.ncols];
        let mut ptr = vec![0usize; self.nrows + 1];
        let (mut idx, mut val) = (Vec::new(), Vec::new());
        for i in 0..self.nrows {
            let start = idx.len();
            for (k, a) in self.row(i) {
                for (j, v) in b.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        idx.push(j);
                    }
                    acc[j] += a * v;
                }
            }
            idx[start..].sort_unstable();
            for &j in &idx[start..] {
                val.push(acc[j]);
            }
            ptr[i + 1] = idx.len();
        }
        Csr { nrows: self.nrows, ncols: b.ncols, ptr, idx, val }
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Csr {
        let mut out = self.clone();
        for i in 0..self.nrows {
            for k in self.ptr[i]..self.ptr[i + 1] {
                out.val[k] *= d[i];
            }
        }
        out
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &Csr, b: f64) -> Csr {
        let mut t: Vec<(usize, usize, f64)> = self.to_triplets().into_iter().map(|(i, j, v)| (i, j, a * v)).collect();
        t.extend(other.to_triplets().into_iter().map(|(i, j, v)| (i, j, b * v)));
        Csr::from_triplets(self.nrows, self.ncols, &t)
    }

    /// Quadratic form x^T A y.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.mul(y);
        x.iter().zip(ay.iter()).map(|(a, b)| a * b).sum()
    }
}

pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SparseLu(n={})", self.n)
    }
}

impl SparseLu {
    pub fn new(b: &TripletBuilder) -> Result<Self> {
        assert_eq!(b.nrows, b.ncols);
        let trips: Vec<Triplet<usize, usize, f64>> = b.entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(b.nrows, b.ncols, &trips)
            .map_err(|e| Error::Diverged(format!("sparse assembly failed: {e:?}")))?;
        let lu = a.sp_lu().map_err(|e| Error::Diverged(format!("sparse LU failed: {e:?}")))?;
        Ok(SparseLu { n: b.nrows, lu })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let mut m = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        self.lu.solve_in_place(m.as_mut());
        (0..self.n).map(|i| m[(i, 0)]).collect()
    }

    /// Solve for several right-hand sides stored column by column.
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        if rhs.is_empty() {
            return Vec::new();
        }
        let k = rhs.len();
        let mut m = Mat::<f64>::from_fn(self.n, k, |i, j| rhs[j][i]);
        self.lu.solve_in_place(m.as_mut());
        (0..k).map(|j| (0..self.n).map(|i| m[(i, j)]).collect()).collect()
    }
}

/// Dense LU with partial pivoting.
pub struct DenseLu {
    n: usize,
    lu: faer::linalg::solvers::PartialPivLu<f64>,
}

impl DenseLu {
    pub fn new(a: &[Vec<f64>]) -> Self {
        let n = a.len();
        let m = Mat::<f64>::from_fn(n, n, |i, j| a[i][j]);
        DenseLu { n, lu: m.partial_piv_lu() }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut m = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        self.lu.solve_in_place(m.as_mut());
        (0..self.n).map(|i| m[(i, 0)]).collect()
    }
}

/// Symmetric eigenvalues of a small dense matrix, ascending.
pub fn symmetric_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let m = Mat::<f64>::from_fn(n, n, |i, j| a[i][j]);
    let mut ev: Vec<f64> = m.self_adjoint_eigenvalues(faer::Side::Lower).expect("symmetric eigenvalue solve");
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_lu_solves_tridiagonal() {
        let n = 10;
        let mut b = TripletBuilder::square(n);
        for i in 0..n {
            b.add(i, i, 4.0);
            if i > 0 {
                b.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                b.add(i, i + 1, -2.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.3 - 1.0).collect();
        let rhs = b.to_csr().mul(&x);
        let y = b.factor().unwrap().solve(&rhs);
        for (a, c) in x.iter().zip(y.iter()) {
            assert!((a - c).abs() < 1e-13);
        }
        let many = b.factor().unwrap().solve_many(&[rhs.clone(), rhs]);
        assert!((many[1][3] - x[3]).abs() < 1e-13);
    }

    #[test]
    fn csr_transpose_product() {
        let t = vec![(0, 1, 2.0), (1, 0, 3.0), (0, 1, 1.0), (2, 2, 5.0)];
        let a = Csr::from_triplets(3, 3, &t);
        let x = [1.0, 2.0, 3.0];
        let y = [0.5, -1.0, 2.0];
        let lhs = dot(&a.mul(&x), &y);
        let rhs = dot(&x, &a.mul_t(&y));
        assert!((lhs - rhs).abs() < 1e-14);
        assert_eq!(a.get(0, 1), 3.0);
    }

    #[test]
    fn dense_lu_and_eigen() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = DenseLu::new(&a).solve(&[3.0, 4.0]);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        let ev = symmetric_eigenvalues(&a);
        let disc = (1.0f64 + 4.0).sqrt();
        assert!((ev[0] - (5.0 - disc) / 2.0).abs() < 1e-13);
    }
}
