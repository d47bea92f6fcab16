//! Regularization of the velocity and the shell by compactly supported
//! mollifiers.
//!
//! Space: the periodic direction is mollified spectrally with the exact
//! Fourier symbol of a bump of half-width `delta` (so the operator is the
//! convolution of the trigonometric interpolant with the bump). Velocities
//! are mollified through their stream function, which keeps them exactly
//! solenoidal with no flux through the bottom; the vertical direction gets a
//! nonnegative three-point kernel on interior lines only.
//! Time: a discrete bump over step indices with even reflection at the ends
//! of the trajectory.

use crate::error::{Error, Result};
use crate::fluid::Layout;
use crate::linalg::Csr;
use crate::quad::gauss_legendre_on;
use crate::spectral::Fft2;
use std::f64::consts::TAU;

fn bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// Normalized Fourier transform of the unit bump, `int phi(s) cos(w s) ds / int phi`.
pub fn bump_symbol(w: f64) -> f64 {
    let nodes = gauss_legendre_on(64, -1.0, 1.0);
    let mass: f64 = nodes.iter().map(|(s, q)| q * bump(*s)).sum();
    nodes.iter().map(|(s, q)| q * bump(*s) * (w * s).cos()).sum::<f64>() / mass
}

/// Variance `int s^2 phi / int phi` of the unit bump.
pub fn bump_variance() -> f64 {
    let nodes = gauss_legendre_on(64, -1.0, 1.0);
    let mass: f64 = nodes.iter().map(|(s, q)| q * bump(*s)).sum();
    nodes.iter().map(|(s, q)| q * bump(*s) * s * s).sum::<f64>() / mass
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularizationKernel {
    pub rho: f64,
    /// Half-width of the temporal kernel.
    pub temporal: f64,
    /// Half-width of the spatial velocity kernel.
    pub spatial: f64,
    /// Half-width of the kernel on the shell.
    pub shell: f64,
}

impl RegularizationKernel {
    /// Widths tied to the parameter: `rho` in time and `sqrt(rho)` in space.
    pub fn from_rho(rho: f64) -> Result<Self> {
        Self::new(rho, rho, rho.sqrt(), rho.sqrt())
    }

    pub fn new(rho: f64, temporal: f64, spatial: f64, shell: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::Config(format!("regularization parameter must be positive, got {rho}")));
        }
        for (name, w) in [("temporal", temporal), ("spatial", spatial), ("shell", shell)] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Config(format!("{name} mollifier width must be finite and >= 0, got {w}")));
            }
        }
        Ok(RegularizationKernel { rho, temporal, spatial, shell })
    }

    /// Row-normalized temporal weights `W[n][m]` for `n_steps` samples of spacing `dt`.
    pub fn temporal_weights(&self, n_steps: usize, dt: f64) -> Vec<Vec<f64>> {
        let r = if self.temporal > 0.0 { (self.temporal / dt).ceil() as isize } else { 0 };
        let n = n_steps as isize;
        let reflect = |m: isize| -> usize {
            let mut m = m;
            // half-sample even reflection, repeated for windows shorter than the kernel
            loop {
                if m < 0 {
                    m = -m - 1;
                } else if m >= n {
                    m = 2 * n - 1 - m;
                } else {
                    return m as usize;
                }
            }
        };
        (0..n)
            .map(|i| {
                let mut w = vec![0.0; n_steps];
                let mut tot = 0.0;
                for o in -r..=r {
                    let phi = if r == 0 { 1.0 } else { bump(o as f64 * dt / self.temporal) };
                    if phi > 0.0 {
                        w[reflect(i + o)] += phi;
                        tot += phi;
                    }
                }
                w.iter_mut().for_each(|x| *x /= tot);
                w
            })
            .collect()
    }

    /// Periodic spatial mollification of one row of `n` samples over period `p`.
    pub fn mollify_periodic(&self, fft: &Fft2, row: &[f64], p: f64, width: f64) -> Vec<f64> {
        if width == 0.0 {
            return row.to_vec();
        }
        fft.apply_symbol(row, |k, _| bump_symbol(TAU * k / p * width))
    }

    /// `r^rho` on a shell trajectory sampled every `dt`: temporal then spatial.
    pub fn regularize_shell(&self, history: &[Vec<f64>], period: f64, dt: f64) -> Vec<Vec<f64>> {
        if history.is_empty() {
            return Vec::new();
        }
        let n = history[0].len();
        let fft = Fft2::new(n, 1);
        self.temporal_weights(history.len(), dt)
            .iter()
            .map(|w| {
                let mut acc = vec![0.0; n];
                for (wm, h) in w.iter().zip(history.iter()) {
                    for (a, x) in acc.iter_mut().zip(h.iter()) {
                        *a += wm * x;
                    }
                }
                self.mollify_periodic(&fft, &acc, period, self.shell)
            })
            .collect()
    }
}

/// The spatial velocity mollifier as an explicit matrix on the flux layout,
/// so that its transpose is available for the stress force.
#[derive(Clone, Debug)]
pub struct SpatialMollifier {
    pub mat: Csr,
    pub mat_t: Csr,
}

impl SpatialMollifier {
    pub fn new(layout: Layout, period: f64, height: f64, kernel: &RegularizationKernel) -> Self {
        let n = layout.len();
        let (nx, nz) = (layout.nx, layout.nz);
        let hx = period / nx as f64;
        let hz = height / nz as f64;
        let fft = Fft2::new(nx, 1);
        let delta = kernel.spatial;
        // vertical smoothing: repeated three-point passes (a, 1 - 2a, a), a <= 1/4,
        // whose total variance matches the bump of half-width delta
        let var = bump_variance() * delta * delta / (hz * hz);
        let passes = if delta > 0.0 { (var / 0.5).ceil().max(1.0) as usize } else { 0 };
        let a = if passes > 0 { var / (2.0 * passes as f64) } else { 0.0 };
        let apply = |v: &[f64]| -> Vec<f64> {
            let psi = layout.stream(v, hx);
            let mut rows: Vec<Vec<f64>> = (0..=nz)
                .map(|jf| {
                    let row: Vec<f64> = (0..nx).map(|i| psi[i * (nz + 1) + jf]).collect();
                    kernel.mollify_periodic(&fft, &row, period, delta)
                })
                .collect();
            rows[0] = vec![0.0; nx];
            for _ in 0..passes {
                rows = (0..=nz)
                    .map(|jf| {
                        if jf == 0 || jf == nz {
                            rows[jf].clone()
                        } else {
                            (0..nx).map(|i| a * rows[jf - 1][i] + (1.0 - 2.0 * a) * rows[jf][i] + a * rows[jf + 1][i]).collect()
                        }
                    })
                    .collect();
            }
            let mut out = vec![0.0; psi.len()];
            for (jf, row) in rows.iter().enumerate() {
                for i in 0..nx {
                    out[i * (nz + 1) + jf] = row[i];
                }
            }
            layout.from_stream(&out, hx)
        };
        let mut trip = Vec::new();
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            for (i, x) in apply(&e).into_iter().enumerate() {
                if x.abs() > 1e-15 {
                    trip.push((i, j, x));
                }
            }
            e[j] = 0.0;
        }
        let mat = Csr::from_triplets(n, n, &trip);
        let mat_t = mat.transpose();
        SpatialMollifier { mat, mat_t }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.mat.mul(v)
    }

    pub fn apply_t(&self, v: &[f64]) -> Vec<f64> {
        self.mat_t.mul(v)
    }
}

/// `R^rho` on a trajectory of flux vectors (one per step): temporal
/// weights, then the spatial mollifier.
pub fn regularize_velocity(history: &[Vec<f64>], weights: &[Vec<f64>], spatial: &SpatialMollifier) -> Vec<Vec<f64>> {
    weights
        .iter()
        .map(|w| {
            let mut acc = vec![0.0; history[0].len()];
            for (wm, h) in w.iter().zip(history.iter()) {
                if *wm != 0.0 {
                    for (a, x) in acc.iter_mut().zip(h.iter()) {
                        *a += wm * x;
                    }
                }
            }
            spatial.apply(&acc)
        })
        .collect()
}
