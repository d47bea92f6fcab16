//! FFT utilities on the periodic grid over the flat torus.
//!
//! Grid values are stored with index `a + n1 * b`.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Signed integer frequency of DFT bin `k` on an `n`-point grid.
/// The Nyquist bin is reported as `+n/2`.
pub fn freq(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

#[derive(Clone)]
pub struct Fft2 {
    pub n1: usize,
    pub n2: usize,
    f1: Arc<dyn Fft<f64>>,
    i1: Arc<dyn Fft<f64>>,
    f2: Arc<dyn Fft<f64>>,
    i2: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.n1, self.n2)
    }
}

impl Fft2 {
    pub fn new(n1: usize, n2: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            n1,
            n2,
            f1: planner.plan_fft_forward(n1),
            i1: planner.plan_fft_inverse(n1),
            f2: planner.plan_fft_forward(n2),
            i2: planner.plan_fft_inverse(n2),
        }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let (n1, n2) = (self.n1, self.n2);
        assert_eq!(data.len(), n1 * n2);
        let (p1, p2) = if inverse { (&self.i1, &self.i2) } else { (&self.f1, &self.f2) };
        for row in data.chunks_mut(n1) {
            p1.process(row);
        }
        if n2 > 1 {
            let mut col = vec![Complex64::new(0.0, 0.0); n2];
            for a in 0..n1 {
                for b in 0..n2 {
                    col[b] = data[a + n1 * b];
                }
                p2.process(&mut col);
                for b in 0..n2 {
                    data[a + n1 * b] = col[b];
                }
            }
        }
        if inverse {
            let s = 1.0 / (n1 * n2) as f64;
            for x in data.iter_mut() {
                *x *= s;
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false)
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true)
    }

    pub fn forward_real(&self, field: &[f64]) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = field.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&mut c);
        c
    }

    /// Multiply the spectrum by a real symbol `s(k1, k2)` given in signed
    /// integer frequencies and return the real part of the result.
    pub fn apply_symbol(&self, field: &[f64], symbol: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut c = self.forward_real(field);
        for b in 0..self.n2 {
            let k2 = freq(b, self.n2);
            for a in 0..self.n1 {
                let k1 = freq(a, self.n1);
                c[a + self.n1 * b] *= symbol(k1, k2);
            }
        }
        self.inverse(&mut c);
        c.iter().map(|z| z.re).collect()
    }

    /// Periodic circular convolution with a kernel given on the same grid
    /// (kernel index 0 is the zero shift).
    pub fn convolve(&self, field: &[f64], kernel: &[f64]) -> Vec<f64> {
        let mut f = self.forward_real(field);
        let k = self.forward_real(kernel);
        for (x, y) in f.iter_mut().zip(k.iter()) {
            *x *= y;
        }
        self.inverse(&mut f);
        f.iter().map(|z| z.re).collect()
    }
}

/// Trigonometric interpolant of periodic grid data on `[0,p1) x [0,p2)`.
#[derive(Clone, Debug)]
pub struct TrigInterpolant {
    n1: usize,
    n2: usize,
    p1: f64,
    p2: f64,
    coeffs: Vec<Complex64>,
}

impl TrigInterpolant {
    pub fn new(field: &[f64], n1: usize, n2: usize, p1: f64, p2: f64) -> Self {
        let fft = Fft2::new(n1, n2);
        let mut coeffs = fft.forward_real(field);
        let s = 1.0 / (n1 * n2) as f64;
        for c in coeffs.iter_mut() {
            *c *= s;
        }
        TrigInterpolant { n1, n2, p1, p2, coeffs }
    }

    /// Value and gradient at `y`.
    pub fn eval(&self, y: [f64; 2]) -> (f64, [f64; 2]) {
        let tau = std::f64::consts::TAU;
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for b in 0..self.n2 {
            let w2 = tau * freq(b, self.n2) / self.p2;
            for a in 0..self.n1 {
                let w1 = tau * freq(a, self.n1) / self.p1;
                let c = self.coeffs[a + self.n1 * b];
                let (s, co) = (w1 * y[0] + w2 * y[1]).sin_cos();
                let e = Complex64::new(co, s) * c;
                v += e.re;
                // d/dy of Re(c e^{i w y}) = Re(i w c e^{i w y}) = -w Im(...)
                g[0] -= w1 * e.im;
                g[1] -= w2 * e.im;
            }
        }
        (v, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_identity() {
        let (n1, n2) = (8, 6);
        let f: Vec<f64> = (0..n1 * n2).map(|i| ((i * 7919) % 13) as f64 * 0.1).collect();
        let fft = Fft2::new(n1, n2);
        let g = fft.apply_symbol(&f, |_, _| 1.0);
        for (a, b) in f.iter().zip(g.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn interpolant_reproduces_nodes_and_mode_derivative() {
        let (n1, n2, p1, p2) = (16, 8, 2.0, 3.0);
        let tau = std::f64::consts::TAU;
        let f: Vec<f64> = (0..n1 * n2)
            .map(|i| {
                let (a, b) = (i % n1, i / n1);
                let y = [a as f64 * p1 / n1 as f64, b as f64 * p2 / n2 as f64];
                (tau * 2.0 * y[0] / p1).cos() + (tau * y[1] / p2).sin()
            })
            .collect();
        let it = TrigInterpolant::new(&f, n1, n2, p1, p2);
        let (v, _) = it.eval([3.0 * p1 / n1 as f64, 2.0 * p2 / n2 as f64]);
        assert!((v - f[3 + n1 * 2]).abs() < 1e-12);
        let y = [0.37, 1.21];
        let (v, g) = it.eval(y);
        let exact = (tau * 2.0 * y[0] / p1).cos() + (tau * y[1] / p2).sin();
        let dx = -(tau * 2.0 / p1) * (tau * 2.0 * y[0] / p1).sin();
        let dy = (tau / p2) * (tau * y[1] / p2).cos();
        assert!((v - exact).abs() < 1e-12);
        assert!((g[0] - dx).abs() < 1e-11 && (g[1] - dy).abs() < 1e-11);
    }
}
