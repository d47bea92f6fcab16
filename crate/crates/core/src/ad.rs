//! Forward-mode automatic differentiation.
//!
//! `Dual<N>` carries a gradient with respect to `N` seeded inputs and is used
//! for the Koiter energy density. `Jet2` carries value, gradient and Hessian
//! in two variables and is used to differentiate surface parameterizations.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self> {
    fn cst(x: f64) -> Self;
    fn val(&self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;

    fn scale(self, s: f64) -> Self {
        self * Self::cst(s)
    }
}

impl Scalar for f64 {
    fn cst(x: f64) -> Self {
        x
    }
    fn val(&self) -> f64 {
        *self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<const N: usize> {
    pub v: f64,
    pub d: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn var(v: f64, i: usize) -> Self {
        let mut d = [0.0; N];
        d[i] = 1.0;
        Dual { v, d }
    }

    fn chain(self, f: f64, df: f64) -> Self {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x *= df;
        }
        Dual { v: f, d }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut d = self.d;
        for (x, y) in d.iter_mut().zip(o.d.iter()) {
            *x += y;
        }
        Dual { v: self.v + o.v, d }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut d = self.d;
        for (x, y) in d.iter_mut().zip(o.d.iter()) {
            *x -= y;
        }
        Dual { v: self.v - o.v, d }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = self.d[i] * o.v + self.v * o.d[i];
        }
        Dual { v: self.v * o.v, d }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.v;
        let v = self.v * inv;
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = (self.d[i] - v * o.d[i]) * inv;
        }
        Dual { v, d }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x = -*x;
        }
        Dual { v: -self.v, d }
    }
}

impl<const N: usize> Scalar for Dual<N> {
    fn cst(x: f64) -> Self {
        Dual { v: x, d: [0.0; N] }
    }
    fn val(&self) -> f64 {
        self.v
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    fn scale(self, s: f64) -> Self {
        let mut d = self.d;
        for x in d.iter_mut() {
            *x *= s;
        }
        Dual { v: self.v * s, d }
    }
}

/// Second-order jet in two variables: value, gradient, Hessian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub g: [f64; 2],
    pub h: [[f64; 2]; 2],
}

impl Jet2 {
    pub fn var(v: f64, i: usize) -> Self {
        let mut g = [0.0; 2];
        g[i] = 1.0;
        Jet2 { v, g, h: [[0.0; 2]; 2] }
    }

    /// Apply a scalar function given its value and first two derivatives at `self.v`.
    fn chain(self, f: f64, df: f64, ddf: f64) -> Self {
        let mut out = Jet2 { v: f, g: [0.0; 2], h: [[0.0; 2]; 2] };
        for i in 0..2 {
            out.g[i] = df * self.g[i];
            for j in 0..2 {
                out.h[i][j] = ddf * self.g[i] * self.g[j] + df * self.h[i][j];
            }
        }
        out
    }
}

impl Add for Jet2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut r = self;
        r.v += o.v;
        for i in 0..2 {
            r.g[i] += o.g[i];
            for j in 0..2 {
                r.h[i][j] += o.h[i][j];
            }
        }
        r
    }
}

impl Sub for Jet2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for Jet2 {
    type Output = Self;
    fn neg(self) -> Self {
        let mut r = self;
        r.v = -r.v;
        for i in 0..2 {
            r.g[i] = -r.g[i];
            for j in 0..2 {
                r.h[i][j] = -r.h[i][j];
            }
        }
        r
    }
}

impl Mul for Jet2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut r = Jet2 { v: self.v * o.v, g: [0.0; 2], h: [[0.0; 2]; 2] };
        for i in 0..2 {
            r.g[i] = self.g[i] * o.v + self.v * o.g[i];
            for j in 0..2 {
                r.h[i][j] = self.h[i][j] * o.v + self.g[i] * o.g[j] + self.g[j] * o.g[i] + self.v * o.h[i][j];
            }
        }
        r
    }
}

impl Div for Jet2 {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let x = o.v;
        self * o.chain(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }
}

impl Scalar for Jet2 {
    fn cst(x: f64) -> Self {
        Jet2 { v: x, g: [0.0; 2], h: [[0.0; 2]; 2] }
    }
    fn val(&self) -> f64 {
        self.v
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }
    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
}

pub fn dot3<S: Scalar>(a: &[S; 3], b: &[S; 3]) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross3<S: Scalar>(a: &[S; 3], b: &[S; 3]) -> [S; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_matches_hand_derivative() {
        // f(x, y) = sqrt(x*y + 1) / x
        let x = Dual::<2>::var(1.3, 0);
        let y = Dual::<2>::var(0.7, 1);
        let f = (x * y + Dual::cst(1.0)).sqrt() / x;
        let s = (1.3f64 * 0.7 + 1.0).sqrt();
        let dfx = (0.7 / (2.0 * s)) / 1.3 - s / (1.3 * 1.3);
        let dfy = (1.3 / (2.0 * s)) / 1.3;
        assert!((f.d[0] - dfx).abs() < 1e-14);
        assert!((f.d[1] - dfy).abs() < 1e-14);
    }

    #[test]
    fn jet_hessian_of_trig_product() {
        // f = sin(x) cos(y): f_xy = -cos(x) sin(y)
        let (x0, y0) = (0.4, 1.1);
        let f = Jet2::var(x0, 0).sin() * Jet2::var(y0, 1).cos();
        assert!((f.h[0][1] + x0.cos() * y0.sin()).abs() < 1e-14);
        assert!((f.h[0][0] + x0.sin() * y0.cos()).abs() < 1e-14);
        assert!((f.h[1][1] + x0.sin() * y0.cos()).abs() < 1e-14);
    }

    #[test]
    fn jet_quotient_and_sqrt() {
        let x = Jet2::var(2.0, 0);
        let y = Jet2::var(3.0, 1);
        let f = (x * x + y).sqrt() / y;
        // brute force second derivative in x
        let g = |a: f64, b: f64| (a * a + b).sqrt() / b;
        let h = 1e-4;
        let fxx = (g(2.0 + h, 3.0) - 2.0 * g(2.0, 3.0) + g(2.0 - h, 3.0)) / (h * h);
        assert!((f.h[0][0] - fxx).abs() < 1e-6);
    }
}
