//! The fifth-order regularizer `L(eta) = int |grad^5 eta|^2` on the periodic
//! grid, realized spectrally.

use crate::spectral::Fft2;

#[derive(Clone, Debug)]
pub struct Regularizer {
    pub fft: Fft2,
    pub period: [f64; 2],
}

impl Regularizer {
    pub fn new(n: [usize; 2], period: [f64; 2]) -> Self {
        Regularizer { fft: Fft2::new(n[0], n[1]), period }
    }

    /// `|2 pi k / P|^10` for signed integer frequencies.
    pub fn symbol(&self, k1: f64, k2: f64) -> f64 {
        let tau = std::f64::consts::TAU;
        let w1 = tau * k1 / self.period[0];
        let w2 = tau * k2 / self.period[1];
        (w1 * w1 + w2 * w2).powi(5)
    }

    /// `L(eta)` with the normalized measure.
    pub fn energy(&self, eta: &[f64]) -> f64 {
        let (n1, n2) = (self.fft.n1, self.fft.n2);
        let c = self.fft.forward_real(eta);
        let n = (n1 * n2) as f64;
        let mut e = 0.0;
        for b in 0..n2 {
            for a in 0..n1 {
                let s = self.symbol(crate::spectral::freq(a, n1), crate::spectral::freq(b, n2));
                e += s * c[a + n1 * b].norm_sqr();
            }
        }
        e / (n * n)
    }

    /// `rho L'(eta)`, symbol `2 rho |2 pi k / P|^10`.
    pub fn gradient(&self, eta: &[f64], rho: f64) -> Vec<f64> {
        self.fft.apply_symbol(eta, |k1, k2| 2.0 * rho * self.symbol(k1, k2))
    }

    /// Solves `s(k) x_hat = rhs_hat` mode by mode for a positive symbol `s`.
    pub fn solve_diagonal(&self, rhs: &[f64], symbol: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.fft.apply_symbol(rhs, |k1, k2| 1.0 / symbol(k1, k2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_are_free() {
        let r = Regularizer::new([8, 4], [1.0, 2.0]);
        assert!(r.gradient(&[3.0; 32], 0.5).iter().all(|x| x.abs() < 1e-9));
        assert!(r.energy(&[3.0; 32]).abs() < 1e-20);
    }
}
