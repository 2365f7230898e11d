//! Time-quadrature weights for `Q^λ k = ∫_{−∞}^0 λ e^{λs} k(s) ds`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::discretization::gauss_legendre_on;

/// Weights for a `T`-periodic integrand sampled at `s_q = −qT/n`.
///
/// The sampled signal is read as a trigonometric polynomial in `s` and each
/// harmonic `e^{iω_m s}` is integrated exactly, giving `λ/(λ + iω_m)`. The
/// rule is therefore exact for every resolved harmonic at any `λ ≥ 0`, and at
/// `λ = 0` reduces to the orbit average.
pub struct OrbitWeights {
    n: usize,
    ifft: Arc<dyn Fft<f64>>,
}

impl OrbitWeights {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2 && n % 2 == 0, "sample count must be even");
        let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
        OrbitWeights { n, ifft }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn compute(&self, lambda: f64, period: f64, out: &mut [f64], buf: &mut Vec<Complex64>) {
        let n = self.n;
        buf.clear();
        buf.resize(n, Complex64::new(0.0, 0.0));
        let rho = |m: i64| -> Complex64 {
            if m == 0 {
                return Complex64::new(1.0, 0.0);
            }
            let w = 2.0 * PI * m as f64 / period;
            Complex64::new(lambda, 0.0) / Complex64::new(lambda, w)
        };
        let half = n / 2;
        for m in 0..half {
            buf[m] = rho(m as i64);
            if m > 0 {
                buf[n - m] = rho(-(m as i64));
            }
        }
        // Nyquist: average of ±n/2 keeps the weights real.
        buf[half] = Complex64::new(rho(half as i64).re, 0.0);
        self.ifft.process(buf);
        for (o, c) in out.iter_mut().zip(buf.iter()) {
            *o = c.re / n as f64;
        }
    }
}

/// Gauss–Legendre nodes on `[−S, 0]` with `S = −ln(tol)/λ`, returned in
/// decreasing order with weights that already include `λ e^{λs}`.
pub fn window_rule(lambda: f64, tol_tail: f64, n_s: usize) -> (Vec<f64>, Vec<f64>) {
    let horizon = -tol_tail.ln() / lambda;
    let (s, w) = gauss_legendre_on(n_s, -horizon, 0.0);
    let mut pairs: Vec<(f64, f64)> = s
        .into_iter()
        .zip(w)
        .map(|(s, w)| (s, w * lambda * (lambda * s).exp()))
        .collect();
    pairs.reverse();
    pairs.into_iter().unzip()
}
