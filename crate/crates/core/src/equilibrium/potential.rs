use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use super::profile::EquilibriumProfile;
use crate::error::{Error, Result};

const TABLE_SIZE: usize = 4096;

/// Periodic magnetic potential `ψ⁰` given by uniform samples and their
/// trigonometric interpolant. `B⁰ = ∂ₓψ⁰`.
#[derive(Debug, Clone, Serialize)]
pub struct MagneticPotential {
    pub period: f64,
    pub samples: Vec<f64>,
    /// Cosine and sine coefficients: `ψ(x) = a₀ + Σ a_k cos(κ_k x) + b_k sin(κ_k x)`.
    pub cos_coefs: Vec<f64>,
    pub sin_coefs: Vec<f64>,
    /// Largest magnitude among the top quarter of the harmonics.
    pub interp_error: f64,
    #[serde(skip)]
    table: Option<HermiteTable>,
}

#[derive(Debug, Clone)]
struct HermiteTable {
    h: f64,
    psi: Vec<f64>,
    b: Vec<f64>,
    db: Vec<f64>,
}

impl MagneticPotential {
    pub fn zero(period: f64) -> Self {
        MagneticPotential {
            period,
            samples: vec![0.0; 4],
            cos_coefs: vec![0.0],
            sin_coefs: vec![0.0],
            interp_error: 0.0,
            table: None,
        }
    }

    pub fn from_samples(period: f64, samples: Vec<f64>) -> Result<Self> {
        let n = samples.len();
        if n < 4 || n % 2 != 0 {
            return Err(Error::Size(format!("potential needs an even number >= 4 of samples, got {n}")));
        }
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
        let half = n / 2;
        let mut cos_coefs = vec![0.0; half + 1];
        let mut sin_coefs = vec![0.0; half + 1];
        cos_coefs[0] = buf[0].re / n as f64;
        for k in 1..half {
            cos_coefs[k] = 2.0 * buf[k].re / n as f64;
            sin_coefs[k] = -2.0 * buf[k].im / n as f64;
        }
        cos_coefs[half] = buf[half].re / n as f64;
        let interp_error = (3 * half / 4..=half)
            .map(|k| cos_coefs[k].abs() + sin_coefs[k].abs())
            .fold(0.0, f64::max);
        let mut pot = MagneticPotential {
            period,
            samples,
            cos_coefs,
            sin_coefs,
            interp_error,
            table: None,
        };
        pot.table = Some(pot.build_table());
        Ok(pot)
    }

    pub fn is_zero(&self) -> bool {
        self.cos_coefs.iter().chain(&self.sin_coefs).all(|c| *c == 0.0)
    }

    fn build_table(&self) -> HermiteTable {
        let h = self.period / TABLE_SIZE as f64;
        let mut psi = Vec::with_capacity(TABLE_SIZE + 1);
        let mut b = Vec::with_capacity(TABLE_SIZE + 1);
        let mut db = Vec::with_capacity(TABLE_SIZE + 1);
        for j in 0..=TABLE_SIZE {
            let x = j as f64 * h;
            psi.push(self.series(x, 0));
            b.push(self.series(x, 1));
            db.push(self.series(x, 2));
        }
        HermiteTable { h, psi, b, db }
    }

    /// `∂ₓⁿ ψ` from the trigonometric interpolant.
    pub fn series(&self, x: f64, order: u32) -> f64 {
        let kappa = 2.0 * PI / self.period;
        let mut acc = if order == 0 { self.cos_coefs[0] } else { 0.0 };
        let shift = order as f64 * PI / 2.0;
        for k in 1..self.cos_coefs.len() {
            let kk = kappa * k as f64;
            let scale = kk.powi(order as i32);
            let arg = kk * x + shift;
            acc += scale * (self.cos_coefs[k] * arg.cos() + self.sin_coefs[k] * arg.sin());
        }
        acc
    }

    pub fn psi(&self, x: f64) -> f64 {
        match &self.table {
            None => 0.0,
            Some(t) => self.hermite(t, x, &t.psi, &t.b),
        }
    }

    /// `B⁰(x)`.
    pub fn field(&self, x: f64) -> f64 {
        match &self.table {
            None => 0.0,
            Some(t) => self.hermite(t, x, &t.b, &t.db),
        }
    }

    fn hermite(&self, t: &HermiteTable, x: f64, f: &[f64], df: &[f64]) -> f64 {
        let xm = x.rem_euclid(self.period);
        let u = xm / t.h;
        let j = (u.floor() as usize).min(TABLE_SIZE - 1);
        let s = u - j as f64;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * f[j] + h10 * t.h * df[j] + h01 * f[j + 1] + h11 * t.h * df[j + 1]
    }

    pub fn max_abs(&self) -> (f64, f64) {
        let n = 1024;
        let mut m0: f64 = 0.0;
        let mut m1: f64 = 0.0;
        for j in 0..n {
            let x = j as f64 * self.period / n as f64;
            m0 = m0.max(self.series(x, 0).abs());
            m1 = m1.max(self.series(x, 1).abs());
        }
        (m0, m1)
    }

    /// `|ψ|_{C¹} = max|ψ| + max|∂ₓψ|`.
    pub fn c1_norm(&self) -> f64 {
        let (a, b) = self.max_abs();
        a + b
    }

    /// Mean of `B⁰` over one period from the table.
    pub fn mean_field(&self) -> f64 {
        match &self.table {
            None => 0.0,
            Some(t) => t.b[..TABLE_SIZE].iter().sum::<f64>() / TABLE_SIZE as f64,
        }
    }
}

/// Information recorded when a state comes from the center-orbit solve.
#[derive(Debug, Clone, Serialize)]
pub struct PotentialSolution {
    pub epsilon: f64,
    pub period: f64,
    pub p_cr: f64,
    pub g_prime0: f64,
    pub c1_norm: f64,
    pub ode_residual: f64,
    pub richardson_gap: f64,
}

/// Profile plus magnetic potential.
#[derive(Debug, Clone)]
pub struct EquilibriumState {
    pub profile: EquilibriumProfile,
    pub potential: MagneticPotential,
    pub homogeneous: bool,
    pub solution: Option<PotentialSolution>,
}

impl EquilibriumState {
    pub fn homogeneous(profile: EquilibriumProfile, period: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidInput(format!("period = {period}")));
        }
        Ok(EquilibriumState {
            profile,
            potential: MagneticPotential::zero(period),
            homogeneous: true,
            solution: None,
        })
    }

    pub fn with_potential(profile: EquilibriumProfile, potential: MagneticPotential) -> Self {
        let homogeneous = potential.is_zero();
        EquilibriumState { profile, potential, homogeneous, solution: None }
    }

    pub fn period(&self) -> f64 {
        self.potential.period
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(period: f64, n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|j| f(j as f64 * period / n as f64)).collect()
    }

    #[test]
    fn interpolant_reproduces_trig_polynomial() {
        let p = 5.0;
        let k = 2.0 * PI / p;
        let f = |x: f64| 0.3 - 0.1 * (k * x).cos() + 0.02 * (3.0 * k * x).sin();
        let pot = MagneticPotential::from_samples(p, sample(p, 64, f)).unwrap();
        for &x in &[0.0, 0.37, 2.2, 4.99, 7.5] {
            assert!((pot.series(x, 0) - f(x)).abs() < 1e-14);
            let df = 0.1 * k * (k * x).sin() + 0.06 * k * (3.0 * k * x).cos();
            assert!((pot.series(x, 1) - df).abs() < 1e-13);
            assert!((pot.psi(x) - f(x)).abs() < 1e-12);
            assert!((pot.field(x) - df).abs() < 1e-11);
        }
        assert!(pot.interp_error < 1e-15);
        assert!(pot.mean_field().abs() < 1e-15);
    }

    #[test]
    fn zero_potential_is_homogeneous() {
        let s = EquilibriumState::homogeneous(EquilibriumProfile::zero(), 2.0).unwrap();
        assert!(s.homogeneous);
        assert_eq!(s.potential.field(1.3), 0.0);
        assert_eq!(s.potential.psi(0.2), 0.0);
    }
}
