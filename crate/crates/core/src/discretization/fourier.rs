//! Orthonormal trigonometric basis on `[0, P)` with trapezoid collocation.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BasisKind {
    Constant,
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BasisFunction {
    pub kind: BasisKind,
    pub harmonic: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FourierBasis {
    pub period: f64,
    /// Number of mean-zero functions, `2K` with `K` harmonics.
    pub n_modes: usize,
    pub mean_zero: bool,
    pub x_grid: Vec<f64>,
    pub x_weights: Vec<f64>,
    pub functions: Vec<BasisFunction>,
    #[serde(skip)]
    values: Vec<Vec<f64>>,
}

pub fn build_fourier_basis(period: f64, n_modes: usize, mean_zero: bool) -> Result<FourierBasis> {
    build_fourier_basis_with_grid(period, n_modes, mean_zero, 4 * n_modes)
}

pub fn build_fourier_basis_with_grid(
    period: f64,
    n_modes: usize,
    mean_zero: bool,
    n_grid: usize,
) -> Result<FourierBasis> {
    if n_modes == 0 || n_modes % 2 != 0 {
        return Err(Error::Size(format!("N_x = {n_modes} must be positive and even")));
    }
    if n_grid < 4 * n_modes {
        return Err(Error::Size(format!("collocation grid {n_grid} < 4 N_x = {}", 4 * n_modes)));
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidInput(format!("period = {period}")));
    }
    let mut functions = Vec::with_capacity(n_modes + 1);
    if !mean_zero {
        functions.push(BasisFunction { kind: BasisKind::Constant, harmonic: 0 });
    }
    for k in 1..=n_modes / 2 {
        functions.push(BasisFunction { kind: BasisKind::Cos, harmonic: k });
        functions.push(BasisFunction { kind: BasisKind::Sin, harmonic: k });
    }
    let dx = period / n_grid as f64;
    let x_grid: Vec<f64> = (0..n_grid).map(|j| j as f64 * dx).collect();
    let x_weights = vec![dx; n_grid];
    let mut basis = FourierBasis {
        period,
        n_modes,
        mean_zero,
        x_grid,
        x_weights,
        functions,
        values: Vec::new(),
    };
    basis.values = (0..basis.len())
        .map(|i| basis.x_grid.iter().map(|&x| basis.eval(i, x)).collect())
        .collect();
    Ok(basis)
}

impl FourierBasis {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn n_grid(&self) -> usize {
        self.x_grid.len()
    }

    pub fn harmonics(&self) -> usize {
        self.n_modes / 2
    }

    /// Angular wavenumber `2 pi k / P` of function `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        2.0 * PI * self.functions[i].harmonic as f64 / self.period
    }

    /// The same basis with the constant removed or added.
    pub fn variant(&self, mean_zero: bool) -> FourierBasis {
        build_fourier_basis_with_grid(self.period, self.n_modes, mean_zero, self.n_grid())
            .expect("sizes already validated")
    }

    pub fn eval(&self, i: usize, x: f64) -> f64 {
        let f = self.functions[i];
        let norm = (2.0 / self.period).sqrt();
        let arg = 2.0 * PI * f.harmonic as f64 * x / self.period;
        match f.kind {
            BasisKind::Constant => 1.0 / self.period.sqrt(),
            BasisKind::Cos => norm * arg.cos(),
            BasisKind::Sin => norm * arg.sin(),
        }
    }

    /// Values of every basis function at `x`, by the angle-addition recurrence.
    pub fn eval_all(&self, x: f64, out: &mut [f64]) {
        let norm = (2.0 / self.period).sqrt();
        let (s1, c1) = (2.0 * PI * x / self.period).sin_cos();
        let mut idx = 0;
        if !self.mean_zero {
            out[0] = 1.0 / self.period.sqrt();
            idx = 1;
        }
        let (mut c, mut s) = (c1, s1);
        for k in 1..=self.harmonics() {
            out[idx] = norm * c;
            out[idx + 1] = norm * s;
            idx += 2;
            if k < self.harmonics() {
                let cn = c * c1 - s * s1;
                s = s * c1 + c * s1;
                c = cn;
            }
        }
    }

    /// Collocation values of function `i`.
    pub fn grid_values(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    /// `⟨g, e_i⟩` for every basis function.
    pub fn project(&self, g: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                self.values[i]
                    .iter()
                    .zip(g)
                    .zip(&self.x_weights)
                    .map(|((e, gv), w)| e * gv * w)
                    .sum()
            })
            .collect()
    }

    /// Collocation values of `∂ₓ^order Σ c_i e_i`.
    pub fn synthesize(&self, coefs: &[f64], order: u32) -> Vec<f64> {
        self.x_grid
            .iter()
            .map(|&x| {
                coefs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c * self.derivative_at(i, x, order))
                    .sum()
            })
            .collect()
    }

    pub fn derivative_at(&self, i: usize, x: f64, order: u32) -> f64 {
        let f = self.functions[i];
        if order == 0 {
            return self.eval(i, x);
        }
        if f.kind == BasisKind::Constant {
            return 0.0;
        }
        let k = self.wavenumber(i);
        let norm = (2.0 / self.period).sqrt();
        let arg = k * x;
        // d^n/dx^n cos(kx) = k^n cos(kx + n pi/2); same shift for sin.
        let shift = order as f64 * PI / 2.0;
        let scale = norm * k.powi(order as i32);
        match f.kind {
            BasisKind::Cos => scale * (arg + shift).cos(),
            BasisKind::Sin => scale * (arg + shift).sin(),
            BasisKind::Constant => unreachable!(),
        }
    }
}

/// Trapezoid quadrature of collocation values over one period.
pub fn integrate_spatial(basis: &FourierBasis, g: &[f64]) -> f64 {
    g.iter().zip(&basis.x_weights).map(|(v, w)| v * w).sum()
}

/// Spectral derivative of uniformly sampled periodic data.
pub fn spectral_derivative(values: &[f64], period: f64) -> Vec<f64> {
    let n = values.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    for (m, c) in buf.iter_mut().enumerate() {
        let freq = if m < n / 2 {
            m as f64
        } else if m == n / 2 && n % 2 == 0 {
            0.0
        } else {
            m as f64 - n as f64
        };
        *c *= Complex64::new(0.0, 2.0 * PI * freq / period);
    }
    inv.process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}
